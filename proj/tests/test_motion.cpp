#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "adiatherm/motion.hpp"
#include "adiatherm/units.hpp"

using namespace adiatherm;

namespace {

double total(const MotionDistribution& d) {
    return std::accumulate(d.weights.begin(), d.weights.end(), 0.0) + d.tail_mass;
}

double nbar_of_x(double x) { return 1.0 / std::expm1(x); }

// thermal p_n as a function of x, for finite differences
double thermal_p(int n, double x) {
    const double nb = nbar_of_x(x);
    return std::pow(nb / (1.0 + nb), n) / (1.0 + nb);
}

}  // namespace

TEST(Thermal, SmallCutoffExample) {
    const auto d = thermal_weights_fixed(1.0, 2);
    ASSERT_EQ(d.weights.size(), 3u);
    EXPECT_DOUBLE_EQ(d.weights[0], 0.5);
    EXPECT_DOUBLE_EQ(d.weights[1], 0.25);
    EXPECT_DOUBLE_EQ(d.weights[2], 0.125);
    EXPECT_DOUBLE_EQ(d.tail_mass, 0.125);
}

TEST(Thermal, ZeroTemperatureLimit) {
    const auto d = thermal_weights(1e-9);
    EXPECT_NEAR(d.weights[0], 1.0, 1e-8);
}

TEST(Thermal, CutoffForNbar15) {
    EXPECT_EQ(thermal_cutoff(15.0, 1e-6), 214);
    const double q = 15.0 / 16.0;
    EXPECT_LE(std::pow(q, 215), 1e-6);
    EXPECT_GT(std::pow(q, 214), 1e-6);
}

TEST(Thermal, CutoffRaisedToMinimum) {
    EXPECT_EQ(thermal_weights(0.01, 1e-8, 16).n_max(), 16);
    EXPECT_THROW(thermal_weights(0.0), std::domain_error);
    EXPECT_THROW(thermal_weights(-1.0), std::domain_error);
}

TEST(Thermal, NormalizedWithTail) {
    for (double nb : {0.01, 0.3, 1.0, 4.0, 15.0, 40.0}) {
        const auto d = thermal_weights(nb);
        EXPECT_NEAR(total(d), 1.0, 1e-12) << nb;
        for (double w : d.weights) EXPECT_GE(w, 0.0);
        EXPECT_LE(d.tail_mass, kDefaultTailTol);
    }
}

TEST(ThermalDerivative, Examples) {
    for (double x : {0.1, 1.0, 3.0}) EXPECT_LT(thermal_weight_dT(0, x), 0.0);
    EXPECT_NEAR(thermal_weight_dT(1, std::log(2.0)), 0.0, 1e-15);
    for (double x : {0.2, 1.0, 2.5}) {
        const auto d = thermal_weights(nbar_of_x(x), 1e-14);
        const auto dw = thermal_weight_derivatives(d);
        const double s = std::accumulate(dw.weights.begin(), dw.weights.end(), 0.0) + dw.tail;
        EXPECT_NEAR(s, 0.0, 1e-12) << x;
    }
}

TEST(ThermalDerivative, MatchesFiniteDifferences) {
    // T dp/dT = -x dp/dx; central difference with relative step 1e-5 in T
    for (double x : {0.05, 0.1, 0.3, 1.0, 2.0, 5.0})
        for (int n = 0; n <= 30; ++n) {
            const double h = 1e-5;
            const double fd = (thermal_p(n, x / (1.0 + h)) - thermal_p(n, x / (1.0 - h))) / (2.0 * h);
            const double an = thermal_weight_dT(n, x);
            if (std::abs(an) < 1e-200) continue;
            EXPECT_LE(std::abs(fd - an), 1e-6 * std::abs(an) + 1e-14 * thermal_p(n, x)) << "x=" << x << " n=" << n;
        }
}

TEST(ThermalDerivative, VectorFormMatchesScalar) {
    const auto d = thermal_weights(2.5);
    const auto dw = thermal_weight_derivatives(d);
    const double x = std::log1p(1.0 / 2.5);
    for (int n = 0; n <= 40; ++n) EXPECT_NEAR(dw.weights[n], thermal_weight_dT(n, x), 1e-13) << n;
}

TEST(Coherent, Examples) {
    const auto vac = coherent_weights(0.0);
    EXPECT_EQ(vac.weights[0], 1.0);
    EXPECT_EQ(vac.tail_mass, 0.0);
    const auto c = coherent_weights(1.2);
    EXPECT_DOUBLE_EQ(c.weights[0], std::exp(-1.44));
    EXPECT_NEAR(c.weights[0], 0.23693, 5e-6);
    EXPECT_NEAR(total(c), 1.0, 1e-12);
    EXPECT_LE(c.tail_mass, kDefaultTailTol);
}

TEST(Cat, ParityOfEvenAndOddCats) {
    const auto even = cat_weights(2.0, 0.0);
    for (int n = 1; n <= even.n_max(); n += 2) EXPECT_EQ(even.weights[n], 0.0);
    const auto odd = cat_weights(2.0, std::numbers::pi / 2);
    for (int n = 0; n <= odd.n_max(); n += 2) EXPECT_NEAR(odd.weights[n], 0.0, 1e-30);
}

TEST(Cat, NormalizationForLargeAlpha) {
    for (double th : {0.0, 0.3, 1.0, 2.0}) EXPECT_NEAR(cat_normalization(3.0, th), 1.0, 1e-7);
}

TEST(Cat, NormalizedWithTail) {
    for (double a : {0.3, 1.0, 2.0, 3.5})
        for (double th : {0.0, 0.2, 0.785, 1.4}) {
            const auto d = cat_weights(a, th);
            EXPECT_NEAR(total(d), 1.0, 1e-12);
            for (double w : d.weights) EXPECT_GE(w, 0.0);
        }
}

TEST(Cat, PhasePeriod) {
    const auto a = cat_weights_fixed(1.7, 0.4, 30);
    const auto b = cat_weights_fixed(1.7, 0.4 + std::numbers::pi, 30);
    for (int n = 0; n <= 30; ++n) EXPECT_NEAR(a.weights[n], b.weights[n], 1e-15);
}

TEST(Cat, QuarterPhaseIsPoisson) {
    // cos 2theta = 0: the interference term vanishes and the weights are Poisson,
    // so the parity imbalance is e^{-2 alpha^2}, not zero
    const auto d = cat_weights(1.5, std::numbers::pi / 4, 1e-14);
    const auto c = coherent_weights(1.5, 1e-14);
    double even = 0.0, odd = 0.0;
    for (int n = 0; n <= d.n_max(); ++n) {
        (n % 2 ? odd : even) += d.weights[n];
        if (n <= c.n_max()) EXPECT_NEAR(d.weights[n], c.weights[n], 1e-15);
    }
    EXPECT_NEAR(even - odd, std::exp(-4.5), 1e-12);
    EXPECT_NEAR(cat_weights(4.0, std::numbers::pi / 4).weights[15], coherent_weights(4.0).weights[15], 1e-15);
}

TEST(CatDerivative, Examples) {
    const auto dw = cat_weight_derivatives(2.0, 0.1, 60);
    EXPECT_NEAR(std::accumulate(dw.begin(), dw.end(), 0.0), 0.0, 1e-12);
    const auto at0 = cat_weight_derivatives(2.0, 0.0, 40);
    for (int n = 0; n <= 40; n += 2) EXPECT_EQ(at0[n], 0.0);

    const double h = 1e-5;
    auto p1 = [](double eps) { return cat_weights_fixed(2.0, 2.0 * eps, 1).weights[1]; };
    const double fd = (p1(0.1 + h) - p1(0.1 - h)) / (2.0 * h);
    EXPECT_NEAR(cat_weight_deps(2.0, 0.1, 1), fd, 1e-6 * std::abs(fd));
}

TEST(CatDerivative, MatchesFiniteDifferencesEverywhere) {
    const double h = 1e-5;
    for (double a : {0.5, 1.0, 2.0})
        for (double eps : {0.01, 0.1, 0.3}) {
            const auto an = cat_weight_derivatives(a, eps, 25);
            const auto up = cat_weights_fixed(a, a * (eps + h), 25);
            const auto dn = cat_weights_fixed(a, a * (eps - h), 25);
            for (int n = 0; n <= 25; ++n) {
                const double fd = (up.weights[n] - dn.weights[n]) / (2.0 * h);
                EXPECT_LE(std::abs(an[n] - fd), 1e-6 * std::abs(an[n]) + 1e-13) << a << " " << eps << " " << n;
            }
        }
}

TEST(Temperature, Conversions) {
    const double w = units::angular_from_mhz(6.0);
    const TemperaturePoint t1 = T_from_nbar(w, 1.0);
    EXPECT_NEAR(t1.x, std::log(2.0), 1e-15);
    EXPECT_NEAR(t1.kelvin, units::hbar * w / (units::k_B * std::log(2.0)), 1e-18);
    EXPECT_NEAR(t1.kelvin, 4.1546e-4, 1e-7);
    const TemperaturePoint back = nbar_from_T(w, t1.kelvin);
    EXPECT_NEAR(back.nbar, 1.0, 1e-12);
    EXPECT_LT(nbar_from_T(w, 1e-7).nbar, 1e-100);
    EXPECT_THROW(nbar_from_T(w, 0.0), std::domain_error);
    EXPECT_THROW(T_from_nbar(-w, 1.0), std::domain_error);
}
