#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "adiatherm/dynamics.hpp"
#include "adiatherm/metrology.hpp"
#include "adiatherm/motion.hpp"
#include "adiatherm/units.hpp"

using namespace adiatherm;

namespace {

struct ThermalPopulations {
    Eigen::VectorXd p, dp;  // dp = T dP/dT
    double x;
};

ThermalPopulations push_thermal(const DickeResponse& r, double nbar, double tol = 1e-12) {
    const auto d = thermal_weights(nbar, tol, r.spin.max_level() + 4);
    const auto dw = thermal_weight_derivatives(d);
    return {final_dicke_populations(r, d, 1.0), dicke_population_derivatives(r, dw.weights, dw.tail),
            std::log1p(1.0 / nbar)};
}

PhysicalParams ions(int n) {
    PhysicalParams p;
    p.num_ions = n;
    return p;
}

}  // namespace

TEST(ClassicalFisher, TwoOutcomes) {
    const double p = 0.3, d = 0.7;
    const std::vector<double> P{p, 1 - p}, dP{d, -d};
    EXPECT_NEAR(classical_fisher(P, dP), d * d / (p * (1 - p)), 1e-14);
}

TEST(ClassicalFisher, NoSignalNoInformation) {
    const std::vector<double> P{0.2, 0.5, 0.3}, dP{0.0, 0.0, 0.0};
    EXPECT_EQ(classical_fisher(P, dP), 0.0);
}

TEST(ClassicalFisher, SingularOutcomesFlagged) {
    const std::vector<double> P{0.0, 1.0}, dP{1e-3, -1e-3};
    FisherDiagnostics diag;
    const double f = classical_fisher(P, dP, &diag);
    EXPECT_EQ(diag.singular_outcomes, 1);
    EXPECT_TRUE(std::isfinite(f));
}

TEST(ClassicalFisher, FockBasisSaturatesQfi) {
    const double x = 1.0;
    const auto d = thermal_weights_fixed(1.0 / std::expm1(x), 300);
    std::vector<double> dp(d.weights.size());
    for (int n = 0; n <= 300; ++n) dp[n] = thermal_weight_dT(n, x);
    const double fc = classical_fisher(d.weights, dp);
    EXPECT_NEAR(fc, qfi_thermal_scaled(x), 1e-6 * qfi_thermal_scaled(x));
}

TEST(ClassicalFisher, MergingOutcomes) {
    // proportional pairs merge without loss; arbitrary merges never gain
    const std::vector<double> P{0.1, 0.2, 0.3, 0.4}, dP{0.05, 0.1, -0.2, 0.05};
    const double full = classical_fisher(P, dP);
    const std::vector<double> Pm{0.3, 0.3, 0.4}, dPm{0.15, -0.2, 0.05};
    EXPECT_NEAR(classical_fisher(Pm, dPm), full, 1e-15);
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        int a = pick(rng), b = pick(rng);
        if (a == b) continue;
        std::vector<double> q, dq;
        for (int i = 0; i < 4; ++i)
            if (i != a && i != b) {
                q.push_back(P[i]);
                dq.push_back(dP[i]);
            }
        q.push_back(P[a] + P[b]);
        dq.push_back(dP[a] + dP[b]);
        EXPECT_LE(classical_fisher(q, dq), full * (1 + 1e-15));
    }
}

TEST(Qfi, Limits) {
    EXPECT_NEAR(qfi_thermal_scaled(1e-6), 1.0, 1e-12);
    EXPECT_NEAR(qfi_thermal_scaled(2.0), 1.0 / std::pow(std::sinh(1.0), 2), 1e-15);
    EXPECT_NEAR(qfi_thermal_scaled(2.0), 0.7240616609663105, 1e-15);  // mpmath csch(1)^2
    EXPECT_LT(qfi_thermal_scaled(60.0), 1e-20);
    EXPECT_EQ(qfi_thermal_scaled(5000.0), 0.0);
    const double w = units::angular_from_mhz(6.0);
    const double T = T_from_nbar(w, 1.0).kelvin;
    EXPECT_NEAR(qfi_thermal(w, T) * T * T, qfi_thermal_scaled(std::log(2.0)), 1e-12);
}

TEST(Sld, Properties) {
    const double w = units::angular_from_mhz(6.0);
    for (double nbar : {0.6, 1.0, 3.0}) {
        const TemperaturePoint tp = T_from_nbar(w, nbar);
        const auto l = sld_thermal_diagonal(w, tp.kelvin, 300);
        const auto d = thermal_weights_fixed(nbar, 300);
        double m1 = 0.0, m2 = 0.0;
        for (int n = 0; n <= 300; ++n) {
            m1 += d.weights[n] * l[n];
            m2 += d.weights[n] * l[n] * l[n];
        }
        EXPECT_NEAR(m1 * tp.kelvin, 0.0, 1e-9);
        const double fq = qfi_thermal(w, tp.kelvin);
        if (tp.x >= 0.5) EXPECT_NEAR(m2, fq, 1e-6 * fq) << nbar;
        EXPECT_NEAR(l[0], -nbar * units::hbar * w / (units::k_B * tp.kelvin * tp.kelvin), 1e-12 * std::abs(l[0]));
    }
}

TEST(FinalPopulations, PerfectTransferOfThermalState) {
    const Spin s = Spin::from_ions(4);
    const auto r = DickeResponse::perfect(s, 60);
    const auto d = thermal_weights(1.3, 1e-10, 8);
    const auto P = final_dicke_populations(r, d);
    for (int l = 0; l < 4; ++l) EXPECT_NEAR(P[l], d.weights[l], 1e-15);
    const double q = 1.3 / 2.3;
    EXPECT_NEAR(P[4], std::pow(q, 4), 1e-12);
    EXPECT_NEAR(P.sum(), 1.0, 1e-12);
}

TEST(FinalPopulations, ColdLimit) {
    const auto r = DickeResponse::perfect(Spin::from_ions(3), 20);
    const auto P = final_dicke_populations(r, thermal_weights(1e-9, 1e-8, 7));
    EXPECT_NEAR(P[0], 1.0, 1e-8);
}

TEST(FinalPopulations, CatParity) {
    const auto r = DickeResponse::perfect(Spin::from_ions(30), 60);
    const auto d = cat_weights(2.0, std::numbers::pi / 4, 1e-10, 34);
    const auto P = final_dicke_populations(r, d);
    double even = 0.0, odd = 0.0;
    for (int l = 0; l <= 30; ++l) (l % 2 ? odd : even) += P[l];
    // cos 2theta = 0 leaves plain Poisson weights: even - odd = e^{-2 alpha^2}
    EXPECT_NEAR(even - odd, std::exp(-8.0), 1e-9);
}

TEST(FinalPopulations, CutoffErrors) {
    const auto r = DickeResponse::perfect(Spin::from_ions(2), 10);
    EXPECT_THROW(final_dicke_populations(r, thermal_weights_fixed(1.0, 20)), CutoffError);
    EXPECT_THROW(final_dicke_populations(r, thermal_weights_fixed(1.0, 5), 1e-6), CutoffError);
}

TEST(Moments, Examples) {
    const Spin s6 = Spin::from_ions(6);
    Eigen::VectorXd ground = Eigen::VectorXd::Zero(7);
    ground[0] = 1.0;
    EXPECT_EQ(expected_sz(ground, s6), -3.0);
    EXPECT_EQ(variance_sz(ground, s6), 0.0);

    const Spin half = Spin::from_ions(1);
    const auto r = DickeResponse::perfect(half, 80);
    const auto P = final_dicke_populations(r, thermal_weights(1.0, 1e-15, 5));
    EXPECT_NEAR(expected_sz(P, half), 0.0, 1e-14);
    EXPECT_NEAR(saturated_transfer_moments(1.0, half).mean, 0.0, 1e-15);
    EXPECT_NEAR(saturated_transfer_moments_alt(1.0, half).mean, -0.125, 1e-15);
}

TEST(Moments, OracleMatchesPerfectTransfer) {
    for (int n : {1, 4, 12, 13}) {
        const Spin s = Spin::from_ions(n);
        const auto r = DickeResponse::perfect(s, 400);
        for (double nbar : {0.1, 0.5, 2.0, 10.0}) {
            const auto P = final_dicke_populations(r, thermal_weights(nbar, 1e-13, n + 4));
            const Moments m = saturated_transfer_moments(nbar, s);
            EXPECT_NEAR(expected_sz(P, s), m.mean, 1e-10);
            EXPECT_NEAR(variance_sz(P, s), m.variance, 1e-9);
            // closed-form mean n - S - nbar q^{2S}
            const double q = nbar / (1 + nbar);
            EXPECT_NEAR(m.mean, nbar - s.value() - nbar * std::pow(q, n), 1e-10);
        }
    }
}

TEST(MomentSensitivity, Basics) {
    const std::vector<double> grid{0.1, 0.3, 0.4, 0.9, 1.5};
    std::vector<double> flat(5, 2.0), var(5, 0.5), quad(5);
    for (int i = 0; i < 5; ++i) quad[i] = grid[i] * grid[i];
    for (const auto& v : moment_sensitivity(flat, var, grid)) EXPECT_NEAR(*v, 0.0, 1e-12);
    const auto s = moment_sensitivity(quad, var, grid);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(*s[i], 4 * grid[i] * grid[i] / 0.5, 1e-10);
    var[2] = 0.0;
    EXPECT_FALSE(moment_sensitivity(quad, var, grid)[2].has_value());
}

TEST(Fidelity, Basics) {
    DiagonalMixedState a{{"0", "1", "2"}, {0.5, 0.3, 0.2}}, b{{"0", "1", "2"}, {0.0, 0.0, 1.0}};
    EXPECT_NEAR(state_fidelity(a, a), 1.0, 1e-15);
    EXPECT_NEAR(state_fidelity(a, b), state_fidelity(b, a), 1e-15);
    DiagonalMixedState c{{"0", "1", "2"}, {1.0, 0.0, 0.0}};
    EXPECT_EQ(state_fidelity(b, c), 0.0);
    DiagonalMixedState ap{{"2", "0", "1"}, {0.2, 0.5, 0.3}}, bp{{"2", "0", "1"}, {1.0, 0.0, 0.0}};
    EXPECT_NEAR(state_fidelity(ap, bp), state_fidelity(a, b), 1e-15);
}

TEST(Fidelity, DenseAndBlockAgree) {
    Eigen::VectorXcd u(3), v(3);
    u << 1.0, std::complex<double>(0.0, 1.0), 0.5;
    v << 0.2, 1.0, std::complex<double>(0.3, -0.4);
    u.normalize();
    v.normalize();
    const Eigen::MatrixXcd ru = u * u.adjoint(), rv = v * v.adjoint();
    EXPECT_NEAR(state_fidelity(ru, ru), 1.0, 1e-14);
    EXPECT_NEAR(state_fidelity(ru, rv), std::norm(u.dot(v)), 1e-14);
    Eigen::VectorXcd w(3);
    w << 0.0, 0.0, 1.0;
    Eigen::VectorXcd z(3);
    z << 1.0, 0.0, 0.0;
    EXPECT_NEAR(state_fidelity(Eigen::MatrixXcd(w * w.adjoint()), Eigen::MatrixXcd(z * z.adjoint())), 0.0, 1e-15);

    BlockDiagonalState A{{0.3 * ru, Eigen::MatrixXcd::Identity(2, 2) * 0.35}};
    BlockDiagonalState B{{0.6 * rv, Eigen::MatrixXcd::Identity(2, 2) * 0.2}};
    Eigen::MatrixXcd da = Eigen::MatrixXcd::Zero(5, 5), db = Eigen::MatrixXcd::Zero(5, 5);
    da.topLeftCorner(3, 3) = A.blocks[0];
    da.bottomRightCorner(2, 2) = A.blocks[1];
    db.topLeftCorner(3, 3) = B.blocks[0];
    db.bottomRightCorner(2, 2) = B.blocks[1];
    EXPECT_NEAR(state_fidelity(A, B), state_fidelity(da, db), 1e-14);
}

TEST(ConfigLevelFisher, EqualsDickeLevel) {
    const auto r = DickeResponse::perfect(Spin::from_ions(1), 60);
    const auto t1 = push_thermal(r, 0.8);
    auto [c1, d1] = config_level_fisher_equivalence(t1.p, t1.dp, 1);
    EXPECT_EQ(c1, d1);

    const auto r4 = dicke_response(ions(4), {units::angular_from_khz(25), units::angular_from_khz(5),
                                             units::angular_from_khz(5.5)}, 60);
    const auto t4 = push_thermal(r4, 0.8);
    auto [c4, d4] = config_level_fisher_equivalence(t4.p, t4.dp, 4);
    EXPECT_NEAR(c4, d4, 1e-12 * d4);
}

TEST(Optimality, PerfectTransferClosedForm) {
    // perfect transfer loses exactly the fraction q^{2S} of the quantum Fisher information
    for (int n : {1, 2, 4, 6, 12})
        for (double nbar : {0.05, 0.5, 1.0, 2.0, 6.0}) {
            const auto r = DickeResponse::perfect(Spin::from_ions(n), 700);
            const auto t = push_thermal(r, nbar, 1e-14);
            const double ratio = classical_fisher(t.p, t.dp) / qfi_thermal_scaled(t.x);
            EXPECT_NEAR(ratio, 1.0 - std::pow(nbar / (1 + nbar), n), 1e-9) << n << " " << nbar;
        }
}

TEST(Optimality, BoundWhereAttainable) {
    // F_C >= 0.95 F_Q for 2S >= 4 nbar holds once 2S >= 6; below that the closed form
    // 1 - q^{2S} drops under 0.95 at the edge of the range
    for (int n = 6; n <= 14; ++n) {
        const auto r = DickeResponse::perfect(Spin::from_ions(n), 300);
        for (double nbar = 0.05; nbar <= n / 4.0 + 1e-12; nbar += 0.05) {
            const auto t = push_thermal(r, nbar);
            EXPECT_GE(classical_fisher(t.p, t.dp), 0.95 * qfi_thermal_scaled(t.x)) << n << " " << nbar;
        }
    }
    const auto r4 = DickeResponse::perfect(Spin::from_ions(4), 300);
    const auto t = push_thermal(r4, 1.0);
    EXPECT_NEAR(classical_fisher(t.p, t.dp) / qfi_thermal_scaled(t.x), 15.0 / 16.0, 1e-9);
}

TEST(Optimality, SimulatedNeverExceedsQfi) {
    const Schedule s{units::angular_from_khz(25), units::angular_from_khz(5), units::angular_from_khz(5.5)};
    for (int n : {2, 4}) {
        const auto r = dicke_response(ions(n), s, thermal_cutoff(8.0, 1e-8));
        for (double nbar : {0.02, 0.1, 0.5, 1.0, 3.0, 8.0}) {
            const auto t = push_thermal(r, nbar, 1e-8);
            const double fc = classical_fisher(t.p, t.dp);
            const double fq = qfi_thermal_scaled(t.x);
            EXPECT_LE(fc, fq * (1 + 1e-6)) << n << " " << nbar;
            const Spin sp = Spin::from_ions(n);
            const double dsz = expected_sz_derivative(t.dp, sp);
            EXPECT_LE(dsz * dsz / variance_sz(t.p, sp), fc * (1 + 1e-12));
        }
    }
}

TEST(PopulationDerivatives, MatchFiniteDifferences) {
    const Schedule s{units::angular_from_khz(25), units::angular_from_khz(5), units::angular_from_khz(5.5)};
    const auto r = dicke_response(ions(4), s, 150);
    for (double x : {0.3, 1.0, 2.0}) {
        const double nbar = 1.0 / std::expm1(x);
        const auto d = thermal_weights(nbar, 1e-13, 8);
        const auto dw = thermal_weight_derivatives(d);
        const auto an = dicke_population_derivatives(r, dw.weights, dw.tail);
        const double h = 1e-5;
        auto at = [&](double xx) {
            return Eigen::VectorXd(final_dicke_populations(r, thermal_weights_fixed(1.0 / std::expm1(xx), d.n_max()), 1.0));
        };
        const Eigen::VectorXd fd = (at(x / (1 + h)) - at(x / (1 - h))) / (2 * h);
        for (int l = 0; l <= 4; ++l) EXPECT_NEAR(an[l], fd[l], 1e-6 * std::abs(an[l]) + 1e-12) << x << " " << l;
    }
}
