#include <cmath>

#include <boost/math/special_functions/laguerre.hpp>
#include <gtest/gtest.h>

#include "adiatherm/dynamics.hpp"
#include "adiatherm/hilbert.hpp"

using namespace adiatherm;

namespace {

// closed form e^{-eta^2/2} L_n^(1)(eta^2) / (n+1), via Boost's associated Laguerre
double laguerre_factor(int n, double eta) {
    return std::exp(-0.5 * eta * eta) * boost::math::laguerre(static_cast<unsigned>(n), 1u, eta * eta) / (n + 1.0);
}

PhysicalParams linear(int ions) {
    PhysicalParams p;
    p.num_ions = ions;
    return p;
}

PhysicalParams nonlinear(int ions, double eta) {
    PhysicalParams p;
    p.num_ions = ions;
    p.model = Model::NonlinearJC;
    p.lamb_dicke = eta;
    return p;
}

}  // namespace

TEST(SectorBasis, GroundSector) {
    const auto b = sector_basis(Spin::from_ions(2), 0);
    ASSERT_EQ(b.entries.size(), 1u);
    EXPECT_EQ(b.entries[0].level, 0);
    EXPECT_EQ(b.entries[0].phonons, 0);
}

TEST(SectorBasis, FullLadder) {
    const auto b = sector_basis(Spin::from_ions(3), 3);
    ASSERT_EQ(b.entries.size(), 4u);
    for (int l = 0; l < 4; ++l) {
        EXPECT_EQ(b.entries[l].level, l);
        EXPECT_EQ(b.entries[l].phonons, 3 - l);
    }
}

TEST(SectorBasis, CappedAtTopLevel) {
    const auto b = sector_basis(Spin::from_ions(2), 5);
    ASSERT_EQ(b.entries.size(), 3u);
    EXPECT_EQ(b.entries[2].level, 2);
    EXPECT_EQ(b.entries[2].phonons, 3);
    EXPECT_EQ(sector_dim(Spin::from_ions(2), 5), 3);
}

TEST(SzEigenvalue, Values) {
    EXPECT_EQ(sz_eigenvalue(Spin::from_ions(6), 0), -3.0);
    EXPECT_EQ(sz_eigenvalue(Spin::from_ions(6), 6), 3.0);
    EXPECT_EQ(sz_eigenvalue(Spin::from_ions(1), 1), 0.5);
    EXPECT_THROW(sz_eigenvalue(Spin::from_ions(1), 2), std::domain_error);
    EXPECT_THROW(sz_eigenvalue(Spin::from_ions(1), -1), std::domain_error);
}

TEST(LadderElement, Values) {
    EXPECT_DOUBLE_EQ(ladder_element(Spin::from_ions(1), 0), 1.0);
    EXPECT_DOUBLE_EQ(ladder_element(Spin::from_ions(2), 0), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(ladder_element(Spin::from_ions(2), 1), std::sqrt(2.0));
    EXPECT_THROW(ladder_element(Spin::from_ions(2), 2), std::domain_error);
}

TEST(NonlinearFactor, Examples) {
    EXPECT_NEAR(nonlinear_factor(0, 0.3), std::exp(-0.045), 1e-15);
    for (int n = 0; n <= 60; ++n) EXPECT_EQ(nonlinear_factor(n, 0.0), 1.0);
    EXPECT_NEAR(nonlinear_factor(1, 0.2), std::exp(-0.02) * 0.98, 1e-15);
    EXPECT_NEAR(nonlinear_factor(1, 0.2), 0.96059, 5e-6);
}

TEST(NonlinearFactor, SmallEtaLimit) {
    for (int n = 0; n <= 50; ++n) EXPECT_LT(std::abs(nonlinear_factor(n, 1e-6) - 1.0), 1e-9) << n;
}

TEST(NonlinearFactor, MatchesLaguerreClosedForm) {
    for (double eta : {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5})
        for (int n = 0; n <= 100; ++n) {
            const double ref = laguerre_factor(n, eta);
            const double got = nonlinear_factor(n, eta);
            // relative where the factor is not near a Laguerre zero
            EXPECT_LE(std::abs(got - ref), 1e-12 * std::max(std::abs(ref), 1e-3)) << "n=" << n << " eta=" << eta;
        }
}

TEST(CouplingElement, Examples) {
    EXPECT_DOUBLE_EQ(coupling_element(linear(2), 0, 0), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(coupling_element(linear(1), 0, 3), 2.0);
    EXPECT_NEAR(coupling_element(nonlinear(1, 0.2), 0, 0), std::exp(-0.02), 1e-15);
    EXPECT_NEAR(coupling_element(nonlinear(1, 0.2), 0, 0), 0.98020, 5e-6);
}

TEST(CouplingElement, LinearIgnoresEta) {
    PhysicalParams a = linear(5), b = linear(5);
    b.lamb_dicke = 0.37;
    for (int l = 0; l < 5; ++l)
        for (int n = 0; n < 40; ++n) EXPECT_EQ(coupling_element(a, l, n), coupling_element(b, l, n));
}

TEST(DickeDegeneracy, RowSums) {
    for (int n = 1; n <= 20; ++n) {
        double sum = 0.0;
        for (int l = 0; l <= n; ++l) sum += dicke_degeneracy(n, l);
        EXPECT_EQ(sum, std::ldexp(1.0, n)) << n;
    }
}

TEST(SectorHamiltonian, SymmetricTridiagonal) {
    const auto p = nonlinear(5, 0.25);
    for (int m = 0; m <= 12; ++m) {
        const Eigen::MatrixXd h = sector_hamiltonian(p, m, 1.7, 0.9);
        EXPECT_EQ((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
        for (int i = 0; i < h.rows(); ++i)
            for (int j = 0; j < h.cols(); ++j)
                if (std::abs(i - j) > 1) EXPECT_EQ(h(i, j), 0.0);
    }
}

TEST(SectorHamiltonian, Examples) {
    const Eigen::MatrixXd h0 = sector_hamiltonian(linear(4), 0, 3.0, 1.0);
    ASSERT_EQ(h0.rows(), 1);
    EXPECT_DOUBLE_EQ(h0(0, 0), -2.0 * 3.0);

    const Eigen::MatrixXd h1 = sector_hamiltonian(linear(1), 1, 3.0, 0.7);
    ASSERT_EQ(h1.rows(), 2);
    EXPECT_DOUBLE_EQ(h1(0, 0), -1.5);
    EXPECT_DOUBLE_EQ(h1(1, 1), 1.5);
    EXPECT_DOUBLE_EQ(h1(0, 1), 0.7);
    EXPECT_DOUBLE_EQ(h1(1, 0), 0.7);
}

TEST(Spin, SingleIonSupported) {
    const Spin s = Spin::from_ions(1);
    EXPECT_EQ(s.twice(), 1);
    EXPECT_EQ(s.value(), 0.5);
    EXPECT_EQ(s.num_levels(), 2);
    EXPECT_THROW(Spin::from_ions(0), std::domain_error);
}
