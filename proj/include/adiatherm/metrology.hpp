// metrology.hpp: Fisher information, thermal QFI, magnetization moments and state fidelity

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adiatherm/dynamics.hpp"
#include "adiatherm/hilbert.hpp"
#include "adiatherm/motion.hpp"
#include "adiatherm/units.hpp"

namespace adiatherm {

/// Raised when a Fock distribution is not adequately resolved by the response cutoff.
class CutoffError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kProbabilityFloor = 1e-15;

struct FisherDiagnostics {
    int singular_outcomes{0};  // P below floor with non-negligible derivative
};

/// sum_l (dP_l)^2 / P_l. Outcomes with P <= floor and |dP| <= floor contribute nothing;
/// outcomes with P <= floor but a larger derivative are counted as singular and their
/// contribution capped at dP^2 / floor.
inline double classical_fisher(std::span<const double> p, std::span<const double> dp,
                               FisherDiagnostics* diag = nullptr, double floor = kProbabilityFloor) {
    if (p.size() != dp.size()) throw std::invalid_argument("classical_fisher: size mismatch");
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > floor) {
            f += dp[i] * dp[i] / p[i];
        } else if (std::abs(dp[i]) > floor) {
            f += dp[i] * dp[i] / floor;
            if (diag) ++diag->singular_outcomes;
        }
    }
    return f;
}

inline double classical_fisher(const Eigen::VectorXd& p, const Eigen::VectorXd& dp,
                               FisherDiagnostics* diag = nullptr) {
    return classical_fisher(std::span<const double>(p.data(), p.size()),
                            std::span<const double>(dp.data(), dp.size()), diag);
}

/// T^2 F_Q = (x^2/4) csch^2(x/2), x = hbar omega / (k_B T).
inline double qfi_thermal_scaled(double x) {
    if (!(x > 0.0)) throw std::domain_error("qfi_thermal: x must be positive");
    if (x > 1400.0) return 0.0;
    const double s = std::sinh(0.5 * x);
    return 0.25 * x * x / (s * s);
}

/// Thermal-oscillator quantum Fisher information in K^-2.
inline double qfi_thermal(double omega, double kelvin) {
    const TemperaturePoint tp = nbar_from_T(omega, kelvin);
    return qfi_thermal_scaled(tp.x) / (kelvin * kelvin);
}

/// Diagonal of the symmetric logarithmic derivative in the Fock basis, in K^-1:
/// L_n = (E_n - <H>) / (k_B T^2) = (n - nbar) x / T.
inline std::vector<double> sld_thermal_diagonal(double omega, double kelvin, int n_max) {
    const TemperaturePoint tp = nbar_from_T(omega, kelvin);
    std::vector<double> l(n_max + 1);
    for (int n = 0; n <= n_max; ++n) l[n] = (n - tp.nbar) * tp.x / kelvin;
    return l;
}

/// P_l = sum_n R(l, n) p_n, with tail mass beyond the cutoff placed on l = 2S.
inline Eigen::VectorXd final_dicke_populations(const DickeResponse& r, const MotionDistribution& d,
                                               double tail_tol = 1e-6) {
    if (d.n_max() > r.n_max())
        throw CutoffError("final_dicke_populations: distribution cutoff " + std::to_string(d.n_max()) +
                          " exceeds response cutoff " + std::to_string(r.n_max()));
    if (d.tail_mass > tail_tol)
        throw CutoffError("final_dicke_populations: tail mass " + std::to_string(d.tail_mass) +
                          " above tolerance; raise the cutoff");
    const Eigen::Map<const Eigen::VectorXd> w(d.weights.data(), d.weights.size());
    Eigen::VectorXd p = r.prob.leftCols(w.size()) * w;
    p[r.spin.max_level()] += d.tail_mass;
    return p;
}

/// dP_l = sum_n R(l, n) dp_n, tail derivative on l = 2S.
inline Eigen::VectorXd dicke_population_derivatives(const DickeResponse& r, std::span<const double> dp,
                                                    double dtail) {
    if (static_cast<int>(dp.size()) > r.n_max() + 1)
        throw CutoffError("dicke_population_derivatives: derivative length exceeds response cutoff");
    const Eigen::Map<const Eigen::VectorXd> w(dp.data(), dp.size());
    Eigen::VectorXd out = r.prob.leftCols(w.size()) * w;
    out[r.spin.max_level()] += dtail;
    return out;
}

inline double expected_sz(const Eigen::VectorXd& p, Spin s) {
    double m = 0.0;
    for (int l = 0; l <= s.max_level(); ++l) m += sz_eigenvalue(s, l) * p[l];
    return m;
}

inline double variance_sz(const Eigen::VectorXd& p, Spin s) {
    const double mean = expected_sz(p, s);
    double v = 0.0;
    for (int l = 0; l <= s.max_level(); ++l) {
        const double d = sz_eigenvalue(s, l) - mean;
        v += d * d * p[l];
    }
    return v;
}

/// d<Sz> from population derivatives.
inline double expected_sz_derivative(const Eigen::VectorXd& dp, Spin s) {
    return expected_sz(dp, s);
}

struct Moments {
    double mean{0.0};
    double variance{0.0};
};

/// <Sz> and Var(Sz) after ideal adiabatic transfer of a thermal state, by direct
/// summation: levels l < 2S carry p_l, level 2S carries the geometric tail q^(2S).
inline Moments saturated_transfer_moments(double nbar, Spin s) {
    const int top = s.max_level();
    if (nbar == 0.0) return {-s.value(), 0.0};
    const double q = nbar / (1.0 + nbar);
    double m1 = 0.0, m2 = 0.0, p = 1.0 / (1.0 + nbar);
    for (int l = 0; l < top; ++l) {
        const double m = sz_eigenvalue(s, l);
        m1 += m * p;
        m2 += m * m * p;
        p *= q;
    }
    const double tail = std::pow(q, top);
    m1 += s.value() * tail;
    m2 += s.value() * s.value() * tail;
    return {m1, m2 - m1 * m1};
}

/// Alternative closed forms for the same perfect-transfer moments,
///   <Sz> = nbar - S - q^(2S+1) (nbar + S + 1),
///   Var  = nbar/(1+nbar)^(4S+2) {(1+nbar)^(4S+3) - nbar^(4S+1)(1+S+nbar)^2
///          - nbar^(2S)(1+nbar)^(2S+1)[1+nbar+S(4+3S+2 nbar)]}.
/// They disagree with direct summation (S = 1/2, nbar = 1 gives <Sz> = -1/8, not 0)
/// and are kept only for side-by-side reporting.
inline Moments saturated_transfer_moments_alt(double nbar, Spin s) {
    const double S = s.value();
    const double q = nbar / (1.0 + nbar);
    const double mean = nbar - S - std::pow(q, 2.0 * S + 1.0) * (nbar + S + 1.0);
    const double a = 1.0 + nbar;
    const double var = nbar / std::pow(a, 4.0 * S + 2.0) *
                       (std::pow(a, 4.0 * S + 3.0) - std::pow(nbar, 4.0 * S + 1.0) * (1.0 + S + nbar) * (1.0 + S + nbar) -
                        std::pow(nbar, 2.0 * S) * std::pow(a, 2.0 * S + 1.0) * (1.0 + nbar + S * (4.0 + 3.0 * S + 2.0 * nbar)));
    return {mean, var};
}

/// (d signal / d param)^2 / variance along a grid. Interior points use the three-point
/// non-uniform central difference, endpoints the one-sided second-order formula.
/// Points with zero variance are absent.
inline std::vector<std::optional<double>> moment_sensitivity(std::span<const double> signal,
                                                            std::span<const double> variance,
                                                            std::span<const double> grid) {
    const std::size_t n = grid.size();
    if (signal.size() != n || variance.size() != n)
        throw std::invalid_argument("moment_sensitivity: size mismatch");
    std::vector<std::optional<double>> out(n);
    if (n < 3) throw std::invalid_argument("moment_sensitivity: need at least three grid points");
    // derivative at x[i] from three points (i0,i1,i2)
    auto three_point = [&](std::size_t i, std::size_t i0, std::size_t i1, std::size_t i2) {
        const double x = grid[i], x0 = grid[i0], x1 = grid[i1], x2 = grid[i2];
        const double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
        const double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
        const double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
        return l0 * signal[i0] + l1 * signal[i1] + l2 * signal[i2];
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!(variance[i] > 0.0)) continue;
        double d;
        if (i == 0) d = three_point(0, 0, 1, 2);
        else if (i == n - 1) d = three_point(i, n - 3, n - 2, n - 1);
        else d = three_point(i, i - 1, i, i + 1);
        out[i] = d * d / variance[i];
    }
    return out;
}

/// Per-outcome Fisher information at the level of individual spin configurations:
/// each Dicke level l is split into binomial(N, l) equiprobable configurations.
/// Returns {configuration level, Dicke level}.
inline std::pair<double, double> config_level_fisher_equivalence(const Eigen::VectorXd& p,
                                                                 const Eigen::VectorXd& dp, int num_ions) {
    if (p.size() != num_ions + 1 || dp.size() != num_ions + 1)
        throw std::invalid_argument("config_level_fisher_equivalence: expected N+1 Dicke levels");
    std::vector<double> cp, cdp;
    cp.reserve(std::size_t{1} << std::min(num_ions, 24));
    for (int l = 0; l <= num_ions; ++l) {
        const double c = dicke_degeneracy(num_ions, l);
        for (double k = 0; k < c; k += 1.0) {
            cp.push_back(p[l] / c);
            cdp.push_back(dp[l] / c);
        }
    }
    return {classical_fisher(cp, cdp), classical_fisher(p, dp)};
}

// ---------------------------------------------------------------------------
// Fidelity  F = Tr(r1 r2) / sqrt(Tr(r1^2) Tr(r2^2))

/// Density matrix diagonal in a stated basis.
struct DiagonalMixedState {
    std::vector<std::string> labels;
    std::vector<double> weights;
};

/// Block-diagonal density matrix; blocks are Hermitian and share a layout between states.
struct BlockDiagonalState {
    std::vector<Eigen::MatrixXcd> blocks;
};

namespace detail {
inline double fidelity_ratio(double overlap, double purity1, double purity2) {
    if (!(purity1 > 0.0) || !(purity2 > 0.0)) throw std::domain_error("state_fidelity: zero purity");
    return overlap / std::sqrt(purity1 * purity2);
}
}  // namespace detail

inline double state_fidelity(const DiagonalMixedState& a, const DiagonalMixedState& b) {
    if (a.weights.size() != b.weights.size()) throw std::invalid_argument("state_fidelity: dimension mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        ab += a.weights[i] * b.weights[i];
        aa += a.weights[i] * a.weights[i];
        bb += b.weights[i] * b.weights[i];
    }
    return detail::fidelity_ratio(ab, aa, bb);
}

inline double state_fidelity(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("state_fidelity: dimension mismatch");
    // Tr(AB) for Hermitian A, B is the Frobenius inner product
    const double ab = (a.conjugate().cwiseProduct(b)).sum().real();
    return detail::fidelity_ratio(ab, a.squaredNorm(), b.squaredNorm());
}

inline double state_fidelity(const BlockDiagonalState& a, const BlockDiagonalState& b) {
    if (a.blocks.size() != b.blocks.size()) throw std::invalid_argument("state_fidelity: block count mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        const auto& x = a.blocks[k];
        const auto& y = b.blocks[k];
        if (x.rows() != y.rows()) throw std::invalid_argument("state_fidelity: block size mismatch");
        ab += (x.conjugate().cwiseProduct(y)).sum().real();
        aa += x.squaredNorm();
        bb += y.squaredNorm();
    }
    return detail::fidelity_ratio(ab, aa, bb);
}

}  // namespace adiatherm
