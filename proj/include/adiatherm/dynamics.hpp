// dynamics.hpp: adiabatic schedule, per-sector Hamiltonians and unitary time stepping

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adiatherm/hilbert.hpp"
#include "adiatherm/parallel.hpp"

namespace adiatherm {

using cplx = std::complex<double>;

/// Raised when the propagated state leaves the unit sphere beyond tolerance.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Delta(t) = Delta0 sin(gamma t / 2), lambda(t) = lambda0 cos^2(gamma t / 2) on [-pi/gamma, pi/gamma].
/// All rates in rad/s, times in seconds.
struct Schedule {
    double delta0{0.0};
    double lambda0{0.0};
    double gamma{0.0};

    double t_max() const { return std::numbers::pi / gamma; }
    double duration() const { return 2.0 * t_max(); }

    void validate() const {
        if (!(delta0 > 0.0)) throw std::domain_error("schedule: delta0 must be positive");
        if (!(lambda0 > 0.0)) throw std::domain_error("schedule: lambda0 must be positive");
        if (!(gamma > 0.0)) throw std::domain_error("schedule: gamma must be positive");
    }
};

struct Controls {
    double detuning;
    double coupling;
};

/// Controls at time t. Phases are clamped so the window endpoints are exact.
inline Controls schedule_eval(const Schedule& s, double t) {
    const double tm = s.t_max();
    const double slack = 1e-12 * tm;
    if (t < -tm - slack || t > tm + slack)
        throw std::domain_error("schedule_eval: t outside [-t_max, t_max]");
    const double phase = std::clamp(0.5 * s.gamma * t, -0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
    if (phase == 0.5 * std::numbers::pi) return {s.delta0, 0.0};
    if (phase == -0.5 * std::numbers::pi) return {-s.delta0, 0.0};
    const double c = std::cos(phase);
    return {s.delta0 * std::sin(phase), s.lambda0 * c * c};
}

/// H_M(t) = Delta(t) * spin_diag + lambda(t) * coupling, tridiagonal in the sector basis.
struct SectorOperator {
    int excitations{0};
    std::vector<double> spin_diag;  // -S + l
    std::vector<double> coupling;   // size dim-1

    int dim() const { return static_cast<int>(spin_diag.size()); }
};

inline SectorOperator sector_operator(const PhysicalParams& p, int excitations) {
    const Spin s = p.spin();
    const SectorBasis basis = sector_basis(s, excitations);
    SectorOperator op;
    op.excitations = excitations;
    op.spin_diag.reserve(basis.dim());
    for (const auto& e : basis.entries) op.spin_diag.push_back(sz_eigenvalue(s, e.level));
    for (int l = 0; l + 1 < basis.dim(); ++l)
        op.coupling.push_back(coupling_element(p, l, excitations - l - 1));
    return op;
}

/// Dense real-symmetric sector Hamiltonian for given control values.
inline Eigen::MatrixXd sector_hamiltonian(const PhysicalParams& p, int excitations,
                                          double detuning, double coupling) {
    const SectorOperator op = sector_operator(p, excitations);
    const int d = op.dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) h(i, i) = detuning * op.spin_diag[i];
    for (int i = 0; i + 1 < d; ++i) h(i, i + 1) = h(i + 1, i) = coupling * op.coupling[i];
    return h;
}

/// Gershgorin bound of max_t ||H_M(t)|| over the whole schedule.
inline double sector_norm_bound(const SectorOperator& op, const Schedule& s) {
    double bound = 0.0;
    const int d = op.dim();
    for (int i = 0; i < d; ++i) {
        double r = s.delta0 * std::abs(op.spin_diag[i]);
        if (i > 0) r += s.lambda0 * std::abs(op.coupling[i - 1]);
        if (i + 1 < d) r += s.lambda0 * std::abs(op.coupling[i]);
        bound = std::max(bound, r);
    }
    return bound;
}

/// Fixed-step rule: h * max_t ||H(t)|| <= max_phase, at least min_steps steps.
struct StepRule {
    double max_phase{0.05};
    int min_steps{64};
};

inline int required_steps(double norm_bound, double duration, const StepRule& rule) {
    const double n = std::ceil(norm_bound * duration / rule.max_phase);
    if (n > 5e8) throw std::domain_error("required_steps: step count exceeds 5e8");
    return std::max(rule.min_steps, static_cast<int>(n));
}

inline int required_steps(const PhysicalParams& p, const Schedule& s, int excitations,
                          const StepRule& rule = {}) {
    return required_steps(sector_norm_bound(sector_operator(p, excitations), s), s.duration(), rule);
}

namespace detail {

// Fourth-order commutator-free Magnus scheme with two Gauss-Legendre nodes:
//   psi <- exp(-ih(b H1 + a H2)) exp(-ih(a H1 + b H2)) psi
inline constexpr double kNode1 = 0.5 - 0.28867513459481288225;  // 1/2 - sqrt(3)/6
inline constexpr double kNode2 = 0.5 + 0.28867513459481288225;
inline constexpr double kWeightA = 0.25 + 0.28867513459481288225;
inline constexpr double kWeightB = 0.25 - 0.28867513459481288225;

/// Applies exp(-i (alpha * D + beta * C)) to psi for tridiagonal D (diagonal) and C (off-diagonal).
class TridiagonalExp {
public:
    explicit TridiagonalExp(int dim)
        : diag_(dim), sub_(std::max(dim - 1, 0)), work_(dim), phased_(dim) {}

    void apply(const SectorOperator& op, double alpha, double beta, Eigen::VectorXcd& psi) {
        const int d = op.dim();
        if (d == 1) {
            psi[0] *= std::polar(1.0, -alpha * op.spin_diag[0]);
            return;
        }
        for (int i = 0; i < d; ++i) diag_[i] = alpha * op.spin_diag[i];
        for (int i = 0; i + 1 < d; ++i) sub_[i] = beta * op.coupling[i];
        solver_.computeFromTridiagonal(diag_, sub_, Eigen::ComputeEigenvectors);
        const auto& v = solver_.eigenvectors();
        const auto& w = solver_.eigenvalues();
        work_.noalias() = v.transpose() * psi;
        for (int k = 0; k < d; ++k) phased_[k] = work_[k] * std::polar(1.0, -w[k]);
        psi.noalias() = v * phased_;
    }

private:
    Eigen::VectorXd diag_, sub_;
    Eigen::VectorXcd work_, phased_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver_;
};

inline std::vector<double> uniform_times(const Schedule& s, int count) {
    std::vector<double> t(count);
    const double tm = s.t_max();
    for (int k = 0; k < count; ++k)
        t[k] = (count == 1) ? tm : -tm + 2.0 * tm * static_cast<double>(k) / (count - 1);
    if (count > 1) t.back() = tm;
    return t;
}

}  // namespace detail

struct SectorState {
    int excitations{0};
    Eigen::VectorXcd amplitudes;

    Eigen::VectorXd populations() const { return amplitudes.cwiseAbs2(); }
};

struct EvolveOptions {
    int steps{0};         // 0: from the step rule
    StepRule rule{};
    int snapshots{0};     // >= 2 records populations on a uniform grid including both ends
    double norm_tol{1e-6};
};

struct SectorEvolution {
    SectorState final_state;
    int steps{0};
    std::vector<double> snapshot_times;
    std::vector<Eigen::VectorXd> snapshot_populations;
};

namespace detail {

inline int resolve_steps(int requested, int minimum, int snapshots) {
    int steps = requested > 0 ? requested : minimum;
    if (requested > 0 && requested < minimum)
        throw std::domain_error("evolve: " + std::to_string(requested) +
                                " steps is below the step-rule minimum of " + std::to_string(minimum));
    if (snapshots >= 2) {
        const int intervals = snapshots - 1;
        steps = ((steps + intervals - 1) / intervals) * intervals;
    }
    return steps;
}

inline void check_norm(double norm, double tol, const std::string& what) {
    if (!(std::abs(norm - 1.0) <= tol))
        throw IntegrationError(what + ": norm drift " + std::to_string(std::abs(norm - 1.0)) +
                               " exceeds tolerance; increase the step count");
}

/// Generic stepping loop. `step(alpha1, beta1, alpha2, beta2)` advances one step,
/// alphas multiplying the spin diagonal and betas the coupling.
template <class StepFn, class SnapFn>
void march(const Schedule& s, int steps, int snapshots, StepFn&& step, SnapFn&& snap) {
    const double tm = s.t_max();
    const double h = 2.0 * tm / steps;
    const int stride = snapshots >= 2 ? steps / (snapshots - 1) : 0;
    const auto times = snapshots >= 2 ? uniform_times(s, snapshots) : std::vector<double>{};
    if (snapshots >= 2) snap(times[0]);
    for (int k = 0; k < steps; ++k) {
        const double t0 = -tm + h * k;
        const double t1 = std::min(t0 + kNode1 * h, tm);
        const double t2 = std::min(t0 + kNode2 * h, tm);
        const Controls c1 = schedule_eval(s, t1);
        const Controls c2 = schedule_eval(s, t2);
        // right factor first: weights (a, b) on (H1, H2)
        step(h * (kWeightA * c1.detuning + kWeightB * c2.detuning),
             h * (kWeightA * c1.coupling + kWeightB * c2.coupling),
             h * (kWeightB * c1.detuning + kWeightA * c2.detuning),
             h * (kWeightB * c1.coupling + kWeightA * c2.coupling));
        if (stride > 0 && (k + 1) % stride == 0) snap(times[(k + 1) / stride]);
    }
}

}  // namespace detail

/// Evolves |D_0>|M> (the l = 0 basis vector of sector M) from -t_max to t_max.
inline SectorEvolution evolve_sector(const PhysicalParams& p, const Schedule& s, int excitations,
                                     const EvolveOptions& opt = {}) {
    s.validate();
    const SectorOperator op = sector_operator(p, excitations);
    const int minimum = required_steps(sector_norm_bound(op, s), s.duration(), opt.rule);
    const int steps = detail::resolve_steps(opt.steps, minimum, opt.snapshots);

    SectorEvolution out;
    out.steps = steps;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(op.dim());
    psi[0] = 1.0;
    detail::TridiagonalExp expm(op.dim());
    detail::march(
        s, steps, opt.snapshots,
        [&](double a1, double b1, double a2, double b2) {
            expm.apply(op, a1, b1, psi);
            expm.apply(op, a2, b2, psi);
        },
        [&](double t) {
            out.snapshot_times.push_back(t);
            out.snapshot_populations.push_back(psi.cwiseAbs2());
        });
    detail::check_norm(psi.norm(), opt.norm_tol, "evolve_sector(M=" + std::to_string(excitations) + ")");
    out.final_state = {excitations, std::move(psi)};
    return out;
}

/// R(l, n): probability of Dicke level l at t_max for initial |D_0>|n>, n = 0..n_max.
struct DickeResponse {
    Spin spin = Spin::from_ions(1);
    Eigen::MatrixXd prob;   // (2S+1) x (n_max+1)
    std::vector<int> steps; // per column

    int n_max() const { return static_cast<int>(prob.cols()) - 1; }

    /// Column n of the ideal adiabatic map: all weight on l = min(n, 2S).
    static DickeResponse perfect(Spin s, int n_max) {
        DickeResponse r;
        r.spin = s;
        r.prob = Eigen::MatrixXd::Zero(s.num_levels(), n_max + 1);
        for (int n = 0; n <= n_max; ++n) r.prob(std::min(n, s.max_level()), n) = 1.0;
        r.steps.assign(n_max + 1, 0);
        return r;
    }

    double max_deviation_from_perfect() const {
        return (prob - perfect(spin, n_max()).prob).cwiseAbs().maxCoeff();
    }
};

/// Evolves sectors M = 0..n_max independently; results are in sector order.
inline std::vector<SectorEvolution> evolve_sectors(const PhysicalParams& p, const Schedule& s, int n_max,
                                                   const EvolveOptions& opt = {}, int threads = 1) {
    if (n_max < 0) throw std::domain_error("evolve_sectors: negative cutoff");
    std::vector<SectorEvolution> out(n_max + 1);
    parallel_for(n_max + 1, threads, [&](int n) { out[n] = evolve_sector(p, s, n, opt); });
    return out;
}

/// Column n holds the final level populations of sector M = n, which starts with all
/// of its weight on l = 0 and ends spread over l = 0..min(n, 2S).
inline DickeResponse dicke_response(Spin spin, const std::vector<SectorEvolution>& sectors) {
    DickeResponse r;
    r.spin = spin;
    const int cols = static_cast<int>(sectors.size());
    r.prob = Eigen::MatrixXd::Zero(spin.num_levels(), cols);
    r.steps.assign(cols, 0);
    for (int n = 0; n < cols; ++n) {
        const Eigen::VectorXd pop = sectors[n].final_state.populations();
        r.prob.col(n).head(pop.size()) = pop;
        r.steps[n] = sectors[n].steps;
    }
    return r;
}

inline DickeResponse dicke_response(const PhysicalParams& p, const Schedule& s, int n_max,
                                    const EvolveOptions& opt = {}, int threads = 1) {
    EvolveOptions o = opt;
    o.snapshots = 0;
    return dicke_response(p.spin(), evolve_sectors(p, s, n_max, o, threads));
}

/// Eigenvalues (ascending) of H_M(t) at each time.
inline std::vector<Eigen::VectorXd> instantaneous_spectrum(const PhysicalParams& p, const Schedule& s,
                                                           int excitations,
                                                           const std::vector<double>& times) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    for (double t : times) {
        const Controls c = schedule_eval(s, t);
        solver.compute(sector_hamiltonian(p, excitations, c.detuning, c.coupling), Eigen::EigenvaluesOnly);
        out.push_back(solver.eigenvalues());
    }
    return out;
}

/// Truncated product space Dicke (2S+1) x Fock (n_max+1); index = l * (n_max+1) + n.
struct ProductSpace {
    Spin spin;
    int n_max;

    int dim() const { return spin.num_levels() * (n_max + 1); }
    int index(int level, int phonons) const { return level * (n_max + 1) + phonons; }
};

struct FullEvolution {
    Eigen::VectorXcd final_state;
    int steps{0};
    std::vector<double> snapshot_times;
    std::vector<Eigen::VectorXcd> snapshot_states;
};

/// Reference evolver on the full truncated product space with dense exponentials.
/// Used to validate the sector decomposition; the same step count must be supplied
/// for a like-for-like comparison.
inline FullEvolution evolve_full_oracle(const PhysicalParams& p, const Schedule& s, int n_max,
                                        const Eigen::VectorXcd& initial, int steps, int snapshots = 0) {
    s.validate();
    const ProductSpace space{p.spin(), n_max};
    const int dim = space.dim();
    if (dim > 100000) throw std::domain_error("evolve_full_oracle: dimension exceeds 1e5");
    if (initial.size() != dim) throw std::domain_error("evolve_full_oracle: state size mismatch");
    if (steps <= 0) throw std::domain_error("evolve_full_oracle: steps must be positive");

    Eigen::MatrixXd spin_part = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd coupling_part = Eigen::MatrixXd::Zero(dim, dim);
    const Spin sp = space.spin;
    for (int l = 0; l <= sp.max_level(); ++l)
        for (int n = 0; n <= n_max; ++n) {
            const int i = space.index(l, n);
            spin_part(i, i) = sz_eigenvalue(sp, l);
            if (l < sp.max_level() && n >= 1) {
                // (l, n) <-> (l+1, n-1)
                const int j = space.index(l + 1, n - 1);
                coupling_part(i, j) = coupling_part(j, i) = coupling_element(p, l, n - 1);
            }
        }

    FullEvolution out;
    out.steps = detail::resolve_steps(steps, 1, snapshots);
    Eigen::VectorXcd psi = initial;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    auto apply = [&](double alpha, double beta) {
        solver.compute(alpha * spin_part + beta * coupling_part, Eigen::ComputeEigenvectors);
        const auto& v = solver.eigenvectors();
        Eigen::VectorXcd w = v.transpose() * psi;
        for (int k = 0; k < dim; ++k) w[k] *= std::polar(1.0, -solver.eigenvalues()[k]);
        psi = v * w;
    };
    detail::march(
        s, out.steps, snapshots,
        [&](double a1, double b1, double a2, double b2) {
            apply(a1, b1);
            apply(a2, b2);
        },
        [&](double t) {
            out.snapshot_times.push_back(t);
            out.snapshot_states.push_back(psi);
        });
    detail::check_norm(psi.norm() / initial.norm(), 1e-6, "evolve_full_oracle");
    out.final_state = std::move(psi);
    return out;
}

/// Dicke-level populations of a full product-space state.
inline Eigen::VectorXd dicke_populations(const ProductSpace& space, const Eigen::VectorXcd& psi) {
    Eigen::VectorXd pop = Eigen::VectorXd::Zero(space.spin.num_levels());
    for (int l = 0; l <= space.spin.max_level(); ++l)
        for (int n = 0; n <= space.n_max; ++n) pop[l] += std::norm(psi[space.index(l, n)]);
    return pop;
}

}  // namespace adiatherm
