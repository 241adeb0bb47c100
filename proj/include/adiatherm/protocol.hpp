// protocol.hpp: experiment drivers: thermometry sweeps, fidelity scans, spectra,
// coherent traces, cat-phase estimation and addressability checks

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adiatherm/dynamics.hpp"
#include "adiatherm/hilbert.hpp"
#include "adiatherm/metrology.hpp"
#include "adiatherm/motion.hpp"
#include "adiatherm/units.hpp"

namespace adiatherm {

enum class SweepAxis { None, Nbar, TemperatureMilliKelvin, GammaKhz, Delta0Khz, Alpha };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::None: return "none";
        case SweepAxis::Nbar: return "nbar";
        case SweepAxis::TemperatureMilliKelvin: return "temperature_mk";
        case SweepAxis::GammaKhz: return "gamma_khz";
        case SweepAxis::Delta0Khz: return "delta0_khz";
        case SweepAxis::Alpha: return "alpha";
    }
    return "?";
}

struct GridRange {
    double start{0.0};
    double stop{0.0};
    int count{0};
    bool log_spacing{false};

    friend bool operator==(const GridRange&, const GridRange&) = default;

    std::vector<double> values() const {
        std::vector<double> v(count);
        for (int i = 0; i < count; ++i) {
            const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
            v[i] = log_spacing ? start * std::pow(stop / start, f) : start + (stop - start) * f;
        }
        if (count > 1) v.back() = stop;
        return v;
    }
};

/// Exactly one axis; either explicit values or a generated range.
struct SweepSpec {
    SweepAxis axis{SweepAxis::None};
    std::vector<double> values;
    std::optional<GridRange> range;

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;

    std::vector<double> grid() const { return range ? range->values() : values; }
};

struct MotionSpec {
    MotionKind kind{MotionKind::Thermal};
    double alpha{0.0};
    double epsilon{1e-3};
    std::vector<double> nbar_series;  // fidelity scans

    friend bool operator==(const MotionSpec&, const MotionSpec&) = default;
};

struct NumericsSpec {
    int steps{0};
    double max_phase_per_step{0.05};
    double tail_tol{kDefaultTailTol};
    int snapshots{101};

    friend bool operator==(const NumericsSpec&, const NumericsSpec&) = default;
};

struct SpectrumSpec {
    int max_sector{3};
    int time_points{201};

    friend bool operator==(const SpectrumSpec&, const SpectrumSpec&) = default;
};

/// User-facing experiment description. Frequencies are ordinary frequencies in the
/// units named by each field and are converted to angular frequencies on use.
struct ExperimentConfig {
    std::string name{"run"};
    std::string description;

    int num_ions{1};
    Model model{Model::LinearJC};
    double lamb_dicke{0.0};
    double mode_freq_mhz{0.0};
    std::optional<double> axial_freq_mhz;

    double lambda0_khz{0.0};
    double delta0_khz{0.0};
    double gamma_khz{0.0};

    MotionSpec motion;
    SweepSpec sweep;
    NumericsSpec numerics;
    SpectrumSpec spectrum;
    double addressability_factor{5.0};
    std::string out_dir{"."};

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    PhysicalParams physical() const {
        PhysicalParams p;
        p.num_ions = num_ions;
        p.model = model;
        p.lamb_dicke = lamb_dicke;
        p.mode_freq = units::angular_from_mhz(mode_freq_mhz);
        p.axial_freq = axial_freq_mhz ? units::angular_from_mhz(*axial_freq_mhz) : 0.0;
        return p;
    }

    Schedule schedule() const {
        return {units::angular_from_khz(delta0_khz), units::angular_from_khz(lambda0_khz),
                units::angular_from_khz(gamma_khz)};
    }

    EvolveOptions evolve_options() const {
        EvolveOptions o;
        o.steps = numerics.steps;
        o.rule.max_phase = numerics.max_phase_per_step;
        return o;
    }
};

// ---------------------------------------------------------------------------
// Response cache

/// Dicke responses keyed by everything that determines them. Motion states never
/// enter the key: the unitary map is independent of the estimated parameter.
class ResponseCache {
public:
    std::shared_ptr<const DickeResponse> get(const PhysicalParams& p, const Schedule& s, int n_max,
                                             const EvolveOptions& opt, int threads) {
        const std::string k = key(p, s, n_max, opt);
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(k); it != entries_.end()) return it->second;
        auto r = std::make_shared<const DickeResponse>(dicke_response(p, s, n_max, opt, threads));
        entries_.emplace(k, r);
        return r;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

    static std::string key(const PhysicalParams& p, const Schedule& s, int n_max, const EvolveOptions& opt) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%d|%s|%.17g|%.17g|%.17g|%.17g|%d|%d|%.17g|%d", p.num_ions,
                      to_string(p.model), p.model == Model::LinearJC ? 0.0 : p.lamb_dicke, s.delta0, s.lambda0,
                      s.gamma, n_max, opt.steps, opt.rule.max_phase, opt.rule.min_steps);
        return buf;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const DickeResponse>> entries_;
};

struct RunContext {
    int threads{1};
    ResponseCache* cache{nullptr};

    std::shared_ptr<const DickeResponse> response(const PhysicalParams& p, const Schedule& s, int n_max,
                                                  const EvolveOptions& opt) const {
        if (cache) return cache->get(p, s, n_max, opt, threads);
        return std::make_shared<const DickeResponse>(dicke_response(p, s, n_max, opt, threads));
    }
};

// ---------------------------------------------------------------------------
// Thermometry

struct ThermometryPoint {
    double nbar{0.0};
    double x{std::numeric_limits<double>::infinity()};
    double kelvin{0.0};
    int cutoff{0};
    Eigen::VectorXd populations;
    Eigen::VectorXd derivatives;  // T dP_l / dT
    double sz_mean{0.0};
    double sz_var{0.0};
    double fisher_c{0.0};         // K^-2
    double fisher_q{0.0};         // K^-2
    std::optional<double> fisher_sz;
    double fisher_c_config{std::numeric_limits<double>::quiet_NaN()};
    Moments oracle;
    Moments closed_form_alt;

    double fisher_ratio() const { return fisher_q > 0.0 ? fisher_c / fisher_q : 0.0; }
};

struct ThermometryResult {
    Spin spin = Spin::from_ions(1);
    std::vector<ThermometryPoint> points;
    double response_deviation{0.0};  // max |R - R_perfect|
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string fmt_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline void require_strictly_monotone(const std::vector<double>& g, const char* what) {
    if (g.empty()) throw std::domain_error(std::string(what) + ": empty sweep grid");
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1]))
            throw std::domain_error(std::string(what) + ": sweep grid must be strictly increasing");
}

}  // namespace detail

/// Mean phonon numbers for a thermometry grid (nbar or temperature axis).
inline std::vector<double> thermometry_nbar_grid(const ExperimentConfig& cfg) {
    const auto g = cfg.sweep.grid();
    detail::require_strictly_monotone(g, "thermometry");
    std::vector<double> nbar;
    nbar.reserve(g.size());
    const double omega = units::angular_from_mhz(cfg.mode_freq_mhz);
    for (double v : g) {
        if (cfg.sweep.axis == SweepAxis::Nbar) {
            if (v < 0.0) throw std::domain_error("thermometry: negative nbar");
            nbar.push_back(v);
        } else if (cfg.sweep.axis == SweepAxis::TemperatureMilliKelvin) {
            nbar.push_back(nbar_from_T(omega, v * 1e-3).nbar);
        } else {
            throw std::domain_error("thermometry: sweep axis must be nbar or temperature_mk");
        }
    }
    return nbar;
}

inline ThermometryResult run_thermometry_sweep(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
    if (cfg.motion.kind != MotionKind::Thermal) throw std::domain_error("thermometry: motion kind must be thermal");
    if (!(cfg.mode_freq_mhz > 0.0)) throw std::domain_error("thermometry: mode_freq_mhz is required");
    const PhysicalParams params = cfg.physical();
    params.validate();
    const Schedule sched = cfg.schedule();
    sched.validate();
    const Spin spin = params.spin();
    const int min_cutoff = spin.max_level() + 4;
    const double tol = cfg.numerics.tail_tol;
    const double omega = params.mode_freq;

    const auto nbars = thermometry_nbar_grid(cfg);
    int n_max = min_cutoff;
    for (double nb : nbars)
        if (nb > 0.0) n_max = std::max(n_max, thermal_cutoff(nb, tol));

    ThermometryResult out;
    out.spin = spin;
    const auto response = ctx.response(params, sched, n_max, cfg.evolve_options());
    out.response_deviation = response->max_deviation_from_perfect();

    for (double nb : nbars) {
        ThermometryPoint pt;
        pt.nbar = nb;
        if (nb == 0.0) {
            pt.populations = Eigen::VectorXd::Zero(spin.num_levels());
            pt.populations[0] = 1.0;
            pt.derivatives = Eigen::VectorXd::Zero(spin.num_levels());
            pt.sz_mean = -spin.value();
            pt.oracle = saturated_transfer_moments(0.0, spin);
            pt.closed_form_alt = pt.oracle;
            out.warnings.push_back("nbar=0 endpoint: zero temperature, Fisher information set to 0");
            out.points.push_back(std::move(pt));
            continue;
        }
        const TemperaturePoint tp = T_from_nbar(omega, nb);
        pt.x = tp.x;
        pt.kelvin = tp.kelvin;
        const MotionDistribution dist = thermal_weights(nb, tol, min_cutoff);
        pt.cutoff = dist.n_max();
        const WeightDerivatives dw = thermal_weight_derivatives(dist);
        pt.populations = final_dicke_populations(*response, dist, std::max(tol, 1e-6));
        pt.derivatives = dicke_population_derivatives(*response, dw.weights, dw.tail);
        pt.sz_mean = expected_sz(pt.populations, spin);
        pt.sz_var = variance_sz(pt.populations, spin);

        const double t2 = tp.kelvin * tp.kelvin;
        FisherDiagnostics diag;
        pt.fisher_c = classical_fisher(pt.populations, pt.derivatives, &diag) / t2;
        if (diag.singular_outcomes > 0)
            out.warnings.push_back("nbar=" + detail::fmt_value(nb) + ": " + std::to_string(diag.singular_outcomes) +
                                   " outcome(s) with vanishing probability but non-zero derivative");
        pt.fisher_q = qfi_thermal_scaled(tp.x) / t2;
        if (pt.sz_var > 0.0) {
            const double dsz = expected_sz_derivative(pt.derivatives, spin);
            pt.fisher_sz = dsz * dsz / pt.sz_var / t2;
        }
        if (params.num_ions <= 20)
            pt.fisher_c_config =
                config_level_fisher_equivalence(pt.populations, pt.derivatives, params.num_ions).first / t2;
        pt.oracle = saturated_transfer_moments(nb, spin);
        pt.closed_form_alt = saturated_transfer_moments_alt(nb, spin);
        out.points.push_back(std::move(pt));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fidelity scan

struct FidelityRow {
    double axis_value{0.0};
    double nbar{0.0};
    double fidelity{0.0};
};

struct FidelityResult {
    SweepAxis axis{SweepAxis::GammaKhz};
    std::vector<FidelityRow> rows;
    std::vector<std::string> warnings;
};

/// Fidelity between the ideal adiabatic image of a thermal state and the evolved
/// ensemble sum_n p_n |psi_n><psi_n|. Both are block diagonal over sectors.
inline double adiabatic_map_fidelity(const std::vector<SectorEvolution>& sectors, const MotionDistribution& dist,
                                     Spin spin) {
    if (dist.n_max() + 1 > static_cast<int>(sectors.size()))
        throw CutoffError("adiabatic_map_fidelity: distribution exceeds evolved sectors");
    BlockDiagonalState target, actual;
    for (int n = 0; n <= dist.n_max(); ++n) {
        const Eigen::VectorXcd& psi = sectors[n].final_state.amplitudes;
        const int d = static_cast<int>(psi.size());
        Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(d, d);
        t(std::min(n, spin.max_level()), std::min(n, spin.max_level())) = dist.weights[n];
        target.blocks.push_back(std::move(t));
        actual.blocks.push_back(dist.weights[n] * psi * psi.adjoint());
    }
    return state_fidelity(target, actual);
}

inline FidelityResult run_fidelity_scan(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
    if (cfg.motion.kind != MotionKind::Thermal) throw std::domain_error("fidelity: motion kind must be thermal");
    if (cfg.motion.nbar_series.empty()) throw std::domain_error("fidelity: motion.nbar_series is required");
    if (cfg.sweep.axis != SweepAxis::GammaKhz && cfg.sweep.axis != SweepAxis::Delta0Khz)
        throw std::domain_error("fidelity: sweep axis must be gamma_khz or delta0_khz");
    const PhysicalParams params = cfg.physical();
    params.validate();
    const Spin spin = params.spin();
    const int min_cutoff = spin.max_level() + 4;
    int n_max = min_cutoff;
    for (double nb : cfg.motion.nbar_series) n_max = std::max(n_max, thermal_cutoff(nb, cfg.numerics.tail_tol));

    const auto grid = cfg.sweep.grid();
    detail::require_strictly_monotone(grid, "fidelity");
    FidelityResult out;
    out.axis = cfg.sweep.axis;
    for (double v : grid) {
        Schedule s = cfg.schedule();
        if (cfg.sweep.axis == SweepAxis::GammaKhz) s.gamma = units::angular_from_khz(v);
        else s.delta0 = units::angular_from_khz(v);
        s.validate();
        EvolveOptions o = cfg.evolve_options();
        o.snapshots = 0;
        const auto sectors = evolve_sectors(params, s, n_max, o, ctx.threads);
        for (double nb : cfg.motion.nbar_series) {
            const MotionDistribution dist = thermal_weights(nb, cfg.numerics.tail_tol, min_cutoff);
            out.rows.push_back({v, nb, adiabatic_map_fidelity(sectors, dist, spin)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum trace

struct SpectrumRow {
    double time{0.0};     // s
    int sector{0};
    int index{0};
    double eigenvalue{0.0};  // rad/s
};

struct SpectrumResult {
    std::vector<SpectrumRow> rows;
    std::vector<double> min_gap;  // per sector, min over interior times of the smallest level spacing
};

inline SpectrumResult run_spectrum_trace(const ExperimentConfig& cfg) {
    const PhysicalParams params = cfg.physical();
    params.validate();
    const Schedule s = cfg.schedule();
    s.validate();
    if (cfg.spectrum.time_points < 2) throw std::domain_error("spectrum: need at least two time points");
    const auto times = detail::uniform_times(s, cfg.spectrum.time_points);
    SpectrumResult out;
    for (int m = 0; m <= cfg.spectrum.max_sector; ++m) {
        const auto spec = instantaneous_spectrum(params, s, m, times);
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < times.size(); ++k) {
            for (int i = 0; i < spec[k].size(); ++i) out.rows.push_back({times[k], m, i, spec[k][i]});
            const bool interior = k > 0 && k + 1 < times.size();
            if (interior)
                for (int i = 1; i < spec[k].size(); ++i) gap = std::min(gap, spec[k][i] - spec[k][i - 1]);
        }
        out.min_gap.push_back(gap);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coherent-state time trace

struct TraceResult {
    Spin spin = Spin::from_ions(1);
    std::vector<double> times;
    std::vector<Eigen::VectorXd> populations;
    std::vector<std::string> warnings;
};

inline TraceResult run_coherent_trace(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
    if (cfg.motion.kind != MotionKind::Coherent) throw std::domain_error("coherent-trace: motion kind must be coherent");
    if (cfg.numerics.snapshots < 2) throw std::domain_error("coherent-trace: need at least two snapshots");
    const PhysicalParams params = cfg.physical();
    params.validate();
    const Schedule s = cfg.schedule();
    s.validate();
    const Spin spin = params.spin();
    const MotionDistribution dist = coherent_weights(cfg.motion.alpha, cfg.numerics.tail_tol, spin.max_level() + 4);
    EvolveOptions o = cfg.evolve_options();
    o.snapshots = cfg.numerics.snapshots;
    const auto sectors = evolve_sectors(params, s, dist.n_max(), o, ctx.threads);

    TraceResult out;
    out.spin = spin;
    out.times = sectors.front().snapshot_times;
    double kept = 0.0;
    for (double w : dist.weights) kept += w;
    for (std::size_t k = 0; k < out.times.size(); ++k) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(spin.num_levels());
        for (int n = 0; n <= dist.n_max(); ++n) {
            const auto& pop = sectors[n].snapshot_populations[k];
            p.head(pop.size()) += dist.weights[n] * pop;
        }
        out.populations.push_back(p / kept);
    }
    if (dist.tail_mass > 0.0)
        out.warnings.push_back("coherent-trace: populations renormalized over the kept Fock range (tail " +
                               detail::fmt_value(dist.tail_mass) + ")");
    return out;
}

// ---------------------------------------------------------------------------
// Cat-state phase estimation

struct CatPhaseRow {
    double alpha{0.0};
    double fisher_c{0.0};     // with respect to epsilon
    double fisher_c_fd{0.0};  // same, from two-sided finite differences of the populations
    double heisenberg_ref{0.0};
    bool saturated{false};
    Eigen::VectorXd populations;
};

struct CatPhaseResult {
    Spin spin = Spin::from_ions(1);
    double epsilon{0.0};
    std::vector<CatPhaseRow> rows;
    std::vector<std::string> warnings;
};

inline constexpr double kCatFiniteDifferenceStep = 1e-5;

inline CatPhaseResult run_cat_phase(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
    if (cfg.motion.kind != MotionKind::Cat) throw std::domain_error("cat-phase: motion kind must be cat");
    if (cfg.sweep.axis != SweepAxis::Alpha) throw std::domain_error("cat-phase: sweep axis must be alpha");
    const double eps = cfg.motion.epsilon;
    const PhysicalParams params = cfg.physical();
    params.validate();
    const Schedule s = cfg.schedule();
    s.validate();
    const Spin spin = params.spin();
    const auto alphas = cfg.sweep.grid();
    detail::require_strictly_monotone(alphas, "cat-phase");
    const double tol = cfg.numerics.tail_tol;

    std::vector<int> cutoffs;
    int n_max = spin.max_level() + 4;
    for (double a : alphas) {
        if (a < 0.0) throw std::domain_error("cat-phase: alpha must be non-negative");
        cutoffs.push_back(cat_weights(a, a * eps, tol, spin.max_level() + 4).n_max());
        n_max = std::max(n_max, cutoffs.back());
    }
    const auto response = ctx.response(params, s, n_max, cfg.evolve_options());

    CatPhaseResult out;
    out.spin = spin;
    out.epsilon = eps;
    const double h = kCatFiniteDifferenceStep;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double a = alphas[i];
        const int nc = cutoffs[i];
        CatPhaseRow row;
        row.alpha = a;
        row.heisenberg_ref = 4.0 * a * a;
        row.saturated = spin.max_level() < a * a + 3.0 * a;
        if (row.saturated)
            out.warnings.push_back("alpha=" + detail::fmt_value(a) +
                                   ": populated Fock range exceeds 2S; too few ions for this amplitude");
        const MotionDistribution dist = cat_weights_fixed(a, a * eps, nc);
        const auto dw = cat_weight_derivatives(a, eps, nc);
        double dtail = 0.0;
        for (double d : dw) dtail -= d;
        row.populations = final_dicke_populations(*response, dist, std::max(tol, 1e-6));
        const Eigen::VectorXd dp = dicke_population_derivatives(*response, dw, dtail);
        row.fisher_c = classical_fisher(row.populations, dp);

        const Eigen::VectorXd plus = final_dicke_populations(*response, cat_weights_fixed(a, a * (eps + h), nc), 1.0);
        const Eigen::VectorXd minus = final_dicke_populations(*response, cat_weights_fixed(a, a * (eps - h), nc), 1.0);
        row.fisher_c_fd = classical_fisher(row.populations, Eigen::VectorXd((plus - minus) / (2.0 * h)));
        out.rows.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Addressability of the centre-of-mass mode

inline constexpr double kGapScalingCoefficient = 0.6228;

/// Gap estimate omega_x * 0.6228 ln(6N) / N^2.
inline double gap_scaling_estimate(int num_ions, double mode_freq) {
    const double n = num_ions;
    return mode_freq * kGapScalingCoefficient * std::log(6.0 * n) / (n * n);
}

struct AddressabilityReport {
    double gap{0.0};           // rad/s, the value used for the decision
    double gap_scaling{0.0};   // rad/s
    std::optional<double> gap_rocking;  // omega_x - sqrt(omega_x^2 - omega_z^2), when omega_z is known
    double ratio_lambda{0.0};  // gap / lambda0
    double ratio_delta{0.0};   // gap / delta0
    double factor{5.0};
    bool pass{false};
};

inline AddressabilityReport validate_addressability(int num_ions, double mode_freq, std::optional<double> axial_freq,
                                                    double lambda0, double delta0, double factor = 5.0) {
    if (num_ions < 1) throw std::domain_error("validate: num_ions must be >= 1");
    if (!(mode_freq > 0.0)) throw std::domain_error("validate: mode frequency must be positive");
    if (!(lambda0 > 0.0) || !(delta0 > 0.0)) throw std::domain_error("validate: lambda0 and delta0 must be positive");
    AddressabilityReport r;
    r.factor = factor;
    r.gap_scaling = gap_scaling_estimate(num_ions, mode_freq);
    r.gap = r.gap_scaling;
    if (axial_freq) {
        if (!(*axial_freq < mode_freq)) throw std::domain_error("validate: axial frequency must be below mode frequency");
        r.gap_rocking = mode_freq - std::sqrt(mode_freq * mode_freq - *axial_freq * *axial_freq);
        r.gap = *r.gap_rocking;
    }
    r.ratio_lambda = r.gap / lambda0;
    r.ratio_delta = r.gap / delta0;
    r.pass = r.gap >= factor * std::max(lambda0, delta0);
    return r;
}

inline AddressabilityReport validate_addressability(const ExperimentConfig& cfg) {
    std::optional<double> wz;
    if (cfg.axial_freq_mhz) wz = units::angular_from_mhz(*cfg.axial_freq_mhz);
    return validate_addressability(cfg.num_ions, units::angular_from_mhz(cfg.mode_freq_mhz), wz,
                                   units::angular_from_khz(cfg.lambda0_khz), units::angular_from_khz(cfg.delta0_khz),
                                   cfg.addressability_factor);
}

}  // namespace adiatherm
