// runner.hpp: subcommand dispatch: run a protocol, write CSV + manifest, map errors to exit codes

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "adiatherm/io/config.hpp"
#include "adiatherm/io/results.hpp"
#include "adiatherm/parallel.hpp"
#include "adiatherm/protocol.hpp"

namespace adiatherm::io {

enum ExitCode : int { kExitOk = 0, kExitNumerical = 1, kExitConfig = 2 };

struct RunOptions {
    std::filesystem::path out_dir;  // empty: use the config's output.dir
    int threads{0};                 // 0: all cores
};

struct RunOutcome {
    int exit_code{kExitOk};
    std::vector<std::filesystem::path> files;
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::vector<std::string> level_columns(Spin s) {
    std::vector<std::string> c;
    for (int l = 0; l <= s.max_level(); ++l) c.push_back("P_" + std::to_string(l));
    return c;
}

inline Table thermometry_table(const ThermometryResult& r) {
    Table t;
    t.columns = {"nbar", "T_K"};
    const auto lv = level_columns(r.spin);
    t.prob_first = t.columns.size();
    t.prob_count = lv.size();
    t.columns.insert(t.columns.end(), lv.begin(), lv.end());
    for (const char* c : {"Sz_mean", "Sz_var", "F_C", "F_Q", "F_Sz_moment", "Sz_mean_oracle", "Sz_var_oracle",
                          "Sz_mean_closed_form", "Sz_var_closed_form"})
        t.columns.emplace_back(c);
    for (const auto& p : r.points) {
        std::vector<double> row = {p.nbar, p.kelvin};
        for (int l = 0; l < p.populations.size(); ++l) row.push_back(p.populations[l]);
        row.insert(row.end(), {p.sz_mean, p.sz_var, p.fisher_c, p.fisher_q, p.fisher_sz.value_or(kNaN), p.oracle.mean,
                               p.oracle.variance, p.closed_form_alt.mean, p.closed_form_alt.variance});
        t.add(std::move(row));
    }
    return t;
}

inline Table fisher_table(const ThermometryResult& r) {
    Table t;
    t.columns = {"nbar", "T_K", "F_C", "F_Q", "F_C_over_F_Q", "F_C_config", "F_Sz_moment"};
    for (const auto& p : r.points)
        t.add({p.nbar, p.kelvin, p.fisher_c, p.fisher_q, p.fisher_q > 0.0 ? p.fisher_ratio() : kNaN,
               p.nbar > 0.0 ? p.fisher_c_config : kNaN, p.fisher_sz.value_or(kNaN)});
    return t;
}

inline Table fidelity_table(const FidelityResult& r) {
    Table t;
    t.columns = {r.axis == SweepAxis::GammaKhz ? "gamma_kHz" : "Delta0_kHz", "nbar", "fidelity"};
    for (const auto& row : r.rows) t.add({row.axis_value, row.nbar, row.fidelity});
    return t;
}

inline Table spectrum_table(const SpectrumResult& r) {
    Table t;
    t.columns = {"t_us", "sector", "index", "eigenfreq_kHz"};
    for (const auto& row : r.rows)
        t.add({row.time * 1e6, static_cast<double>(row.sector), static_cast<double>(row.index),
               units::khz_from_angular(row.eigenvalue)});
    return t;
}

inline Table trace_table(const TraceResult& r) {
    Table t;
    t.columns = {"t_us"};
    const auto lv = level_columns(r.spin);
    t.prob_first = 1;
    t.prob_count = lv.size();
    t.columns.insert(t.columns.end(), lv.begin(), lv.end());
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        std::vector<double> row = {r.times[k] * 1e6};
        for (int l = 0; l < r.populations[k].size(); ++l) row.push_back(r.populations[k][l]);
        t.add(std::move(row));
    }
    return t;
}

inline Table cat_table(const CatPhaseResult& r) {
    Table t;
    t.columns = {"alpha", "F_C", "F_C_fd", "heisenberg_ref", "saturated"};
    const auto lv = level_columns(r.spin);
    t.prob_first = t.columns.size();
    t.prob_count = lv.size();
    t.columns.insert(t.columns.end(), lv.begin(), lv.end());
    for (const auto& row : r.rows) {
        std::vector<double> v = {row.alpha, row.fisher_c, row.fisher_c_fd, row.heisenberg_ref, row.saturated ? 1.0 : 0.0};
        for (int l = 0; l < row.populations.size(); ++l) v.push_back(row.populations[l]);
        t.add(std::move(v));
    }
    return t;
}

inline Table validate_table(const ExperimentConfig& cfg, const AddressabilityReport& r) {
    Table t;
    t.columns = {"num_ions", "mode_freq_MHz", "gap_kHz", "gap_scaling_kHz", "gap_rocking_kHz",
                 "gap_over_lambda0", "gap_over_delta0", "margin_factor", "pass"};
    t.add({static_cast<double>(cfg.num_ions), cfg.mode_freq_mhz, units::khz_from_angular(r.gap),
           units::khz_from_angular(r.gap_scaling), r.gap_rocking ? units::khz_from_angular(*r.gap_rocking) : kNaN,
           r.ratio_lambda, r.ratio_delta, r.factor, r.pass ? 1.0 : 0.0});
    return t;
}

}  // namespace detail

/// Runs one subcommand on a validated config and writes <name>.<subcommand>.csv and
/// <name>.<subcommand>.manifest.json. Progress goes to `log`, warnings and errors to `err`.
inline RunOutcome run(Subcommand sub, const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log,
                      std::ostream& err) {
    RunOutcome outcome;
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path dir = opt.out_dir.empty() ? std::filesystem::path(cfg.out_dir) : opt.out_dir;
    const std::string stem = cfg.name + "." + to_string(sub);
    ResponseCache cache;
    RunContext ctx{opt.threads > 0 ? opt.threads : default_threads(), &cache};

    Manifest m;
    m.subcommand = to_string(sub);
    m.config = cfg;
    try {
        Table table;
        switch (sub) {
            case Subcommand::Thermometry:
            case Subcommand::Fisher: {
                const auto r = run_thermometry_sweep(cfg, ctx);
                table = sub == Subcommand::Thermometry ? detail::thermometry_table(r) : detail::fisher_table(r);
                m.warnings = r.warnings;
                m.summary["response_max_deviation_from_perfect"] = r.response_deviation;
                int cutoff = 0;
                for (const auto& p : r.points) cutoff = std::max(cutoff, p.cutoff);
                m.summary["max_fock_cutoff"] = cutoff;
                break;
            }
            case Subcommand::Fidelity: {
                const auto r = run_fidelity_scan(cfg, ctx);
                table = detail::fidelity_table(r);
                m.warnings = r.warnings;
                double fmin = 1.0;
                for (const auto& row : r.rows) fmin = std::min(fmin, row.fidelity);
                m.summary["min_fidelity"] = fmin;
                break;
            }
            case Subcommand::Spectrum: {
                const auto r = run_spectrum_trace(cfg);
                table = detail::spectrum_table(r);
                std::vector<double> gaps;
                for (double g : r.min_gap) gaps.push_back(std::isfinite(g) ? units::khz_from_angular(g) : 0.0);
                m.summary["min_gap_kHz_per_sector"] = gaps;
                break;
            }
            case Subcommand::CoherentTrace: {
                const auto r = run_coherent_trace(cfg, ctx);
                table = detail::trace_table(r);
                m.warnings = r.warnings;
                break;
            }
            case Subcommand::CatPhase: {
                const auto r = run_cat_phase(cfg, ctx);
                table = detail::cat_table(r);
                m.warnings = r.warnings;
                m.summary["epsilon"] = r.epsilon;
                break;
            }
            case Subcommand::Validate: {
                const auto r = validate_addressability(cfg);
                table = detail::validate_table(cfg, r);
                log << "gap/2pi = " << format_double(units::khz_from_angular(r.gap)) << " kHz"
                    << " (scaling estimate " << format_double(units::khz_from_angular(r.gap_scaling)) << " kHz)\n"
                    << "gap/lambda0 = " << format_double(r.ratio_lambda)
                    << ", gap/delta0 = " << format_double(r.ratio_delta) << "\n"
                    << (r.pass ? "PASS" : "FAIL") << ": gap " << (r.pass ? ">=" : "<") << " "
                    << format_double(r.factor) << " x max(lambda0, delta0)\n";
                if (!r.pass) m.warnings.push_back("validate: centre-of-mass mode is not spectrally isolated");
                m.summary["pass"] = r.pass;
                m.summary["gap_kHz"] = units::khz_from_angular(r.gap);
                break;
            }
        }
        for (const auto& w : m.warnings) err << "warning: " << w << "\n";

        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
        const auto csv = dir / (stem + ".csv");
        const auto manifest = dir / (stem + ".manifest.json");
        write_table(csv, table);
        m.outputs = {csv.filename().string()};
        m.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(manifest, m);
        outcome.files = {csv, manifest};
        log << "wrote " << csv.string() << " (" << table.rows.size() << " rows)\n";
    } catch (const ConfigError& e) {
        err << "config error:\n" << e.what() << "\n";
        outcome.exit_code = kExitConfig;
    } catch (const IntegrationError& e) {
        err << "numerical failure: " << e.what() << "\n";
        outcome.exit_code = kExitNumerical;
    } catch (const CutoffError& e) {
        err << "numerical failure: " << e.what() << "\n";
        outcome.exit_code = kExitNumerical;
    } catch (const OutputError& e) {
        err << "output error: " << e.what() << "\n";
        outcome.exit_code = kExitNumerical;
    } catch (const std::domain_error& e) {
        err << "config error: " << e.what() << "\n";
        outcome.exit_code = kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        outcome.exit_code = kExitNumerical;
    }
    return outcome;
}

/// Parses, validates and runs a config file.
inline RunOutcome run_file(Subcommand sub, const std::filesystem::path& config_path, const RunOptions& opt,
                           std::ostream& log, std::ostream& err) {
    ParsedConfig pc;
    try {
        pc = parse_config(config_path);
        validate_for(pc, sub, config_path.string());
    } catch (const ConfigError& e) {
        err << "config error:\n" << e.what() << "\n";
        return {kExitConfig, {}};
    }
    return run(sub, pc.config, opt, log, err);
}

}  // namespace adiatherm::io
