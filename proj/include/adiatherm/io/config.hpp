// config.hpp: YAML experiment configs: parsing with line-anchored validation,
// canonical serialization and content hashing

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "adiatherm/protocol.hpp"

namespace adiatherm::io {

enum class Subcommand { Thermometry, Fisher, Fidelity, Spectrum, CatPhase, CoherentTrace, Validate };

inline const std::vector<std::pair<std::string, Subcommand>>& subcommand_names() {
    static const std::vector<std::pair<std::string, Subcommand>> names = {
        {"thermometry", Subcommand::Thermometry}, {"fisher", Subcommand::Fisher},
        {"fidelity", Subcommand::Fidelity},       {"spectrum", Subcommand::Spectrum},
        {"cat-phase", Subcommand::CatPhase},      {"coherent-trace", Subcommand::CoherentTrace},
        {"validate", Subcommand::Validate}};
    return names;
}

inline std::string to_string(Subcommand s) {
    for (const auto& [name, v] : subcommand_names())
        if (v == s) return name;
    return "?";
}

inline std::optional<Subcommand> parse_subcommand(const std::string& name) {
    for (const auto& [n, v] : subcommand_names())
        if (n == name) return v;
    return std::nullopt;
}

/// All problems found in a config file, one message per line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> messages)
        : std::runtime_error(join(messages)), messages_(std::move(messages)) {}

    const std::vector<std::string>& messages() const { return messages_; }

private:
    static std::string join(const std::vector<std::string>& m) {
        std::string s;
        for (const auto& x : m) s += (s.empty() ? "" : "\n") + x;
        return s;
    }
    std::vector<std::string> messages_;
};

struct ParsedConfig {
    ExperimentConfig config;
    std::map<std::string, int> lines;  // dotted key -> 1-based line
};

namespace detail {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    std::vector<std::string> errors;
    std::map<std::string, int> lines;

    void error(const std::string& key, const std::string& msg) {
        const auto it = lines.find(key);
        const std::string where = it != lines.end() ? source_ + ":" + std::to_string(it->second) + ": " : source_ + ": ";
        errors.push_back(where + "'" + key + "' " + msg);
    }

    /// Checks that `node` is a map with only `allowed` keys and records line numbers.
    bool map(const YAML::Node& node, const std::string& prefix, const std::set<std::string>& allowed) {
        if (!node.IsMap()) {
            at(node, prefix, "must be a mapping");
            return false;
        }
        for (const auto& kv : node) {
            const std::string k = kv.first.as<std::string>();
            const std::string full = prefix.empty() ? k : prefix + "." + k;
            lines[full] = kv.first.Mark().line + 1;
            if (!allowed.contains(k)) at(kv.first, full, "is not a recognised key");
        }
        return true;
    }

    void at(const YAML::Node& node, const std::string& key, const std::string& msg) {
        const int line = node.Mark().line >= 0 ? node.Mark().line + 1 : -1;
        errors.push_back(source_ + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": '" + key + "' " + msg);
    }

    template <class T>
    std::optional<T> scalar(const YAML::Node& parent, const std::string& prefix, const std::string& k) {
        const YAML::Node n = parent[k];
        if (!n) return std::nullopt;
        const std::string full = prefix + "." + k;
        if (!n.IsScalar()) {
            at(n, full, "must be a scalar");
            return std::nullopt;
        }
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            at(n, full, "has an invalid value '" + n.Scalar() + "'");
            return std::nullopt;
        }
    }

    std::optional<std::vector<double>> list(const YAML::Node& parent, const std::string& prefix, const std::string& k) {
        const YAML::Node n = parent[k];
        if (!n) return std::nullopt;
        const std::string full = prefix + "." + k;
        if (!n.IsSequence()) {
            at(n, full, "must be a list of numbers");
            return std::nullopt;
        }
        std::vector<double> v;
        for (const auto& e : n) {
            try {
                v.push_back(e.as<double>());
            } catch (const YAML::Exception&) {
                at(e, full, "has a non-numeric entry");
                return std::nullopt;
            }
        }
        return v;
    }

private:
    std::string source_;
};

inline std::optional<SweepAxis> parse_axis(const std::string& s) {
    for (SweepAxis a : {SweepAxis::Nbar, SweepAxis::TemperatureMilliKelvin, SweepAxis::GammaKhz,
                        SweepAxis::Delta0Khz, SweepAxis::Alpha})
        if (s == adiatherm::to_string(a)) return a;
    return std::nullopt;
}

}  // namespace detail

/// Parses YAML text. Structural and value errors are gathered and thrown together.
inline ParsedConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError({source + ":" + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg});
    }
    detail::Reader rd(source);
    ParsedConfig out;
    ExperimentConfig& c = out.config;
    if (!root || !root.IsMap()) throw ConfigError({source + ": top level must be a mapping"});
    rd.map(root, "", {"name", "description", "ions", "schedule", "motion", "sweep", "numerics", "spectrum",
                      "validate", "output"});

    if (auto v = rd.scalar<std::string>(root, "", "name")) c.name = *v;
    if (auto v = rd.scalar<std::string>(root, "", "description")) c.description = *v;

    auto positive = [&](const std::string& key, double v) {
        if (!(v > 0.0)) rd.error(key, "must be positive (got " + adiatherm::detail::fmt_value(v) + ")");
    };

    if (const YAML::Node ions = root["ions"]; ions && rd.map(ions, "ions", {"count", "model", "lamb_dicke",
                                                                                "mode_freq_mhz", "axial_freq_mhz"})) {
        if (auto v = rd.scalar<int>(ions, "ions", "count")) {
            c.num_ions = *v;
            if (*v < 1) rd.error("ions.count", "must be at least 1");
        } else if (!ions["count"]) {
            rd.at(ions, "ions.count", "is required");
        }
        if (auto v = rd.scalar<std::string>(ions, "ions", "model")) {
            if (*v == "linear") c.model = Model::LinearJC;
            else if (*v == "nonlinear") c.model = Model::NonlinearJC;
            else rd.error("ions.model", "must be 'linear' or 'nonlinear'");
        }
        if (auto v = rd.scalar<double>(ions, "ions", "lamb_dicke")) {
            c.lamb_dicke = *v;
            if (!(*v >= 0.0)) rd.error("ions.lamb_dicke", "must be non-negative");
        }
        if (auto v = rd.scalar<double>(ions, "ions", "mode_freq_mhz")) {
            c.mode_freq_mhz = *v;
            positive("ions.mode_freq_mhz", *v);
        }
        if (auto v = rd.scalar<double>(ions, "ions", "axial_freq_mhz")) {
            c.axial_freq_mhz = *v;
            positive("ions.axial_freq_mhz", *v);
            if (c.mode_freq_mhz > 0.0 && !(*v < c.mode_freq_mhz))
                rd.error("ions.axial_freq_mhz", "must be below ions.mode_freq_mhz");
        }
    } else if (!ions) {
        rd.errors.push_back(source + ": 'ions' section is required");
    }

    if (const YAML::Node s = root["schedule"];
        s && rd.map(s, "schedule", {"lambda0_khz", "delta0_khz", "gamma_khz"})) {
        if (auto v = rd.scalar<double>(s, "schedule", "lambda0_khz")) {
            c.lambda0_khz = *v;
            positive("schedule.lambda0_khz", *v);
        }
        if (auto v = rd.scalar<double>(s, "schedule", "delta0_khz")) {
            c.delta0_khz = *v;
            positive("schedule.delta0_khz", *v);
        }
        if (auto v = rd.scalar<double>(s, "schedule", "gamma_khz")) {
            c.gamma_khz = *v;
            positive("schedule.gamma_khz", *v);
        }
    }

    if (const YAML::Node m = root["motion"]; m && rd.map(m, "motion", {"kind", "alpha", "epsilon", "nbar_series"})) {
        if (auto v = rd.scalar<std::string>(m, "motion", "kind")) {
            if (*v == "thermal") c.motion.kind = MotionKind::Thermal;
            else if (*v == "coherent") c.motion.kind = MotionKind::Coherent;
            else if (*v == "cat") c.motion.kind = MotionKind::Cat;
            else rd.error("motion.kind", "must be thermal, coherent or cat");
        }
        if (auto v = rd.scalar<double>(m, "motion", "alpha")) {
            c.motion.alpha = *v;
            if (!(*v >= 0.0)) rd.error("motion.alpha", "must be non-negative");
        }
        if (auto v = rd.scalar<double>(m, "motion", "epsilon")) c.motion.epsilon = *v;
        if (auto v = rd.list(m, "motion", "nbar_series")) {
            c.motion.nbar_series = *v;
            for (double x : *v)
                if (!(x > 0.0)) rd.error("motion.nbar_series", "entries must be positive");
        }
    }

    if (const YAML::Node sw = root["sweep"]; sw && rd.map(sw, "sweep", {"axis", "values", "range"})) {
        if (auto v = rd.scalar<std::string>(sw, "sweep", "axis")) {
            if (auto a = detail::parse_axis(*v)) c.sweep.axis = *a;
            else rd.error("sweep.axis", "must be one of nbar, temperature_mk, gamma_khz, delta0_khz, alpha");
        } else if (!sw["axis"]) {
            rd.at(sw, "sweep.axis", "is required");
        }
        if (auto v = rd.list(sw, "sweep", "values")) c.sweep.values = *v;
        if (const YAML::Node r = sw["range"]; r && rd.map(r, "sweep.range", {"start", "stop", "count", "spacing"})) {
            GridRange g;
            bool ok = true;
            if (auto v = rd.scalar<double>(r, "sweep.range", "start")) g.start = *v; else ok = false;
            if (auto v = rd.scalar<double>(r, "sweep.range", "stop")) g.stop = *v; else ok = false;
            if (auto v = rd.scalar<int>(r, "sweep.range", "count")) g.count = *v; else ok = false;
            if (auto v = rd.scalar<std::string>(r, "sweep.range", "spacing")) {
                if (*v == "log") g.log_spacing = true;
                else if (*v != "linear") rd.error("sweep.range.spacing", "must be 'linear' or 'log'");
            }
            if (!ok) rd.at(r, "sweep.range", "needs start, stop and count");
            if (ok && g.count < 1) rd.error("sweep.range.count", "must be at least 1");
            if (ok && g.log_spacing && !(g.start > 0.0 && g.stop > 0.0))
                rd.error("sweep.range", "log spacing needs positive start and stop");
            if (ok && g.count > 1 && !(g.stop > g.start)) rd.error("sweep.range.stop", "must exceed start");
            c.sweep.range = g;
        }
        if (!c.sweep.values.empty() && c.sweep.range) rd.at(sw, "sweep", "takes either values or range, not both");
        for (std::size_t i = 1; i < c.sweep.values.size(); ++i)
            if (!(c.sweep.values[i] > c.sweep.values[i - 1])) {
                rd.error("sweep.values", "must be strictly increasing");
                break;
            }
    }

    if (const YAML::Node n = root["numerics"];
        n && rd.map(n, "numerics", {"steps", "max_phase_per_step", "tail_tol", "snapshots"})) {
        if (auto v = rd.scalar<int>(n, "numerics", "steps")) {
            c.numerics.steps = *v;
            if (*v < 0) rd.error("numerics.steps", "must be non-negative (0 selects the step rule)");
        }
        if (auto v = rd.scalar<double>(n, "numerics", "max_phase_per_step")) {
            c.numerics.max_phase_per_step = *v;
            positive("numerics.max_phase_per_step", *v);
        }
        if (auto v = rd.scalar<double>(n, "numerics", "tail_tol")) {
            c.numerics.tail_tol = *v;
            if (!(*v > 0.0 && *v < 1.0)) rd.error("numerics.tail_tol", "must lie in (0, 1)");
        }
        if (auto v = rd.scalar<int>(n, "numerics", "snapshots")) {
            c.numerics.snapshots = *v;
            if (*v < 2) rd.error("numerics.snapshots", "must be at least 2");
        }
    }

    if (const YAML::Node s = root["spectrum"]; s && rd.map(s, "spectrum", {"max_sector", "time_points"})) {
        if (auto v = rd.scalar<int>(s, "spectrum", "max_sector")) {
            c.spectrum.max_sector = *v;
            if (*v < 0) rd.error("spectrum.max_sector", "must be non-negative");
        }
        if (auto v = rd.scalar<int>(s, "spectrum", "time_points")) {
            c.spectrum.time_points = *v;
            if (*v < 2) rd.error("spectrum.time_points", "must be at least 2");
        }
    }

    if (const YAML::Node v = root["validate"]; v && rd.map(v, "validate", {"margin_factor"})) {
        if (auto f = rd.scalar<double>(v, "validate", "margin_factor")) {
            c.addressability_factor = *f;
            positive("validate.margin_factor", *f);
        }
    }

    if (const YAML::Node o = root["output"]; o && rd.map(o, "output", {"dir"})) {
        if (auto d = rd.scalar<std::string>(o, "output", "dir")) c.out_dir = *d;
    }

    out.lines = rd.lines;
    if (!rd.errors.empty()) throw ConfigError(rd.errors);
    return out;
}

inline ParsedConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path.string() + ": cannot open config file"});
    std::stringstream ss;
    ss << in.rdbuf();
    ParsedConfig pc = parse_config_text(ss.str(), path.string());
    return pc;
}

/// Requirements that depend on what the config is used for.
inline void validate_for(const ParsedConfig& pc, Subcommand sub, const std::string& source = "<config>") {
    const ExperimentConfig& c = pc.config;
    std::vector<std::string> errs;
    auto where = [&](const std::string& key) {
        const auto it = pc.lines.find(key);
        return source + (it != pc.lines.end() ? ":" + std::to_string(it->second) : std::string()) + ": ";
    };
    auto need = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) errs.push_back(where(key) + "'" + key + "' " + msg + " for " + to_string(sub));
    };
    const bool needs_schedule = sub != Subcommand::Validate;
    if (needs_schedule) {
        need(c.lambda0_khz > 0.0, "schedule.lambda0_khz", "is required");
        need(c.delta0_khz > 0.0, "schedule.delta0_khz", "is required");
        need(c.gamma_khz > 0.0, "schedule.gamma_khz", "is required");
    } else {
        need(c.lambda0_khz > 0.0, "schedule.lambda0_khz", "is required");
        need(c.delta0_khz > 0.0, "schedule.delta0_khz", "is required");
        need(c.mode_freq_mhz > 0.0, "ions.mode_freq_mhz", "is required");
    }
    if (c.model == Model::NonlinearJC) need(c.lamb_dicke > 0.0, "ions.lamb_dicke", "must be positive for the nonlinear model");
    const bool has_grid = !c.sweep.values.empty() || c.sweep.range.has_value();
    switch (sub) {
        case Subcommand::Thermometry:
        case Subcommand::Fisher:
            need(c.mode_freq_mhz > 0.0, "ions.mode_freq_mhz", "is required");
            need(c.motion.kind == MotionKind::Thermal, "motion.kind", "must be thermal");
            need(c.sweep.axis == SweepAxis::Nbar || c.sweep.axis == SweepAxis::TemperatureMilliKelvin, "sweep.axis",
                 "must be nbar or temperature_mk");
            need(has_grid, "sweep.values", "is required");
            break;
        case Subcommand::Fidelity:
            need(c.motion.kind == MotionKind::Thermal, "motion.kind", "must be thermal");
            need(!c.motion.nbar_series.empty(), "motion.nbar_series", "is required");
            need(c.sweep.axis == SweepAxis::GammaKhz || c.sweep.axis == SweepAxis::Delta0Khz, "sweep.axis",
                 "must be gamma_khz or delta0_khz");
            need(has_grid, "sweep.values", "is required");
            break;
        case Subcommand::CatPhase:
            need(c.motion.kind == MotionKind::Cat, "motion.kind", "must be cat");
            need(c.sweep.axis == SweepAxis::Alpha, "sweep.axis", "must be alpha");
            need(has_grid, "sweep.values", "is required");
            need(c.motion.epsilon > 0.0 && c.motion.epsilon < 0.1, "motion.epsilon", "must lie in (0, 0.1)");
            break;
        case Subcommand::CoherentTrace:
            need(c.motion.kind == MotionKind::Coherent, "motion.kind", "must be coherent");
            break;
        case Subcommand::Spectrum:
        case Subcommand::Validate:
            break;
    }
    if (!errs.empty()) throw ConfigError(errs);
}

// ---------------------------------------------------------------------------
// Serialization

/// Canonical YAML for a config; parsing the result reproduces the same config.
inline std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << c.name;
    if (!c.description.empty()) e << YAML::Key << "description" << YAML::Value << c.description;

    e << YAML::Key << "ions" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "count" << YAML::Value << c.num_ions;
    e << YAML::Key << "model" << YAML::Value << to_string(c.model);
    e << YAML::Key << "lamb_dicke" << YAML::Value << c.lamb_dicke;
    if (c.mode_freq_mhz > 0.0) e << YAML::Key << "mode_freq_mhz" << YAML::Value << c.mode_freq_mhz;
    if (c.axial_freq_mhz) e << YAML::Key << "axial_freq_mhz" << YAML::Value << *c.axial_freq_mhz;
    e << YAML::EndMap;

    e << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "lambda0_khz" << YAML::Value << c.lambda0_khz;
    e << YAML::Key << "delta0_khz" << YAML::Value << c.delta0_khz;
    e << YAML::Key << "gamma_khz" << YAML::Value << c.gamma_khz;
    e << YAML::EndMap;

    e << YAML::Key << "motion" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value << adiatherm::to_string(c.motion.kind);
    e << YAML::Key << "alpha" << YAML::Value << c.motion.alpha;
    e << YAML::Key << "epsilon" << YAML::Value << c.motion.epsilon;
    if (!c.motion.nbar_series.empty())
        e << YAML::Key << "nbar_series" << YAML::Value << YAML::Flow << c.motion.nbar_series;
    e << YAML::EndMap;

    if (c.sweep.axis != SweepAxis::None) {
        e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "axis" << YAML::Value << adiatherm::to_string(c.sweep.axis);
        if (!c.sweep.values.empty()) e << YAML::Key << "values" << YAML::Value << YAML::Flow << c.sweep.values;
        if (c.sweep.range) {
            e << YAML::Key << "range" << YAML::Value << YAML::BeginMap;
            e << YAML::Key << "start" << YAML::Value << c.sweep.range->start;
            e << YAML::Key << "stop" << YAML::Value << c.sweep.range->stop;
            e << YAML::Key << "count" << YAML::Value << c.sweep.range->count;
            e << YAML::Key << "spacing" << YAML::Value << (c.sweep.range->log_spacing ? "log" : "linear");
            e << YAML::EndMap;
        }
        e << YAML::EndMap;
    }

    e << YAML::Key << "numerics" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "steps" << YAML::Value << c.numerics.steps;
    e << YAML::Key << "max_phase_per_step" << YAML::Value << c.numerics.max_phase_per_step;
    e << YAML::Key << "tail_tol" << YAML::Value << c.numerics.tail_tol;
    e << YAML::Key << "snapshots" << YAML::Value << c.numerics.snapshots;
    e << YAML::EndMap;

    e << YAML::Key << "spectrum" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "max_sector" << YAML::Value << c.spectrum.max_sector;
    e << YAML::Key << "time_points" << YAML::Value << c.spectrum.time_points;
    e << YAML::EndMap;

    e << YAML::Key << "validate" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "margin_factor" << YAML::Value << c.addressability_factor;
    e << YAML::EndMap;

    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dir" << YAML::Value << c.out_dir;
    e << YAML::EndMap;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

/// Config as JSON with sorted keys; the basis of the content hash.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["description"] = c.description;
    j["ions"] = {{"count", c.num_ions},
                 {"model", to_string(c.model)},
                 {"lamb_dicke", c.lamb_dicke},
                 {"mode_freq_mhz", c.mode_freq_mhz},
                 {"axial_freq_mhz", c.axial_freq_mhz ? nlohmann::json(*c.axial_freq_mhz) : nlohmann::json(nullptr)}};
    j["schedule"] = {{"lambda0_khz", c.lambda0_khz}, {"delta0_khz", c.delta0_khz}, {"gamma_khz", c.gamma_khz}};
    j["motion"] = {{"kind", adiatherm::to_string(c.motion.kind)},
                   {"alpha", c.motion.alpha},
                   {"epsilon", c.motion.epsilon},
                   {"nbar_series", c.motion.nbar_series}};
    nlohmann::json sweep = {{"axis", adiatherm::to_string(c.sweep.axis)}, {"values", c.sweep.values}};
    if (c.sweep.range)
        sweep["range"] = {{"start", c.sweep.range->start},
                          {"stop", c.sweep.range->stop},
                          {"count", c.sweep.range->count},
                          {"spacing", c.sweep.range->log_spacing ? "log" : "linear"}};
    else
        sweep["range"] = nullptr;
    j["sweep"] = sweep;
    j["numerics"] = {{"steps", c.numerics.steps},
                     {"max_phase_per_step", c.numerics.max_phase_per_step},
                     {"tail_tol", c.numerics.tail_tol},
                     {"snapshots", c.numerics.snapshots}};
    j["spectrum"] = {{"max_sector", c.spectrum.max_sector}, {"time_points", c.spectrum.time_points}};
    j["validate"] = {{"margin_factor", c.addressability_factor}};
    j["output"] = {{"dir", c.out_dir}};
    return j;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(config_to_json(c).dump()); }

}  // namespace adiatherm::io
