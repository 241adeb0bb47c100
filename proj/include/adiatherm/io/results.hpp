// results.hpp: CSV tables and run manifests, written atomically

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adiatherm/io/config.hpp"

namespace adiatherm::io {

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    // columns [first, first+count) hold a probability distribution per row
    std::size_t prob_first{0};
    std::size_t prob_count{0};

    void add(std::vector<double> row) {
        if (row.size() != columns.size()) throw std::logic_error("Table: row width does not match header");
        rows.push_back(std::move(row));
    }

    void check_probabilities(double tol = 1e-9) const {
        if (prob_count == 0) return;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double sum = 0.0;
            for (std::size_t i = 0; i < prob_count; ++i) sum += rows[r][prob_first + i];
            if (!(std::abs(sum - 1.0) <= tol))
                throw OutputError("row " + std::to_string(r) + ": populations sum to " + format_double(sum));
        }
    }

    std::string csv() const {
        std::string s;
        for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
        s += '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_double(row[i]);
            s += '\n';
        }
        return s;
    }
};

/// Writes to a sibling temp file and renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw OutputError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw OutputError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw OutputError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

inline void write_table(const std::filesystem::path& path, const Table& t) {
    t.check_probabilities();
    write_atomic(path, t.csv());
}

struct Manifest {
    std::string subcommand;
    ExperimentConfig config;
    double runtime_seconds{0.0};
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    nlohmann::json summary = nlohmann::json::object();
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json manifest_json(const Manifest& m) {
    nlohmann::json j;
#ifdef ADIATHERM_VERSION
    j["version"] = ADIATHERM_VERSION;
#else
    j["version"] = "unknown";
#endif
    j["subcommand"] = m.subcommand;
    j["config"] = config_to_json(m.config);
    j["config_hash"] = config_hash(m.config);
    j["runtime_seconds"] = m.runtime_seconds;
    j["timestamp"] = utc_timestamp();
    j["outputs"] = m.outputs;
    j["warnings"] = m.warnings;
    j["summary"] = m.summary;
    return j;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    write_atomic(path, manifest_json(m).dump(2) + "\n");
}

}  // namespace adiatherm::io
