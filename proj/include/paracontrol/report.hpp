#pragma once

// Run reports: a config echo, key-value results, named verdicts and CSV
// tables. Data files never carry timestamps; the wall time only appears in
// the footer of report.txt.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"

namespace paracontrol {

struct CsvTable {
    std::string file;  // e.g. "trace.csv"
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunReport {
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, std::string>> results;
    std::vector<Verdict> verdicts;
    std::vector<CsvTable> tables;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;

    bool all_pass() const {
        for (const auto& v : verdicts) {
            if (!v.pass) return false;
        }
        return true;
    }
    void result(const std::string& key, const std::string& value) { results.emplace_back(key, value); }
    void result(const std::string& key, double value) { results.emplace_back(key, format_real(value)); }
    void verdict(const std::string& name, bool pass, const std::string& detail = {}) {
        verdicts.push_back({name, pass, detail});
    }

    static std::string format_real(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
};

/// One row per space-time node: t, x, value.
inline CsvTable field_table(const std::string& name, const SpaceTimeField& f, const TimeGrid& time, const Grid& grid) {
    CsvTable t{"field_" + name + ".csv", {"t", "x", "value"}, {}};
    t.rows.reserve(static_cast<std::size_t>(f.nodes()) * f.dofs());
    const auto x = grid.positions();
    for (int m = 0; m < time.nodes(); ++m) {
        for (int j = 0; j < grid.size(); ++j) t.rows.push_back({time.t(m), x[j], f(m, j)});
    }
    return t;
}

inline std::string render_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ',';
        out += table.columns[i];
    }
    out += '\n';
    char buf[32];
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline std::string render_report(const RunReport& rep) {
    std::string s = "command: " + rep.command + "\n\n[config]\n";
    for (const auto& [k, v] : rep.config) s += k + " = " + v + "\n";
    if (!rep.results.empty()) {
        s += "\n[results]\n";
        for (const auto& [k, v] : rep.results) s += k + " = " + v + "\n";
    }
    if (!rep.warnings.empty()) {
        s += "\n[warnings]\n";
        for (const auto& w : rep.warnings) s += w + "\n";
    }
    if (!rep.verdicts.empty()) {
        s += "\n[verdicts]\n";
        for (const auto& v : rep.verdicts) {
            s += std::string(v.pass ? "PASS " : "FAIL ") + v.name;
            if (!v.detail.empty()) s += "  (" + v.detail + ")";
            s += "\n";
        }
        s += std::string("overall: ") + (rep.all_pass() ? "PASS" : "FAIL") + "\n";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "\nwall time: %.3f s\n", rep.wall_seconds);
    s += buf;
    return s;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Writes report.txt plus every table; returns the paths written.
inline std::vector<std::filesystem::path> write_report(const RunReport& rep, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> written;
    for (const auto& t : rep.tables) {
        written.push_back(dir / t.file);
        detail::write_file(written.back(), render_csv(t));
    }
    written.push_back(dir / "report.txt");
    detail::write_file(written.back(), render_report(rep));
    return written;
}

}  // namespace paracontrol
