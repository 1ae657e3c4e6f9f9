#pragma once

// Flat "section.key = value" run configuration. Every key is checked
// against a fixed table before anything is computed.

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"

namespace paracontrol {

/// Raised for malformed or invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_real(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    }
    if (used != text.size()) throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return static_cast<int>(v);
}

}  // namespace detail

/// "family" or "family:argument"
struct TaggedValue {
    std::string tag;
    std::string arg;

    static TaggedValue parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) return {detail::trim(text), {}};
        return {detail::trim(text.substr(0, colon)), detail::trim(text.substr(colon + 1))};
    }
    std::string str() const { return arg.empty() ? tag : tag + ":" + arg; }
};

struct RunConfig {
    // domain
    double L = 1.0;
    int n = 0;
    Boundary bc = Boundary::neumann;
    // time
    double T = 1.0;
    int nt = 0;
    // model
    TaggedValue f;                 // zero | linear:a | monostable:m | bistable:theta
    TaggedValue f_modulation{"none", {}};  // none | space:A | time:A
    CostTerm j1;
    CostTerm j2;
    TaggedValue u0;                // constant:c | mode:k | table:file
    // constraints
    Constraints constraints;
    // experiment
    std::vector<Interval> omega{{0.2, 0.5}};
    std::vector<int> K_list{4, 8, 16, 32};
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};  // fractions of T
    std::optional<double> t0;                              // default T / 2
    int max_iters = 200;
    double tol = 1e-8;
    std::string mode = "projected";                        // projected | thresholding
    TaggedValue potential{"benchmark", {}};                // benchmark | zero | constant:c
    TaggedValue h0{"mode", "2"};                           // mode:k | constant:c
    std::optional<TaggedValue> control;                    // zero | mean | constant:c | table:file | optimize
    // output
    std::string out_dir = "out";
    bool dump = false;

    /// Echo of the parsed file, in file order.
    std::vector<std::pair<std::string, std::string>> entries;
    std::string source_dir = ".";
};

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "domain.L",          "domain.n",          "domain.bc",         "time.T",          "time.nt",
        "model.f",           "model.f_modulation", "model.j1",         "model.j2",        "model.u0",
        "constraints.kappa0", "constraints.kappa1", "constraints.V0",  "experiment.omega", "experiment.K_list",
        "experiment.eps_list", "experiment.t0",   "experiment.max_iters", "experiment.tol", "experiment.mode",
        "experiment.potential", "experiment.h0",  "experiment.control", "output.dir",     "output.dump",
    };
    return keys;
}

inline const std::vector<std::string>& required_keys() {
    static const std::vector<std::string> keys{
        "domain.L", "domain.n",  "domain.bc",  "time.T",          "time.nt",           "model.f",
        "model.j1", "model.j2",  "model.u0",   "constraints.kappa0", "constraints.kappa1", "constraints.V0",
    };
    return keys;
}

}  // namespace detail

/// Parses configuration text. `origin` names the source in error messages.
inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
    RunConfig cfg;
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'section.key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos) throw ConfigError(where + ": key '" + key + "' has no section");
        if (!detail::known_keys().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
        if (values.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
        values[key] = value;
        cfg.entries.emplace_back(key, value);
    }
    for (const auto& k : detail::required_keys()) {
        if (!values.count(k)) throw ConfigError("missing required key " + k);
    }
    auto get = [&](const std::string& k) { return values.at(k); };
    auto has = [&](const std::string& k) { return values.count(k) > 0; };

    cfg.L = detail::parse_real("domain.L", get("domain.L"));
    cfg.n = detail::parse_int("domain.n", get("domain.n"));
    const std::string bc = get("domain.bc");
    if (bc == "neumann") cfg.bc = Boundary::neumann;
    else if (bc == "dirichlet") cfg.bc = Boundary::dirichlet;
    else throw ConfigError("domain.bc: expected neumann or dirichlet, got '" + bc + "'");
    if (!(cfg.L > 0.0)) throw ConfigError("domain.L: must be positive");
    if (cfg.n < 4) throw ConfigError("domain.n: need at least 4 cells");

    cfg.T = detail::parse_real("time.T", get("time.T"));
    cfg.nt = detail::parse_int("time.nt", get("time.nt"));
    if (!(cfg.T > 0.0)) throw ConfigError("time.T: must be positive");
    if (cfg.nt < 1) throw ConfigError("time.nt: must be positive");

    cfg.f = TaggedValue::parse(get("model.f"));
    if (cfg.f.tag == "zero") {
        if (!cfg.f.arg.empty()) throw ConfigError("model.f: 'zero' takes no parameter");
    } else if (cfg.f.tag == "linear" || cfg.f.tag == "monostable" || cfg.f.tag == "bistable") {
        if (cfg.f.arg.empty()) throw ConfigError("model.f: '" + cfg.f.tag + "' needs a parameter, e.g. " + cfg.f.tag + ":0.3");
        detail::parse_real("model.f", cfg.f.arg);
    } else {
        throw ConfigError("model.f: unknown family '" + cfg.f.tag + "'");
    }
    if (has("model.f_modulation")) {
        cfg.f_modulation = TaggedValue::parse(get("model.f_modulation"));
        if (cfg.f_modulation.tag == "space" || cfg.f_modulation.tag == "time") {
            detail::parse_real("model.f_modulation", cfg.f_modulation.arg);
        } else if (cfg.f_modulation.tag != "none") {
            throw ConfigError("model.f_modulation: expected none, space:A or time:A");
        }
        if (cfg.f_modulation.tag != "none" && cfg.f.tag != "monostable" && cfg.f.tag != "bistable") {
            throw ConfigError("model.f_modulation: only monostable and bistable have a coefficient field");
        }
    }
    try {
        cfg.j1 = CostTerm::parse(get("model.j1"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model.j1: ") + e.what());
    }
    try {
        cfg.j2 = CostTerm::parse(get("model.j2"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model.j2: ") + e.what());
    }
    cfg.u0 = TaggedValue::parse(get("model.u0"));
    if (cfg.u0.tag == "constant") {
        detail::parse_real("model.u0", cfg.u0.arg);
    } else if (cfg.u0.tag == "mode") {
        const int k = detail::parse_int("model.u0", cfg.u0.arg);
        if (k < 1) throw ConfigError("model.u0: mode index starts at 1");
    } else if (cfg.u0.tag == "table") {
        if (cfg.u0.arg.empty()) throw ConfigError("model.u0: table needs a file name");
    } else {
        throw ConfigError("model.u0: expected constant:c, mode:k or table:file");
    }

    cfg.constraints.kappa0 = detail::parse_real("constraints.kappa0", get("constraints.kappa0"));
    cfg.constraints.kappa1 = detail::parse_real("constraints.kappa1", get("constraints.kappa1"));
    cfg.constraints.mean = detail::parse_real("constraints.V0", get("constraints.V0"));
    try {
        cfg.constraints.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (has("experiment.omega")) {
        cfg.omega.clear();
        for (const auto& item : detail::split(get("experiment.omega"), ',')) {
            const auto ab = detail::split(item, ':');
            if (ab.size() != 2) throw ConfigError("experiment.omega: expected intervals 'a:b,c:d', got '" + item + "'");
            const Interval iv{detail::parse_real("experiment.omega", ab[0]), detail::parse_real("experiment.omega", ab[1])};
            if (!(iv.a < iv.b) || iv.a < 0.0 || iv.b > cfg.L) {
                throw ConfigError("experiment.omega: interval '" + item + "' must satisfy 0 <= a < b <= L");
            }
            cfg.omega.push_back(iv);
        }
    }
    if (has("experiment.K_list")) {
        cfg.K_list.clear();
        for (const auto& item : detail::split(get("experiment.K_list"), ',')) {
            cfg.K_list.push_back(detail::parse_int("experiment.K_list", item));
        }
        for (std::size_t i = 0; i < cfg.K_list.size(); ++i) {
            if (cfg.K_list[i] < 1 || (i > 0 && cfg.K_list[i] <= cfg.K_list[i - 1])) {
                throw ConfigError("experiment.K_list: must be positive and increasing");
            }
        }
    }
    if (has("experiment.eps_list")) {
        cfg.eps_list.clear();
        for (const auto& item : detail::split(get("experiment.eps_list"), ',')) {
            cfg.eps_list.push_back(detail::parse_real("experiment.eps_list", item));
        }
        for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
            if (!(cfg.eps_list[i] > 0.0) || (i > 0 && cfg.eps_list[i] >= cfg.eps_list[i - 1])) {
                throw ConfigError("experiment.eps_list: must be positive and strictly decreasing");
            }
        }
    }
    if (has("experiment.t0")) {
        cfg.t0 = detail::parse_real("experiment.t0", get("experiment.t0"));
        if (!(*cfg.t0 > 0.0 && *cfg.t0 < cfg.T)) throw ConfigError("experiment.t0: must lie in (0, T)");
    }
    if (has("experiment.max_iters")) {
        cfg.max_iters = detail::parse_int("experiment.max_iters", get("experiment.max_iters"));
        if (cfg.max_iters < 0) throw ConfigError("experiment.max_iters: must be nonnegative");
    }
    if (has("experiment.tol")) {
        cfg.tol = detail::parse_real("experiment.tol", get("experiment.tol"));
        if (!(cfg.tol > 0.0)) throw ConfigError("experiment.tol: must be positive");
    }
    if (has("experiment.mode")) {
        cfg.mode = get("experiment.mode");
        if (cfg.mode != "projected" && cfg.mode != "thresholding") {
            throw ConfigError("experiment.mode: expected projected or thresholding");
        }
    }
    if (has("experiment.potential")) {
        cfg.potential = TaggedValue::parse(get("experiment.potential"));
        if (cfg.potential.tag == "constant") detail::parse_real("experiment.potential", cfg.potential.arg);
        else if (cfg.potential.tag != "benchmark" && cfg.potential.tag != "zero")
            throw ConfigError("experiment.potential: expected benchmark, zero or constant:c");
    }
    if (has("experiment.h0")) {
        cfg.h0 = TaggedValue::parse(get("experiment.h0"));
        if (cfg.h0.tag == "mode") {
            if (detail::parse_int("experiment.h0", cfg.h0.arg) < 1) throw ConfigError("experiment.h0: mode index starts at 1");
        } else if (cfg.h0.tag == "constant") {
            detail::parse_real("experiment.h0", cfg.h0.arg);
        } else {
            throw ConfigError("experiment.h0: expected mode:k or constant:c");
        }
    }
    if (has("experiment.control")) {
        TaggedValue c = TaggedValue::parse(get("experiment.control"));
        if (c.tag == "constant") detail::parse_real("experiment.control", c.arg);
        else if (c.tag == "table") {
            if (c.arg.empty()) throw ConfigError("experiment.control: table needs a file name");
        } else if (c.tag != "zero" && c.tag != "mean" && c.tag != "optimize")
            throw ConfigError("experiment.control: expected zero, mean, constant:c, table:file or optimize");
        cfg.control = c;
    }
    if (has("output.dir")) cfg.out_dir = get("output.dir");
    if (has("output.dump")) {
        const std::string d = get("output.dump");
        if (d == "true" || d == "1") cfg.dump = true;
        else if (d == "false" || d == "0") cfg.dump = false;
        else throw ConfigError("output.dump: expected true or false");
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str(), path);
    const auto slash = path.find_last_of('/');
    cfg.source_dir = slash == std::string::npos ? "." : path.substr(0, slash);
    return cfg;
}

// ---------------------------------------------------------------------------
// building the problem

namespace detail {

inline std::string resolve(const RunConfig& cfg, const std::string& file) {
    if (!file.empty() && file.front() == '/') return file;
    return cfg.source_dir + "/" + file;
}

/// Whitespace- or comma-separated numbers, '#' comments allowed.
inline std::vector<double> read_numbers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table '" + path + "'");
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (char& c : line) {
            if (c == ',') c = ' ';
        }
        std::istringstream row(line);
        std::string tok;
        while (row >> tok) out.push_back(parse_real(path, tok));
    }
    return out;
}

}  // namespace detail

inline Grid make_grid(const RunConfig& cfg) { return Grid::build(cfg.L, cfg.n, cfg.bc); }
inline TimeGrid make_time(const RunConfig& cfg) { return TimeGrid(cfg.T, cfg.nt); }

inline Nonlinearity make_nonlinearity(const RunConfig& cfg, const Grid& grid, const TimeGrid& time) {
    if (cfg.f.tag == "zero") return Nonlinearity::zero();
    const double p = detail::parse_real("model.f", cfg.f.arg);
    if (cfg.f.tag == "linear") return Nonlinearity::linear(p);
    double amp = 0.0;
    if (cfg.f_modulation.tag != "none") amp = detail::parse_real("model.f_modulation", cfg.f_modulation.arg);
    const bool in_time = cfg.f_modulation.tag == "time";
    const double L = grid.length();
    const double T = time.horizon();
    SpaceTimeField coef = SpaceTimeField::sample(time, grid, [&](double t, double x) {
        const double phase = in_time ? 2.0 * std::numbers::pi * t / T : std::numbers::pi * x / L;
        return p + amp * std::cos(phase);
    });
    return cfg.f.tag == "monostable" ? Nonlinearity::monostable(std::move(coef))
                                     : Nonlinearity::bistable(std::move(coef));
}

inline std::vector<double> make_initial(const RunConfig& cfg, const Grid& grid) {
    if (cfg.u0.tag == "constant") {
        return std::vector<double>(grid.size(), detail::parse_real("model.u0", cfg.u0.arg));
    }
    if (cfg.u0.tag == "mode") {
        const int k = detail::parse_int("model.u0", cfg.u0.arg);
        if (k > grid.size()) throw ConfigError("model.u0: mode " + std::to_string(k) + " exceeds the grid size");
        return discrete_eigenbasis(grid, k).mode(k).vector;
    }
    auto values = detail::read_numbers(detail::resolve(cfg, cfg.u0.arg));
    if (static_cast<int>(values.size()) != grid.size()) {
        throw ConfigError("model.u0: table has " + std::to_string(values.size()) + " values, grid has " +
                          std::to_string(grid.size()) + " dofs");
    }
    return values;
}

inline Problem make_problem(const RunConfig& cfg) {
    const Grid grid = make_grid(cfg);
    const TimeGrid time = make_time(cfg);
    Problem p{grid, time, make_nonlinearity(cfg, grid, time), {cfg.j1, cfg.j2}, make_initial(cfg, grid), cfg.constraints};
    p.validate();
    return p;
}

}  // namespace paracontrol
