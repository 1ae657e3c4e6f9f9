#pragma once

// Batch front end: parse a run configuration, dispatch one experiment,
// write the report and map the outcome to an exit code
// (0 pass, 1 failed verdict or numerical failure, 2 usage or config error).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <paracontrol/config.hpp>
#include <paracontrol/control.hpp>
#include <paracontrol/errors.hpp>
#include <paracontrol/oscillation.hpp>
#include <paracontrol/report.hpp>
#include <paracontrol/verification.hpp>

namespace paracontrol::cli {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure; exit code 1.
class RunFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string command;
    std::string config;
    std::string out;
    bool dump = false;
    bool quiet = false;
};

namespace detail {

/// Control table in the field CSV layout (t,x,value), one row per node.
inline SpaceTimeField read_control_table(const std::string& path, const TimeGrid& time, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open control table '" + path + "'");
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        if (lineno == 1 && line.find_first_of("0123456789") != 0 && line.front() != '-') continue;  // header
        const auto cols = paracontrol::detail::split(line, ',');
        if (cols.size() != 3) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected t,x,value");
        values.push_back(paracontrol::detail::parse_real(path, cols[2]));
    }
    SpaceTimeField y = SpaceTimeField::zeros(time, grid);
    if (values.size() != y.values().size()) {
        throw ConfigError("control table '" + path + "' has " + std::to_string(values.size()) + " rows, expected " +
                          std::to_string(y.values().size()));
    }
    std::copy(values.begin(), values.end(), y.values().begin());
    return y;
}

inline AscentOptions ascent_options(const RunConfig& cfg) {
    AscentOptions o;
    o.max_iters = cfg.max_iters;
    o.tol = cfg.tol;
    o.mode = cfg.mode == "thresholding" ? AscentMode::thresholding : AscentMode::projected_gradient;
    return o;
}

inline CsvTable trace_table(const OptimizationTrace& tr) {
    CsvTable t{"trace.csv", {"iter", "J", "step", "residual"}, {}};
    for (const auto& r : tr.records) t.rows.push_back({double(r.iter), r.cost, r.step, r.residual});
    return t;
}

inline void record_trace(RunReport& rep, const OptimizationTrace& tr, const RunConfig& cfg) {
    rep.tables.push_back(trace_table(tr));
    rep.result("ascent_iterations", std::to_string(tr.iterations));
    rep.result("ascent_J", tr.final_cost());
    rep.result("ascent_residual", tr.final_residual());
    for (const auto& w : tr.warnings) rep.warnings.push_back(w);
    rep.verdict("ascent converged", tr.converged,
                "residual " + RunReport::format_real(tr.final_residual()) + " <= " + RunReport::format_real(cfg.tol));
}

/// Resolves experiment.control. "optimize" runs the ascent and records its trace.
inline SpaceTimeField resolve_control(const RunConfig& cfg, const Problem& problem, const TaggedValue& choice,
                                      RunReport& rep) {
    const TimeGrid& time = problem.time;
    const Grid& grid = problem.grid;
    if (choice.tag == "zero") return SpaceTimeField::zeros(time, grid);
    if (choice.tag == "mean") return SpaceTimeField::constant(time, grid, cfg.constraints.mean);
    if (choice.tag == "constant") {
        return SpaceTimeField::constant(time, grid, paracontrol::detail::parse_real("experiment.control", choice.arg));
    }
    if (choice.tag == "table") return read_control_table(paracontrol::detail::resolve(cfg, choice.arg), time, grid);
    const OptimizationTrace tr =
        ascend(problem, SpaceTimeField::constant(time, grid, cfg.constraints.mean), ascent_options(cfg));
    record_trace(rep, tr, cfg);
    return tr.y;
}

inline std::vector<double> resolve_h0(const RunConfig& cfg, const Grid& grid) {
    if (cfg.h0.tag == "constant") {
        return std::vector<double>(grid.size(), paracontrol::detail::parse_real("experiment.h0", cfg.h0.arg));
    }
    const int k = paracontrol::detail::parse_int("experiment.h0", cfg.h0.arg);
    if (k > grid.size()) throw ConfigError("experiment.h0: mode " + std::to_string(k) + " exceeds the grid size");
    return discrete_eigenbasis(grid, k).mode(k).vector;
}

inline SpaceTimeField resolve_potential(const RunConfig& cfg, const Grid& grid, const TimeGrid& time) {
    if (cfg.potential.tag == "benchmark") return benchmark_potential(grid, time);
    if (cfg.potential.tag == "zero") return SpaceTimeField::zeros(time, grid);
    return SpaceTimeField::constant(time, grid, paracontrol::detail::parse_real("experiment.potential", cfg.potential.arg));
}

inline void dump_fields(RunReport& rep, const Problem& problem, const SpaceTimeField& y) {
    const SpaceTimeField u = solve_state(problem, y);
    const SpaceTimeField p = solve_adjoint(problem, u);
    rep.tables.push_back(field_table("state", u, problem.time, problem.grid));
    rep.tables.push_back(field_table("adjoint", p, problem.time, problem.grid));
    rep.tables.push_back(field_table("Z", compute_Z(problem, u, p), problem.time, problem.grid));
}

// ---------------------------------------------------------------------------
// subcommands

inline void cmd_state(const RunConfig& cfg, bool dump, RunReport& rep) {
    const Problem problem = make_problem(cfg);
    const SpaceTimeField y = resolve_control(cfg, problem, cfg.control.value_or(TaggedValue{"zero", {}}), rep);
    const SpaceTimeField u = solve_state(problem, y);
    rep.tables.push_back(field_table("state", u, problem.time, problem.grid));
    if (dump) rep.tables.push_back(field_table("control", y, problem.time, problem.grid));
    const auto last = u.row(problem.time.steps());
    rep.result("J", cost_of_state(problem, u));
    rep.result("mean_u_T", mean(last, problem.grid));
    rep.result("min_u", *std::min_element(u.values().begin(), u.values().end()));
    rep.result("max_u", *std::max_element(u.values().begin(), u.values().end()));
    rep.verdict("state finite", u.all_finite());
}

inline void cmd_optimize(const RunConfig& cfg, bool dump, RunReport& rep) {
    const Problem problem = make_problem(cfg);
    const TaggedValue start = cfg.control.value_or(TaggedValue{"mean", {}});
    if (start.tag == "optimize") throw ConfigError("experiment.control: 'optimize' is not a starting control");
    const SpaceTimeField y0 = resolve_control(cfg, problem, start, rep);
    const OptimizationTrace tr = ascend(problem, y0, ascent_options(cfg));
    record_trace(rep, tr, cfg);
    rep.tables.push_back(field_table("control", tr.y, problem.time, problem.grid));
    if (dump) dump_fields(rep, problem, tr.y);
}

inline void cmd_diagnose(const RunConfig& cfg, bool dump, RunReport& rep) {
    const Problem problem = make_problem(cfg);
    const SpaceTimeField y = resolve_control(cfg, problem, cfg.control.value_or(TaggedValue{"optimize", {}}), rep);
    const SecondOrderReport sr = second_order_report(problem, y, default_abnormal_tolerance(cfg.constraints));
    CsvTable t{"diagnose.csv", {"t", "c", "bang_fraction", "abnormal_mass", "maxZ_abnormal"}, {}};
    for (const auto& s : sr.slices) {
        const double zmax = s.abnormal_mass > 0.0 ? s.max_z_abnormal : std::nan("");
        t.rows.push_back({s.t, s.c, s.bang_fraction, s.abnormal_mass, zmax});
    }
    rep.tables.push_back(std::move(t));
    if (dump) {
        rep.tables.push_back(field_table("control", y, problem.time, problem.grid));
        dump_fields(rep, problem, y);
    }
    rep.result("first_order_residual", sr.first_order_residual);
    rep.result("abnormal_measure", sr.abnormal_measure);
    rep.result("total_measure", sr.total_measure);
    rep.result("bang_fraction", sr.bang_fraction);
    rep.result("Z_sup", sr.z_sup);
    rep.result("eta", sr.eta);
    rep.result("convex_slices", std::to_string(sr.convex_slices));
    rep.result("convex_slices_not_bang_bang", std::to_string(sr.convex_slices_not_bang_bang));
    rep.verdict("first-order condition", sr.first_order_residual <= cfg.tol,
                "residual " + RunReport::format_real(sr.first_order_residual));
    // a single partially filled dof per slice is forced by the mean constraint
    // and says nothing about the sign of Z
    const bool genuine = std::any_of(sr.slices.begin(), sr.slices.end(), [](const auto& s) { return !s.bang_bang; });
    if (sr.abnormal_measure > 0.0) {
        rep.result("Z_max_abnormal", sr.z_max_abnormal);
        rep.result("Z_p99_abnormal", sr.z_p99_abnormal);
    }
    if (genuine) {
        rep.verdict("Z <= 0 on the abnormal set (99th percentile)", sr.sign_condition,
                    RunReport::format_real(sr.z_p99_abnormal) + " <= " + RunReport::format_real(sr.eta));
        rep.verdict("Z <= 0 on the abnormal set (max)", sr.sign_condition_max,
                    RunReport::format_real(sr.z_max_abnormal) + " <= " + RunReport::format_real(5.0 * sr.eta));
    }
    if (sr.convex_slices > 0) {
        rep.verdict("convex slices are bang-bang", sr.convex_slices_not_bang_bang == 0,
                    std::to_string(sr.convex_slices_not_bang_bang) + " of " + std::to_string(sr.convex_slices) +
                        " convex slices keep an abnormal set");
    }
}

inline void cmd_concentrate(const RunConfig& cfg, RunReport& rep) {
    const Grid grid = make_grid(cfg);
    const TimeGrid time = make_time(cfg);
    const RegionMask omega = region_mask(grid, cfg.omega);
    if (omega.count() == 0) throw ConfigError("experiment.omega: contains no grid dof");
    const SpaceTimeField q = resolve_potential(cfg, grid, time);
    const ConcentrationReport cr = concentration_sweep(q, omega, cfg.K_list, grid, time);
    CsvTable t{"sweep.csv",
               {"K", "D_K", "N_K", "lemma7_ratio", "time_tail_T8", "time_tail_T4", "space_tail_2dx", "space_tail_4dx",
                "rel_dev"},
               {}};
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (const auto& r : cr.rows) {
        t.rows.push_back({double(r.K), r.denominator, r.squared_norm, r.lemma7_ratio, r.time_tail_T8, r.time_tail_T4,
                          r.space_tail_2dx, r.space_tail_4dx, r.rel_dev});
        rmin = std::min(rmin, r.lemma7_ratio);
        rmax = std::max(rmax, r.lemma7_ratio);
    }
    rep.tables.push_back(std::move(t));
    rep.result("lemma7_ratio_min", rmin);
    rep.result("lemma7_ratio_max", rmax);
    rep.verdict("time tail (T/8) nonincreasing in K", cr.time_tails_monotone);
    rep.verdict("space tail (4dx) nonincreasing in K", cr.space_tails_monotone);
    rep.verdict("tails below 0.1 at the largest K", cr.final_tails_small);
    rep.verdict("norm ratio within [0.2, 1.5]", rmin >= 0.2 && rmax <= 1.5);
    if (cfg.potential.tag == "zero") rep.verdict("norm ratio >= 1/4 without potential", rmin >= 0.25 - 1e-6);
}

inline void cmd_perturb(const RunConfig& cfg, RunReport& rep) {
    const Problem problem = make_problem(cfg);
    const SpaceTimeField y = resolve_control(cfg, problem, cfg.control.value_or(TaggedValue{"mean", {}}), rep);
    const double t0 = cfg.t0.value_or(0.5 * cfg.T);
    std::vector<double> eps;
    for (double e : cfg.eps_list) eps.push_back(e * cfg.T);
    const PerturbationReport pr = perturbation_convergence(problem, y, t0, resolve_h0(cfg, problem.grid), eps);
    CsvTable t{"perturb.csv", {"eps", "l2_error", "prop11_witness"}, {}};
    for (const auto& r : pr.rows) t.rows.push_back({r.eps, r.l2_error, r.prop11_witness});
    rep.tables.push_back(std::move(t));
    rep.result("t0", t0);
    rep.result("cauchy_witness", pr.cauchy_witness);
    rep.result("error_ratio", pr.ratio);
    rep.verdict("error strictly decreasing in eps", pr.strictly_decreasing);
    rep.verdict("final/first error ratio <= 0.3", pr.ratio <= 0.3, "ratio " + RunReport::format_real(pr.ratio));
}

inline void cmd_selftest(RunReport& rep) {
    std::vector<verify::Check> all;
    for (auto group : {verify::exact_identity_checks(), verify::adjoint_checks(), verify::projection_checks(),
                       verify::convergence_checks()}) {
        all.insert(all.end(), group.begin(), group.end());
    }
    for (const auto& c : all) {
        rep.verdict(c.name, c.pass, RunReport::format_real(c.value) + " vs " + RunReport::format_real(c.threshold));
    }
}

inline void print_summary(const RunReport& rep, std::ostream& out) {
    for (const auto& [k, v] : rep.results) out << k << " = " << v << "\n";
    for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
    for (const auto& v : rep.verdicts) {
        out << (v.pass ? "PASS  " : "FAIL  ") << v.name;
        if (!v.detail.empty()) out << "  [" << v.detail << "]";
        out << "\n";
    }
}

}  // namespace detail

/// Runs one command; returns the process exit code.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Bang-bang optimal control of semilinear parabolic equations", "paracontrol"};
    Options opt;
    std::string out_flag;
    app.add_option("--config", opt.config, "run configuration file");
    app.add_option("--out", out_flag, "output directory (default ./out)");
    app.add_flag("--dump", opt.dump, "also write state, adjoint and Z fields");
    app.add_flag("--quiet", opt.quiet, "suppress the summary on stdout");
    app.fallthrough();
    app.require_subcommand(1);
    const std::vector<std::pair<const char*, const char*>> commands{
        {"state", "solve the state equation for a control"},
        {"optimize", "maximize J over the admissible controls"},
        {"diagnose", "first- and second-order diagnostics at a control"},
        {"concentrate", "concentration sweep for oscillating initial data"},
        {"perturb", "time-concentrated perturbations versus the Cauchy response"},
        {"selftest", "run the embedded verification suite"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->callback([&opt, n = std::string(name)] { opt.command = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "ERROR 2: " << e.what() << "\n";
        return 2;
    }

    const auto started = std::chrono::steady_clock::now();
    RunReport rep;
    rep.command = opt.command;
    try {
        RunConfig cfg;
        if (opt.command != "selftest") {
            if (opt.config.empty()) throw UsageError(opt.command + " needs --config PATH");
            cfg = load_config(opt.config);
            rep.config = cfg.entries;
        }
        std::string dir = out_flag.empty() ? cfg.out_dir : out_flag;
        if (out_flag.empty() && opt.command == "selftest") dir = "out";
        const bool dump = opt.dump || cfg.dump;

        if (opt.command == "state") detail::cmd_state(cfg, dump, rep);
        else if (opt.command == "optimize") detail::cmd_optimize(cfg, dump, rep);
        else if (opt.command == "diagnose") detail::cmd_diagnose(cfg, dump, rep);
        else if (opt.command == "concentrate") detail::cmd_concentrate(cfg, rep);
        else if (opt.command == "perturb") detail::cmd_perturb(cfg, rep);
        else detail::cmd_selftest(rep);

        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_report(rep, dir);
        if (!opt.quiet) {
            detail::print_summary(rep, out);
            out << (rep.all_pass() ? "overall: PASS" : "overall: FAIL") << "\n";
        }
        return rep.all_pass() ? 0 : 1;
    } catch (const UsageError& e) {
        err << "ERROR 2: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "ERROR 2: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "ERROR 2: " << e.what() << "\n";
        return 2;
    } catch (const StepFailure& e) {
        err << "ERROR 1: " << e.what() << "\n";
        return 1;
    } catch (const DivergenceError& e) {
        err << "ERROR 1: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "ERROR 1: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace paracontrol::cli
