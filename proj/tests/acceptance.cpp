// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N] --cli PATH --fixtures DIR --work DIR
//
// Exit status is 0 only if every selected criterion passes.

#include <paracontrol/benchmarks.hpp>
#include <paracontrol/control.hpp>
#include <paracontrol/oscillation.hpp>
#include <paracontrol/verification.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace paracontrol;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
    std::vector<std::string> notes;
};

struct Paths {
    std::string cli;
    std::string fixtures;
    std::string work;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome from_checks(const std::vector<verify::Check>& checks) {
    Outcome o{true, {}, {}};
    int passed = 0;
    for (const auto& c : checks) {
        o.pass = o.pass && c.pass;
        passed += c.pass;
        o.notes.push_back(std::string(c.pass ? "ok   " : "FAIL ") + c.name + ": " + fmt("%.3e", c.value) + " vs " +
                          fmt("%.3e", c.threshold));
    }
    o.summary = std::to_string(passed) + "/" + std::to_string(checks.size()) + " checks";
    return o;
}

Outcome criterion5() {
    using S = bench::ConcentrationSetup;
    const Grid grid = Grid::build(1.0, S::cells, Boundary::neumann);
    const TimeGrid time(S::horizon, S::steps);
    const Interval iv{S::omega_a * grid.length(), S::omega_b * grid.length()};
    const RegionMask omega = region_mask(grid, std::span(&iv, 1));
    const std::vector<int> Ks{4, 8, 16, 32};

    const ConcentrationReport on = concentration_sweep(benchmark_potential(grid, time), omega, Ks, grid, time);
    const ConcentrationReport off = concentration_sweep(SpaceTimeField::zeros(time, grid), omega, Ks, grid, time);

    Outcome o;
    double rmin = 1e300, rmax = 0.0, rmin_free = 1e300;
    for (const auto& r : on.rows) {
        rmin = std::min(rmin, r.lemma7_ratio);
        rmax = std::max(rmax, r.lemma7_ratio);
        o.notes.push_back("K=" + std::to_string(r.K) + " ratio " + fmt("%.4f", r.lemma7_ratio) + " time_tail(T/8) " +
                          fmt("%.3e", r.time_tail_T8) + " space_tail(4dx) " + fmt("%.3e", r.space_tail_4dx));
    }
    for (const auto& r : off.rows) rmin_free = std::min(rmin_free, r.lemma7_ratio);
    const bool band = rmin >= 0.2 && rmax <= 1.5;
    const bool floor = rmin_free >= 0.25 - 1e-6;
    o.pass = on.time_tails_monotone && on.space_tails_monotone && on.final_tails_small && band && floor;
    o.summary = std::string("tails monotone ") + (on.time_tails_monotone && on.space_tails_monotone ? "yes" : "no") +
                ", final tails " + fmt("%.2e", on.rows.back().time_tail_T8) + "/" +
                fmt("%.2e", on.rows.back().space_tail_4dx) + " < 0.1, ratio in [" + fmt("%.3f", rmin) + ", " +
                fmt("%.3f", rmax) + "], free floor " + fmt("%.3f", rmin_free) + " >= 0.25";
    return o;
}

Outcome criterion6() {
    const Problem p = bench::convex();
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, p.constraints.mean));
    const SecondOrderReport rep = second_order_report(p, tr.y, default_abnormal_tolerance(p.constraints));
    Outcome o;
    o.pass = tr.converged && tr.final_residual() <= 1e-8 && rep.bang_fraction >= 0.98;
    o.summary = "residual " + fmt("%.2e", tr.final_residual()) + " after " + std::to_string(tr.iterations) +
                " iterations, bang-bang fraction " + fmt("%.4f", rep.bang_fraction) + " >= 0.98";
    o.notes.push_back("convex slices " + std::to_string(rep.convex_slices) + ", of which not bang-bang " +
                      std::to_string(rep.convex_slices_not_bang_bang));
    return o;
}

Outcome criterion7() {
    const Problem p = bench::concave();
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, p.constraints.mean));
    const SecondOrderReport rep = second_order_report(p, tr.y, default_abnormal_tolerance(p.constraints));
    const double scale = std::max(1.0, rep.z_sup);
    const double need = 0.05 * p.grid.length() * p.time.horizon();
    Outcome o;
    o.pass = tr.converged && rep.abnormal_measure >= need && rep.z_p99_abnormal <= 1e-2 * scale &&
             rep.z_max_abnormal <= 5e-2 * scale;
    o.summary = "abnormal mass " + fmt("%.4f", rep.abnormal_measure) + " >= " + fmt("%.3f", need) + ", p99(Z) " +
                fmt("%.3e", rep.z_p99_abnormal) + " <= " + fmt("%.3e", 1e-2 * scale) + ", max(Z) " +
                fmt("%.3e", rep.z_max_abnormal) + " <= " + fmt("%.3e", 5e-2 * scale);
    o.notes.push_back("first-order residual " + fmt("%.2e", tr.final_residual()));
    return o;
}

Outcome criterion8() {
    const Problem p = bench::bistable();
    const SpaceTimeField y = SpaceTimeField::constant(p.time, p.grid, p.constraints.mean);
    const double T = p.time.horizon();
    const std::vector<double> eps{0.2 * T, 0.1 * T, 0.05 * T, 0.025 * T};
    const auto h0 = discrete_eigenbasis(p.grid, 2).mode(2).vector;
    const PerturbationReport rep = perturbation_convergence(p, y, 0.5 * T, h0, eps);
    const PerturbationReport zero =
        perturbation_convergence(p, y, 0.5 * T, std::vector<double>(p.grid.size(), 0.0), eps);
    bool zero_ok = zero.cauchy_witness == 0.0;
    for (const auto& r : zero.rows) zero_ok = zero_ok && r.l2_error == 0.0;
    Outcome o;
    o.pass = rep.strictly_decreasing && rep.ratio <= 0.3 && zero_ok;
    o.summary = std::string("strictly decreasing ") + (rep.strictly_decreasing ? "yes" : "no") + ", final/first " +
                fmt("%.4f", rep.ratio) + " <= 0.3, h0 = 0 exact " + (zero_ok ? "yes" : "no");
    for (const auto& r : rep.rows) {
        o.notes.push_back("eps " + fmt("%.4f", r.eps) + " error " + fmt("%.6e", r.l2_error) + " witness " +
                          fmt("%.3e", r.prop11_witness));
    }
    o.notes.push_back("Cauchy witness " + fmt("%.3e", rep.cauchy_witness));
    return o;
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion9(const Paths& paths) {
    Outcome o{true, {}, {}};
    if (paths.cli.empty()) return {false, "no --cli given", {}};
    fs::remove_all(paths.work);
    fs::create_directories(paths.work);
    const std::string cli = "'" + paths.cli + "'";
    auto cfg = [&](const std::string& name) { return "'" + paths.fixtures + "/" + name + "'"; };
    auto out = [&](const std::string& name) { return "'" + paths.work + "/" + name + "'"; };
    auto expect = [&](const std::string& label, const std::string& args, int code, const std::string& tag) {
        const std::string err = paths.work + "/" + tag + ".stderr";
        const int got = shell(cli + " " + args + " --quiet > /dev/null 2> '" + err + "'");
        bool ok = got == code;
        if (code == 2) ok = ok && slurp(err).rfind("ERROR 2:", 0) == 0;
        o.pass = o.pass && ok;
        o.notes.push_back(std::string(ok ? "ok   " : "FAIL ") + label + ": exit " + std::to_string(got) +
                          " (want " + std::to_string(code) + ")");
    };
    expect("good config", "state --config " + cfg("constant3.cfg") + " --out " + out("good"), 0, "good");
    expect("misspelled key", "state --config " + cfg("misspelled.cfg") + " --out " + out("bad1"), 2, "bad1");
    expect("infeasible constraints", "state --config " + cfg("infeasible.cfg") + " --out " + out("bad2"), 2, "bad2");
    expect("missing --config", "optimize --out " + out("bad3"), 2, "bad3");
    expect("failing verdict", "optimize --config " + cfg("convex_starved.cfg") + " --out " + out("fail"), 1, "fail");
    expect("selftest", "selftest --out " + out("selftest"), 0, "selftest");

    const std::string report = slurp(paths.work + "/selftest/report.txt");
    int checks = 0;
    for (std::size_t pos = 0; (pos = report.find("\nPASS ", pos)) != std::string::npos; ++pos) ++checks;
    const bool enough = checks >= 12 && report.find("\nFAIL ") == std::string::npos;
    o.pass = o.pass && enough;
    o.notes.push_back(std::string(enough ? "ok   " : "FAIL ") + "selftest lists " + std::to_string(checks) +
                      " passing checks");

    expect("determinism run A", "optimize --config " + cfg("convex.cfg") + " --out " + out("det_a"), 0, "det_a");
    expect("determinism run B", "optimize --config " + cfg("convex.cfg") + " --out " + out("det_b"), 0, "det_b");
    bool same = true;
    for (const char* f : {"trace.csv", "field_control.csv"}) {
        const std::string a = slurp(paths.work + "/det_a/" + f);
        same = same && !a.empty() && a == slurp(paths.work + "/det_b/" + f);
    }
    o.pass = o.pass && same;
    o.notes.push_back(std::string(same ? "ok   " : "FAIL ") + "CSV artifacts byte-identical");
    o.summary = "exit-code matrix, selftest (" + std::to_string(checks) + " checks) and determinism";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    Paths paths;
    int only = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--only") only = std::atoi(argv[i + 1]);
        else if (flag == "--cli") paths.cli = argv[i + 1];
        else if (flag == "--fixtures") paths.fixtures = argv[i + 1];
        else if (flag == "--work") paths.work = argv[i + 1];
        else {
            std::fprintf(stderr, "unknown flag %s\n", flag.c_str());
            return 2;
        }
    }
    if (paths.work.empty()) paths.work = (fs::temp_directory_path() / "paracontrol_acceptance").string();

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact identities", [] { return from_checks(verify::exact_identity_checks()); }},
        {"adjoint consistency", [] { return from_checks(verify::adjoint_checks()); }},
        {"projection suite", [] { return from_checks(verify::projection_checks()); }},
        {"convergence order, mass, energy bound", [] { return from_checks(verify::convergence_checks()); }},
        {"concentration of oscillating data", criterion5},
        {"convex instance is bang-bang", criterion6},
        {"Z <= 0 on the abnormal set", criterion7},
        {"time-concentrated perturbations", criterion8},
        {"CLI contract", [&] { return criterion9(paths); }},
    };

    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (only != 0 && only != id) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what(), {}};
        }
        all = all && o.pass;
        std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.summary.c_str());
        for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
