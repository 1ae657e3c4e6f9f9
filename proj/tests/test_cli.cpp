#include <gtest/gtest.h>

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace paracontrol;
namespace fs = std::filesystem;

namespace {

const std::string fixtures = FIXTURE_DIR;

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation run(std::vector<std::string> args) {
    args.insert(args.begin(), "paracontrol");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_command(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("paracontrol_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, MinimalFileParses) {
    const RunConfig c = load_config(fixtures + "/minimal.cfg");
    EXPECT_EQ(c.n, 64);
    EXPECT_EQ(c.nt, 256);
    EXPECT_EQ(c.bc, Boundary::neumann);
    EXPECT_EQ(c.f.tag, "zero");
    EXPECT_EQ(c.j2.family(), CostTerm::Family::linear);
    EXPECT_DOUBLE_EQ(c.constraints.mean, 0.4);
    EXPECT_NO_THROW(make_problem(c));
}

TEST(Config, MissingKeyIsNamed) {
    try {
        load_config(fixtures + "/missing_v0.cfg");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("constraints.V0"), std::string::npos);
    }
}

TEST(Config, InfeasibleMeanCitesAdmissibleSet) {
    try {
        load_config(fixtures + "/infeasible.cfg");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible admissible set"), std::string::npos);
    }
}

TEST(Config, UnknownKeyAndSyntaxErrorsCarryLineNumbers) {
    try {
        load_config(fixtures + "/misspelled.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":13: unknown key 'experiment.max_iter'"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config("domain.L 1\n"), ConfigError);
    try {
        parse_config("# header\n\ndomain.L = abc\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("missing required key"), std::string::npos);
    }
}

TEST(Config, ValueTypes) {
    std::string base = slurp(fixtures + "/minimal.cfg");
    const RunConfig c = parse_config(base +
                                     "experiment.omega = 0.1:0.2, 0.6:0.9\n"
                                     "experiment.K_list = 2,4\n"
                                     "experiment.eps_list = 0.3,0.1\n"
                                     "experiment.mode = thresholding\n"
                                     "output.dump = true\n");
    ASSERT_EQ(c.omega.size(), 2u);
    EXPECT_DOUBLE_EQ(c.omega[1].b, 0.9);
    EXPECT_EQ(c.K_list, (std::vector<int>{2, 4}));
    EXPECT_EQ(c.mode, "thresholding");
    EXPECT_TRUE(c.dump);
    EXPECT_THROW(parse_config(base + "experiment.K_list = 4,2\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "experiment.omega = 0.5:0.2\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "domain.L = 2\n"), ConfigError);  // duplicate
}

TEST(Report, EmptyReportEchoesConfigOnly) {
    const fs::path dir = scratch("empty");
    RunReport rep;
    rep.command = "state";
    rep.config = {{"domain.L", "1"}};
    const auto files = write_report(rep, dir);
    ASSERT_EQ(files.size(), 1u);
    const std::string text = slurp(dir / "report.txt");
    EXPECT_NE(text.find("domain.L = 1"), std::string::npos);
    EXPECT_EQ(text.find("[results]"), std::string::npos);
    EXPECT_EQ(text.find("[verdicts]"), std::string::npos);
}

TEST(Cli, StateKeepsConstantData) {
    const fs::path dir = scratch("state");
    const Invocation r = run({"state", "--config", fixtures + "/constant3.cfg", "--out", dir.string(), "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "field_state.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x,value");
    int rows = 0;
    while (std::getline(in, line)) {
        const double v = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_NEAR(v, 3.0, 1e-13);
        ++rows;
    }
    EXPECT_EQ(rows, 21 * 16);
}

TEST(Cli, OutputsAreByteIdentical) {
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    ASSERT_EQ(run({"optimize", "--config", fixtures + "/convex.cfg", "--out", a.string(), "--quiet"}).code, 0);
    ASSERT_EQ(run({"optimize", "--config", fixtures + "/convex.cfg", "--out", b.string(), "--quiet"}).code, 0);
    for (const char* f : {"trace.csv", "field_control.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / "trace.csv").substr(0, 23), "iter,J,step,residual\n0,");
}

TEST(Cli, DiagnoseReadsOptimizedControl) {
    const fs::path a = scratch("diag_opt");
    ASSERT_EQ(run({"optimize", "--config", fixtures + "/convex.cfg", "--out", a.string(), "--quiet"}).code, 0);
    const fs::path cfg = a / "diagnose.cfg";
    std::ofstream(cfg) << slurp(fixtures + "/convex.cfg")
                       << "experiment.control = table:" << (a / "field_control.csv").string() << "\n";
    // the u0 table is resolved next to the config file
    fs::copy_file(fixtures + "/cosine_u0_64.txt", a / "cosine_u0_64.txt");
    const fs::path d = scratch("diag");
    const Invocation r = run({"diagnose", "--config", cfg.string(), "--out", d.string(), "--quiet"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(d / "diagnose.csv").substr(0, 45), "t,c,bang_fraction,abnormal_mass,maxZ_abnormal");
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("codes");
    const Invocation bad = run({"state", "--config", fixtures + "/misspelled.cfg", "--out", dir.string()});
    EXPECT_EQ(bad.code, 2);
    EXPECT_EQ(bad.err.rfind("ERROR 2:", 0), 0u) << bad.err;
    EXPECT_FALSE(fs::exists(dir / "report.txt"));

    EXPECT_EQ(run({"state", "--config", fixtures + "/infeasible.cfg", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"state", "--config", fixtures + "/does_not_exist.cfg", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"state", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);

    const Invocation fail = run({"optimize", "--config", fixtures + "/convex_starved.cfg", "--out", dir.string(), "--quiet"});
    EXPECT_EQ(fail.code, 1);
    EXPECT_NE(slurp(dir / "report.txt").find("FAIL ascent converged"), std::string::npos);
}

TEST(Cli, ConcentrateWritesSweep) {
    const fs::path dir = scratch("conc");
    const Invocation r = run({"concentrate", "--config", fixtures + "/concentrate_small.cfg", "--out", dir.string(), "--quiet"});
    EXPECT_LE(r.code, 1) << r.err;
    std::ifstream in(dir / "sweep.csv");
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "K,D_K,N_K,lemma7_ratio,time_tail_T8,time_tail_T4,space_tail_2dx,space_tail_4dx,rel_dev");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4);
}
