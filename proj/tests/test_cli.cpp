#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "pulseopt/io.hpp"
#include "testutil.hpp"

namespace {

const std::string kBin = PULSEOPT_BIN;

std::string fixture(const char* name) { return std::string(CONFIG_DIR) + "/" + name; }

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

const char* kMiniOptimize =
    "[system]\n"
    "n_levels = 2\n"
    "[pulse.1]\n"
    "omega0 = 3\n"
    "[integrator]\n"
    "rel_tol = 1e-6\n"
    "abs_tol = 1e-9\n"
    "[optim]\n"
    "max_iters = 15\n"
    "grad_tol = 1e-4\n"
    "[output]\n"
    "samples = 50\n";

}  // namespace

TEST_CASE("simulate writes the trajectory and summary for a bundled table") {
    const std::string dir = testutil::make_temp_dir("cli_sim");
    const auto r = testutil::run_cli(
        kBin, "simulate --config '" + fixture("table3.cfg") + "' --out " + dir + "/t3", dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("wrote") != std::string::npos);
    REQUIRE(file_exists(dir + "/t3_traj.csv"));
    REQUIRE(file_exists(dir + "/t3_summary.txt"));

    const auto kv = testutil::read_summary(dir + "/t3_summary.txt");
    CHECK(testutil::summary_value(kv, "rho55_final") > 0.9);
    CHECK(testutil::summary_value(kv, "max_rho22") < 0.1);
    CHECK(testutil::summary_value(kv, "max_rho44") < 0.1);
    CHECK(std::abs(testutil::summary_value(kv, "trace_final") - 1.0) <= 1e-6);

    const auto lines = testutil::read_lines(dir + "/t3_traj.csv");
    CHECK(lines.size() == 1001);
    CHECK(lines[0] == "t,rho11,rho22,rho33,rho44,rho55,omega1,omega2,omega3,omega4");
}

TEST_CASE("simulate leaves an undriven system in its initial level") {
    const std::string dir = testutil::make_temp_dir("cli_zero");
    const auto r = testutil::run_cli(
        kBin, "simulate --config '" + fixture("zero_drive.cfg") + "' --out " + dir + "/z",
        dir);
    REQUIRE(r.exit_code == 0);
    const auto kv = testutil::read_summary(dir + "/z_summary.txt");
    CHECK(std::abs(testutil::summary_value(kv, "rho11_final") - 1.0) <= 1e-9);
    CHECK(std::abs(testutil::summary_value(kv, "quad_init") - 22.5) <= 1e-6);
}

TEST_CASE("simulate falls back to the configured output prefix") {
    const std::string dir = testutil::make_temp_dir("cli_prefix");
    testutil::write_file(dir + "/p.cfg",
                         "[system]\nn_levels = 2\n[pulse.1]\nomega0 = 0\n"
                         "[integrator]\nt_final = 5\n[output]\nprefix = zz\nsamples = 4\n");
    const auto r = testutil::run_cli(kBin, "simulate --config p.cfg", dir);
    REQUIRE(r.exit_code == 0);
    CHECK(file_exists(dir + "/zz_traj.csv"));
    CHECK(file_exists(dir + "/zz_summary.txt"));
}

TEST_CASE("configuration problems exit with the config status") {
    const std::string dir = testutil::make_temp_dir("cli_cfg");
    const auto missing =
        testutil::run_cli(kBin, "simulate --config " + dir + "/absent.cfg", dir);
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("absent.cfg") != std::string::npos);

    testutil::write_file(dir + "/bad.cfg", "[system]\nwibble = 1\n");
    const auto bad = testutil::run_cli(kBin, "simulate --config " + dir + "/bad.cfg", dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("wibble") != std::string::npos);
    CHECK(bad.output.find("bad.cfg:2") != std::string::npos);
}

TEST_CASE("an exhausted step budget exits with the integration status") {
    const std::string dir = testutil::make_temp_dir("cli_steps");
    testutil::write_file(dir + "/steps.cfg",
                         "[pulse.1]\nomega0 = 5\n[integrator]\nmax_steps = 5\n");
    const auto r = testutil::run_cli(kBin, "simulate --config steps.cfg", dir);
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("integration error") != std::string::npos);
}

TEST_CASE("unwritable output prefixes exit with the io status") {
    const std::string dir = testutil::make_temp_dir("cli_io");
    const auto r = testutil::run_cli(
        kBin,
        "simulate --config '" + fixture("zero_drive.cfg") + "' --out /nonexistent/place/x",
        dir);
    CHECK(r.exit_code == 4);
    CHECK(r.output.find("io error") != std::string::npos);
}

TEST_CASE("optimize is reproducible and its artifacts are reusable") {
    const std::string dir = testutil::make_temp_dir("cli_opt");
    testutil::write_file(dir + "/mini.cfg", kMiniOptimize);

    const std::string args = "optimize --config mini.cfg --starts 1 --seed 7 --trace";
    const auto r1 = testutil::run_cli(kBin, args + " --out " + dir + "/m1", dir);
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output.find("start 0:") != std::string::npos);
    REQUIRE(file_exists(dir + "/m1_best.cfg"));
    REQUIRE(file_exists(dir + "/m1_traj.csv"));
    REQUIRE(file_exists(dir + "/m1_summary.txt"));
    REQUIRE(file_exists(dir + "/m1_trace_0.csv"));

    const auto r2 = testutil::run_cli(kBin, args + " --out " + dir + "/m2", dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(pulseopt::read_text_file(dir + "/m1_summary.txt") ==
          pulseopt::read_text_file(dir + "/m2_summary.txt"));
    CHECK(pulseopt::read_text_file(dir + "/m1_best.cfg") ==
          pulseopt::read_text_file(dir + "/m2_best.cfg"));

    // the trace loss column never increases
    const auto trace = testutil::read_lines(dir + "/m1_trace_0.csv");
    REQUIRE(trace.size() >= 2);
    CHECK(trace[0].rfind("iter,loss,pgnorm,step", 0) == 0);
    double prev = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < trace.size(); ++i) {
        const double loss = std::strtod(testutil::split_csv(trace[i])[1].c_str(), nullptr);
        CHECK(loss <= prev + 1e-12);
        prev = loss;
    }

    const auto kv = testutil::read_summary(dir + "/m1_summary.txt");
    CHECK(kv.at("starts") == "1");
    CHECK(kv.at("seed") == "7");
    CHECK(kv.count("best_loss") == 1);
    CHECK(kv.count("best_o1") == 1);

    // the written best configuration is itself a valid simulate input
    const auto re = testutil::run_cli(
        kBin, "simulate --config m1_best.cfg --out " + dir + "/re", dir);
    CHECK(re.exit_code == 0);
    CHECK(file_exists(dir + "/re_summary.txt"));
}

TEST_CASE("gradcheck validates its own differentiators on a quadratic") {
    const std::string dir = testutil::make_temp_dir("cli_gq");
    const auto r = testutil::run_cli(kBin, "gradcheck --quadratic", dir);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("gradcheck passes the bundled tables at the default step") {
    const std::string dir = testutil::make_temp_dir("cli_gt");
    for (const char* name : {"table1.cfg", "table3.cfg"}) {
        CAPTURE(name);
        const auto r = testutil::run_cli(
            kBin, "gradcheck --config '" + fixture(name) + "'", dir);
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("PASS") != std::string::npos);
        CHECK(r.output.find("max relative error") != std::string::npos);
    }
}

TEST_CASE("gradcheck fails loudly for an absurd difference step") {
    const std::string dir = testutil::make_temp_dir("cli_gf");
    const auto r = testutil::run_cli(
        kBin, "gradcheck --config '" + fixture("table1.cfg") + "' --h 10", dir);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("FAIL") != std::string::npos);
}

TEST_CASE("gradcheck without a target is a config error") {
    const std::string dir = testutil::make_temp_dir("cli_gn");
    const auto r = testutil::run_cli(kBin, "gradcheck", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--config") != std::string::npos);
}

TEST_CASE("help is available and a subcommand is required") {
    const std::string dir = testutil::make_temp_dir("cli_help");
    const auto help = testutil::run_cli(kBin, "--help", dir);
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("simulate") != std::string::npos);
    CHECK(help.output.find("optimize") != std::string::npos);
    CHECK(help.output.find("gradcheck") != std::string::npos);
    CHECK(help.output.find("Config keys") != std::string::npos);

    const auto sub = testutil::run_cli(kBin, "gradcheck --help", dir);
    CHECK(sub.exit_code == 0);
    CHECK(sub.output.find("--h") != std::string::npos);

    const auto none = testutil::run_cli(kBin, "", dir);
    CHECK(none.exit_code != 0);
}
