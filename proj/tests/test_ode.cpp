#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "doctest.h"
#include "pulseopt/io.hpp"
#include "pulseopt/ode.hpp"
#include "testutil.hpp"

using namespace pulseopt;

namespace {

PulseSet zero_drive(int n_channels) {
    PulseSet ps;
    for (int j = 0; j < n_channels; ++j) ps.channels.push_back({22.5, 3.0, 0.0, 0.0});
    return ps;
}

double row_sum(const std::vector<double>& pops) {
    double s = 0.0;
    for (double p : pops) s += p;
    return s;
}

}  // namespace

TEST_CASE("undriven undissipated ground state is stationary") {
    SystemSpec spec = make_system(5);
    spec.jump_channels.clear();
    IntegratorConfig cfg;
    cfg.t_final = 10.0;
    cfg.dense_samples = 21;
    const Trajectory traj = integrate(spec, zero_drive(4), cfg);
    for (const auto& pops : traj.populations) {
        CHECK(std::abs(pops[0] - 1.0) <= 1e-12);
        for (int i = 1; i < 5; ++i) CHECK(std::abs(pops[i]) <= 1e-12);
    }
}

TEST_CASE("spontaneous decay from the first excited level") {
    // rho0 = |2><2|, equal branching: rho22 = e^{-t}, rho11 = rho33 = (1-e^{-t})/2.
    // The 6-point grid makes t = 1..4 interpolated samples and t = 5 the
    // integration end point, so this also pins the dense-output interpolant.
    const SystemSpec spec = make_system(5);
    IntegratorConfig cfg;
    cfg.t_final = 5.0;
    cfg.dense_samples = 6;
    const Trajectory traj = integrate(spec, zero_drive(4), cfg, basis_state(5, 2));
    for (int i = 0; i < 6; ++i) {
        const double t = traj.times[i];
        const double e = std::exp(-t);
        CHECK(traj.populations[i][1] == doctest::Approx(e).epsilon(1e-6));
        CHECK(traj.populations[i][0] == doctest::Approx(0.5 * (1.0 - e)).epsilon(1e-6));
        CHECK(traj.populations[i][2] == doctest::Approx(0.5 * (1.0 - e)).epsilon(1e-6));
        CHECK(std::abs(traj.populations[i][3]) <= 1e-9);
        CHECK(std::abs(traj.populations[i][4]) <= 1e-9);
    }
    CHECK(traj.final_state.population(2) == doctest::Approx(std::exp(-5.0)).epsilon(1e-6));
}

TEST_CASE("resonant Rabi oscillation of a two-level reduction") {
    // Constant drive Omega (huge-width Gaussian), no decay: rho22 = sin^2(Omega t).
    SystemSpec spec;
    spec.n_levels = 2;
    spec.jump_channels.clear();
    PulseSet ps;
    ps.channels.push_back({0.0, 1e6, 2.0, 0.0});
    const double omega = 2.0;
    const std::array<double, 5> phases{std::numbers::pi / 6.0, std::numbers::pi / 4.0,
                                       std::numbers::pi / 2.0, 3.0 * std::numbers::pi / 4.0,
                                       std::numbers::pi};
    for (const double phase : phases) {
        IntegratorConfig cfg;
        cfg.t_final = phase / omega;
        cfg.dense_samples = 2;
        const Trajectory traj = integrate(spec, ps, cfg);
        const double expected = std::sin(phase) * std::sin(phase);
        CHECK(traj.final_state.population(2) == doctest::Approx(expected).epsilon(1e-6));
        CHECK(std::abs(traj.final_state.population(2) - expected) <= 1e-6);
    }
}

TEST_CASE("single embedded step matches the exponential to high order") {
    const double lambda = -0.5;
    auto f = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy[0] = lambda * y[0];
    };
    IntegratorConfig cfg;
    const std::vector<double> y0{1.0};

    const double h = 0.1;
    const auto r = embedded_rk_step(f, 0.0, h, y0, cfg);
    CHECK(std::abs(r.y_new[0] - std::exp(lambda * h)) <= 1e-10);
    CHECK(r.suggested_step > 0.0);

    // local error scales as h^6 for a 5th-order step: halving h shrinks the
    // defect by about 64
    const auto r2 = embedded_rk_step(f, 0.0, h / 2.0, y0, cfg);
    const double e1 = std::abs(r.y_new[0] - std::exp(lambda * h));
    const double e2 = std::abs(r2.y_new[0] - std::exp(lambda * h / 2.0));
    const double ratio = e1 / e2;
    CHECK(ratio > 30.0);
    CHECK(ratio < 130.0);
}

TEST_CASE("error estimate vanishes for a constant solution") {
    auto f = [](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy.assign(y.size(), 0.0);
    };
    IntegratorConfig cfg;
    const std::vector<double> y0{0.7, -0.3};
    const auto r = embedded_rk_step(f, 0.0, 0.5, y0, cfg);
    CHECK(r.error_norm == 0.0);
    CHECK(r.y_new[0] == 0.7);
    CHECK(r.y_new[1] == -0.3);
}

TEST_CASE("global convergence order of repeated fixed steps") {
    auto f = [](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy[0] = -y[0];
    };
    IntegratorConfig cfg;
    auto run = [&](int steps) {
        std::vector<double> y{1.0};
        const double h = 1.0 / steps;
        for (int i = 0; i < steps; ++i) y = embedded_rk_step(f, i * h, h, y, cfg).y_new;
        return std::abs(y[0] - std::exp(-1.0));
    };
    const double e8 = run(8);
    const double e16 = run(16);
    const double ratio = e8 / e16;  // ~2^5 for a 5th-order method
    CHECK(ratio > 20.0);
    CHECK(ratio < 50.0);
}

TEST_CASE("trace stays conserved for the bundled parameter tables") {
    for (const char* name : {"table1.cfg", "table2.cfg", "table3.cfg"}) {
        const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/" + name);
        const Problem prob = make_problem(cfg);
        const Trajectory traj = integrate(prob.system, cfg.pulses, prob.integrator);
        for (const auto& pops : traj.populations)
            CHECK(std::abs(row_sum(pops) - 1.0) <= 1e-6);
    }
}

TEST_CASE("tightening tolerances is self-consistent") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table3.cfg");
    Problem prob = make_problem(cfg);
    prob.integrator.rel_tol = 1e-7;
    prob.integrator.abs_tol = 1e-9;
    prob.integrator.dense_samples = 2;
    const Trajectory loose = integrate(prob.system, cfg.pulses, prob.integrator);
    prob.integrator.rel_tol = 1e-8;
    prob.integrator.abs_tol = 1e-10;
    const Trajectory tight = integrate(prob.system, cfg.pulses, prob.integrator);
    for (int i = 1; i <= 5; ++i)
        CHECK(std::abs(loose.final_state.population(i) - tight.final_state.population(i)) <
              1e-6);
}

TEST_CASE("integration is deterministic") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table3.cfg");
    const Problem prob = make_problem(cfg);
    const Trajectory a = integrate(prob.system, cfg.pulses, prob.integrator);
    const Trajectory b = integrate(prob.system, cfg.pulses, prob.integrator);
    CHECK(a.steps_accepted == b.steps_accepted);
    CHECK(a.steps_rejected == b.steps_rejected);
    CHECK(a.final_state.packed == b.final_state.packed);
    CHECK(a.final_state.quad == b.final_state.quad);
    CHECK(a.populations == b.populations);
}

TEST_CASE("sigmoid gate converges to the hard indicator as sharpness grows") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table3.cfg");
    Problem prob = make_problem(cfg);
    prob.integrator.dense_samples = 2;

    auto gated_quad = [&](double sharpness, bool hard) {
        IntegratorConfig ic = prob.integrator;
        ic.gate_sharpness = sharpness;
        ic.hard_gate = hard;
        const Trajectory t = integrate(prob.system, cfg.pulses, ic);
        return t.final_state.quad[0];
    };

    const double hard = gated_quad(50.0, true);
    // the sigmoid-vs-indicator defect falls off as 1/sharpness^2
    CHECK(std::abs(gated_quad(50.0, false) / hard - 1.0) < 1e-3);
    CHECK(std::abs(gated_quad(500.0, false) / hard - 1.0) < 1e-5);
    CHECK(std::abs(gated_quad(5000.0, false) / hard - 1.0) < 1e-7);
}

TEST_CASE("hard-gate trajectories keep a sound sample grid") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table1.cfg");
    Problem prob = make_problem(cfg);
    prob.integrator.hard_gate = true;
    prob.integrator.dense_samples = 101;
    const Trajectory traj = integrate(prob.system, cfg.pulses, prob.integrator);
    REQUIRE(traj.times.size() == 101);
    REQUIRE(traj.populations.size() == 101);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 45.0);
    for (const auto& pops : traj.populations)
        CHECK(std::abs(row_sum(pops) - 1.0) <= 1e-6);
}

TEST_CASE("step budget violations raise an integration error") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table3.cfg");
    Problem prob = make_problem(cfg);
    prob.integrator.max_steps = 10;
    try {
        (void)integrate(prob.system, cfg.pulses, prob.integrator);
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(e.t_last >= 0.0);
        CHECK(e.t_last < 45.0);
    }
}

TEST_CASE("explicit initial step is honored and still adaptive") {
    const SystemSpec spec = make_system(5);
    IntegratorConfig cfg;
    cfg.t_final = 5.0;
    cfg.dense_samples = 2;
    cfg.initial_step = 0.25;
    const Trajectory traj = integrate(spec, zero_drive(4), cfg, basis_state(5, 2));
    CHECK(traj.final_state.population(2) == doctest::Approx(std::exp(-5.0)).epsilon(1e-6));
}

TEST_CASE("integrator configuration validation") {
    IntegratorConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.rel_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = IntegratorConfig{};
    cfg.t_final = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = IntegratorConfig{};
    cfg.dense_samples = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("final density matrix of a bundled run stays positive") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table2.cfg");
    const Problem prob = make_problem(cfg);
    const Trajectory traj = integrate(prob.system, cfg.pulses, prob.integrator);
    const auto ev = testutil::hermitian_eigenvalues(traj.final_state.density_matrix());
    for (double e : ev) CHECK(e >= -1e-8);
    double sum = 0.0;
    for (double e : ev) sum += e;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}
