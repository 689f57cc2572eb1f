#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "doctest.h"
#include "pulseopt/autodiff.hpp"
#include "pulseopt/io.hpp"
#include "pulseopt/loss.hpp"
#include "testutil.hpp"

using namespace pulseopt;

namespace {

Problem load_problem(const char* name) {
    return make_problem(load_config(std::string(CONFIG_DIR) + "/" + name));
}

std::vector<double> problem_params(const char* name) {
    return pack(load_config(std::string(CONFIG_DIR) + "/" + name).pulses);
}

}  // namespace

TEST_CASE("dual numbers differentiate elementary functions") {
    using D = Dual<2>;
    const double x = 0.8;
    const D xd = D::seeded(x, 0);

    CHECK(exp(xd).d[0] == doctest::Approx(std::exp(x)).epsilon(1e-15));
    CHECK(log(xd).d[0] == doctest::Approx(1.0 / x).epsilon(1e-15));
    CHECK(sqrt(xd).d[0] == doctest::Approx(0.5 / std::sqrt(x)).epsilon(1e-15));
    CHECK(sin(xd).d[0] == doctest::Approx(std::cos(x)).epsilon(1e-15));
    CHECK(cos(xd).d[0] == doctest::Approx(-std::sin(x)).epsilon(1e-15));
    const double th = std::tanh(x);
    CHECK(tanh(xd).d[0] == doctest::Approx(1.0 - th * th).epsilon(1e-15));

    const double s = 1.0 / (1.0 + std::exp(-x));
    CHECK(sigmoid(xd).d[0] == doctest::Approx(s * (1.0 - s)).epsilon(1e-14));
    CHECK(softplus(xd).d[0] == doctest::Approx(s).epsilon(1e-14));

    // composite chain: d/dx exp(sin(x^2)) = exp(sin(x^2)) cos(x^2) 2x
    const D comp = exp(sin(xd * xd));
    CHECK(comp.d[0] ==
          doctest::Approx(std::exp(std::sin(x * x)) * std::cos(x * x) * 2.0 * x)
              .epsilon(1e-14));

    // quotient rule and a second seed lane
    const D yd = D::seeded(2.5, 1);
    const D q = xd / yd;
    CHECK(q.v == doctest::Approx(x / 2.5).epsilon(1e-15));
    CHECK(q.d[0] == doctest::Approx(1.0 / 2.5).epsilon(1e-15));
    CHECK(q.d[1] == doctest::Approx(-x / (2.5 * 2.5)).epsilon(1e-15));

    const D prod = xd * yd + xd * xd;
    CHECK(prod.d[0] == doctest::Approx(2.5 + 2.0 * x).epsilon(1e-15));
    CHECK(prod.d[1] == doctest::Approx(x).epsilon(1e-15));

    const D neg = abs(D::seeded(-1.5, 0));
    CHECK(neg.v == 1.5);
    CHECK(neg.d[0] == -1.0);

    CHECK(value_of(xd) == x);
    CHECK(all_finite(xd));
    D bad = xd;
    bad.d[1] = std::numeric_limits<double>::infinity();
    CHECK(!all_finite(bad));
    CHECK((xd < 1.0));
    CHECK((xd > D(0.5)));
}

TEST_CASE("finite differences recover a quadratic gradient") {
    auto f = [](std::span<const double> xs) {
        double s = 0.0;
        for (double v : xs) s += v * v;
        return s;
    };
    const std::vector<double> p{3.0, -1.5, 0.25};

    const auto central = grad_fd_fn(f, std::span<const double>(p));
    CHECK(central.evaluations == 7);
    CHECK(central.method == GradMethod::finite_diff);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(central.gradient[i] - 2.0 * p[i]) <= 1e-9);

    const auto fwd =
        grad_fd_fn(f, std::span<const double>(p), 1e-4, FdScheme::forward);
    CHECK(fwd.evaluations == 4);
    for (int i = 0; i < 3; ++i) {
        const double h = 1e-4 * std::max(std::abs(p[i]), 1.0);
        CHECK(std::abs(fwd.gradient[i] - (2.0 * p[i] + h)) <= 1e-9);
    }
}

TEST_CASE("wide parameter vectors are differentiated in seed chunks") {
    auto f = [](auto xs) {
        using S = std::decay_t<decltype(xs[0])>;
        S s = 0.0;
        for (size_t i = 0; i < xs.size(); ++i)
            s += static_cast<double>(i + 1) * (xs[i] * xs[i]);
        return s;
    };
    std::vector<double> p(20);
    for (size_t i = 0; i < p.size(); ++i) p[i] = 0.1 * static_cast<double>(i) - 0.7;

    const auto rep = grad_dual_fn(f, std::span<const double>(p));
    CHECK(rep.evaluations == 2);
    REQUIRE(rep.gradient.size() == 20);
    for (size_t i = 0; i < p.size(); ++i)
        CHECK(rep.gradient[i] == static_cast<double>(i + 1) * (p[i] + p[i]));
    CHECK(rep.loss_value == doctest::Approx(f(std::span<const double>(p))).epsilon(1e-15));
}

TEST_CASE("parameters of a silent channel have exactly zero gradient") {
    ProblemConfig cfg = default_config(5);
    Problem prob = make_problem(cfg);
    prob.loss.w_barrier = 0.0;
    REQUIRE(prob.loss.ordering.empty());

    std::vector<double> p{20.0, 3.0, 5.0, 0.5,   //
                          22.0, 3.0, 0.0, -0.3,  // amplitude zero: channel is off
                          25.0, 3.0, 4.0, 1.0,   //
                          28.0, 3.0, 6.0, -1.0};
    const auto rep = grad_dual(prob, std::span<const double>(p));
    CHECK(rep.evaluations == 1);
    CHECK(rep.gradient[4] == 0.0);   // center of the silent channel
    CHECK(rep.gradient[5] == 0.0);   // width
    CHECK(rep.gradient[7] == 0.0);   // detuning
    // the live channels keep nonzero sensitivities
    CHECK(std::abs(rep.gradient[0]) > 0.0);
    CHECK(std::abs(rep.gradient[2]) > 0.0);
}

TEST_CASE("barrier-only gradient matches the closed form") {
    Problem prob;
    prob.system = make_system(2);
    prob.integrator.t_final = 45.0;
    prob.loss.horizon = 45.0;
    prob.loss.w_init = 0.0;
    prob.loss.w_mid = 0.0;
    prob.loss.w_final = 0.0;
    prob.loss.w_barrier = 2.5;
    prob.bounds = default_bounds(1);

    const double k = prob.loss.k_barrier;
    const std::vector<double> x{10.0, 4.5, 0.5, 5.1};  // outside on every coordinate
    const auto rep = grad_dual(prob, std::span<const double>(x));
    for (int i = 0; i < 4; ++i) {
        const double expected =
            2.5 * (sigmoid(k * (x[i] - prob.bounds.upper[i])) -
                   sigmoid(k * (prob.bounds.lower[i] - x[i])));
        CHECK(std::abs(rep.gradient[i] - expected) <= 1e-12);
    }

    // finite differences agree on the smooth barrier, and fixed result slots
    // make the batched evaluation independent of the worker count
    const auto fd = grad_fd(prob, std::span<const double>(x));
    CHECK(fd.evaluations == 9);
    CHECK(gradient_disagreement(std::span<const double>(rep.gradient),
                                std::span<const double>(fd.gradient)) < 1e-6);
    const auto fd2 = grad_fd(prob, std::span<const double>(x));
    CHECK(fd2.gradient == fd.gradient);
    auto obj = [&prob](std::span<const double> q) {
        return problem_loss<double>(prob, q);
    };
    const auto fd1 = grad_fd_fn(obj, std::span<const double>(x), 1e-4, FdScheme::central, 1);
    CHECK(fd1.gradient == fd.gradient);
}

TEST_CASE("gradient is symmetric under the mirror of a three-level chain") {
    Problem prob;
    prob.system = make_system(3);
    prob.integrator.t_final = 45.0;
    prob.integrator.rel_tol = 1e-10;
    prob.integrator.abs_tol = 1e-12;
    prob.loss.horizon = 45.0;
    prob.loss.w_init = 0.0;
    prob.loss.w_final = 0.0;
    prob.bounds = default_bounds(2);

    CxMatrix<double> rho(3);
    rho(0, 0) = 0.5;
    rho(2, 2) = 0.5;
    prob.initial_state = state_from_matrix(rho);

    // equal channel parameters: swapping the channels relabels the levels
    // end-to-end, which leaves the middle population invariant
    const std::vector<double> p{22.0, 3.0, 4.0, 0.7, 22.0, 3.0, 4.0, 0.7};
    const auto rep = grad_dual(prob, std::span<const double>(p));
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(rep.gradient[i] - rep.gradient[i + 4]) <= 1e-8);
    CHECK(std::abs(rep.gradient[2]) > 1e-4);  // amplitude sensitivity is real
}

TEST_CASE("dual and central-difference gradients agree on the bundled tables") {
    const double h = 1e-4;
    const struct {
        const char* name;
        double expected;
    } cases[] = {
        {"table1.cfg", 7.611e-6},
        {"table2.cfg", 2.324e-5},
        {"table3.cfg", 7.820e-5},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const Problem prob = load_problem(c.name);
        const std::vector<double> p = problem_params(c.name);
        const auto dual = grad_dual(prob, std::span<const double>(p));
        const auto fd = grad_fd(prob, std::span<const double>(p), h);
        CHECK(dual.evaluations == 1);
        CHECK(fd.evaluations == 33);
        CHECK(std::abs(dual.loss_value - fd.loss_value) <= 1e-12);
        const double d = gradient_disagreement(std::span<const double>(dual.gradient),
                                               std::span<const double>(fd.gradient));
        CHECK(d < 1e-4);
        CHECK(std::abs(d / c.expected - 1.0) < 0.02);
    }
}

TEST_CASE("difference step sweep brackets the dual gradient") {
    const Problem prob = load_problem("table3.cfg");
    const std::vector<double> p = problem_params("table3.cfg");
    const auto dual = grad_dual(prob, std::span<const double>(p));
    const auto span_d = std::span<const double>(dual.gradient);

    auto disagreement_at = [&](double h, FdScheme scheme) {
        const auto fd = grad_fd(prob, std::span<const double>(p), h, scheme);
        return gradient_disagreement(span_d, std::span<const double>(fd.gradient));
    };

    const double d3 = disagreement_at(1e-3, FdScheme::central);
    const double d4 = disagreement_at(1e-4, FdScheme::central);
    const double d6 = disagreement_at(1e-6, FdScheme::central);

    // truncation-dominated branch scales as h^2
    CHECK(d3 / d4 > 50.0);
    CHECK(d3 / d4 < 200.0);
    CHECK(std::abs(d3 / 7.823e-3 - 1.0) < 0.02);
    // shrinking h drives the disagreement far below its h = 1e-4 value,
    // so the residual there is finite-difference truncation, not the dual pass
    CHECK(d6 < 1e-6);
    CHECK(d6 < d4 / 10.0);

    const double df = disagreement_at(1e-4, FdScheme::forward);
    CHECK(df > d4);
    CHECK(std::abs(df / 2.56e-2 - 1.0) < 0.05);
}

TEST_CASE("gradient disagreement measure") {
    const std::vector<double> a{1.0, 2.0};
    const std::vector<double> b{1.1, 2.0};
    CHECK(gradient_disagreement(std::span<const double>(a), std::span<const double>(b)) ==
          doctest::Approx(0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(gradient_disagreement(std::span<const double>(a), std::span<const double>(a)) == 0.0);

    const std::vector<double> z{0.0, 0.0};
    const std::vector<double> eps{1e-9, 0.0};
    CHECK(gradient_disagreement(std::span<const double>(z), std::span<const double>(eps)) ==
          doctest::Approx(0.1).epsilon(1e-12));
    CHECK(gradient_disagreement(std::span<const double>(z), std::span<const double>(eps),
                                1e-6) == doctest::Approx(1e-3).epsilon(1e-12));
}
