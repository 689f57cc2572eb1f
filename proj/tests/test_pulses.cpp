#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <span>

#include "doctest.h"
#include "pulseopt/io.hpp"
#include "pulseopt/pulses.hpp"

using namespace pulseopt;

TEST_CASE("envelope peak value equals the amplitude") {
    const PulseParams p{18.9032811, 3.227598027, 3.552287843, -0.208536178};
    CHECK(rabi_envelope(p, p.t0) == 3.552287843);
}

TEST_CASE("envelope at one width from the center") {
    const PulseParams p{10.0, 2.5, 7.0, 0.0};
    CHECK(rabi_envelope(p, p.t0 + p.sigma) ==
          doctest::Approx(7.0 * std::exp(-1.0)).epsilon(1e-15));
    CHECK(rabi_envelope(p, p.t0 - p.sigma) ==
          doctest::Approx(7.0 * std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("zero amplitude gives a zero envelope") {
    const PulseParams p{20.0, 3.0, 0.0, 1.0};
    CHECK(rabi_envelope(p, 0.0) == 0.0);
    CHECK(rabi_envelope(p, 20.0) == 0.0);
}

TEST_CASE("envelope is symmetric and decreasing away from the center") {
    const PulseParams p{22.5, 3.1, 4.2, 0.3};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 12.0);
    double prev = rabi_envelope(p, p.t0);
    for (int i = 1; i <= 40; ++i) {
        const double x = u(rng);
        CHECK(rabi_envelope(p, p.t0 + x) == doctest::Approx(rabi_envelope(p, p.t0 - x)).epsilon(1e-15));
    }
    for (int i = 1; i <= 40; ++i) {
        const double v = rabi_envelope(p, p.t0 + 0.3 * i);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
}

TEST_CASE("pack layout and round trip") {
    PulseSet ps;
    ps.channels.push_back({25.99837314, 3.622208677, 13.00608085, 3.571861571});
    ps.channels.push_back({22.90506102, 4.021947620, 22.96440215, 3.574703202});
    const std::vector<double> v = pack(ps);
    REQUIRE(v.size() == 8);
    CHECK(v[0] == 25.99837314);
    CHECK(v[1] == 3.622208677);
    CHECK(v[2] == 13.00608085);
    CHECK(v[3] == 3.571861571);
    CHECK(v[4] == 22.90506102);
    CHECK(unpack<double>(std::span<const double>(v)) == ps);

    const PulseSet empty;
    CHECK(pack(empty).empty());
}

TEST_CASE("unpack rejects a ragged parameter vector") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)unpack<double>(std::span<const double>(v)), ConfigError);
}

TEST_CASE("default bounds") {
    const BoundsSpec b = default_bounds(4);
    REQUIRE(b.size() == 16);
    for (int j = 0; j < 4; ++j) {
        CHECK(b.lower[4 * j + 0] == 15.0);
        CHECK(b.upper[4 * j + 0] == 35.0);
        CHECK(b.lower[4 * j + 1] == 2.0);
        CHECK(b.upper[4 * j + 1] == 4.0);
        CHECK(b.lower[4 * j + 2] == 1.0);
        CHECK(b.upper[4 * j + 2] == 35.0);
        CHECK(b.lower[4 * j + 3] == -5.0);
        CHECK(b.upper[4 * j + 3] == 5.0);
    }
    CHECK(default_bounds(1).size() == 4);
}

TEST_CASE("bundled best-run fixture lies inside the default box") {
    const ProblemConfig cfg = load_config(std::string(CONFIG_DIR) + "/table3.cfg");
    const std::vector<double> p = pack(cfg.pulses);
    CHECK(default_bounds(4).contains(std::span<const double>(p)));
}

TEST_CASE("bounds validation") {
    BoundsSpec b = default_bounds(1);
    CHECK_NOTHROW(b.validate());
    b.upper[2] = b.lower[2];
    CHECK_THROWS_AS(b.validate(), ConfigError);

    const BoundsSpec good = default_bounds(1);
    const std::vector<double> inside{20.0, 3.0, 10.0, 0.0};
    const std::vector<double> outside{20.0, 5.0, 10.0, 0.0};
    CHECK(good.contains(std::span<const double>(inside)));
    CHECK(!good.contains(std::span<const double>(outside)));
}

TEST_CASE("pulse validation names the offending channel and field") {
    PulseSet ps;
    ps.channels.push_back({20.0, -1.0, 5.0, 0.0});
    try {
        validate_pulses(ps);
        FAIL("expected a validation error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("pulses[0].sigma") != std::string::npos);
    }
}

TEST_CASE("parameter labels") {
    const auto labels = param_labels(2);
    REQUIRE(labels.size() == 8);
    CHECK(labels[0] == "t1");
    CHECK(labels[1] == "s1");
    CHECK(labels[2] == "o1");
    CHECK(labels[3] == "d1");
    CHECK(labels[4] == "t2");
    CHECK(labels[7] == "d2");
}
