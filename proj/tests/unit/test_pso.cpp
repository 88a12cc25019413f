#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wastetwin/error.hpp"
#include "wastetwin/pso.hpp"

using namespace wastetwin;
using namespace wastetwin::pso;

namespace {

double sphere(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

double rosenbrock(std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
}

PsoConfig box(std::size_t dim, double lo, double hi, std::uint64_t seed = 0) {
    PsoConfig c;
    c.bounds.assign(dim, Interval{lo, hi});
    c.seed = seed;
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("config validation") {
    auto c = box(2, 0, 1);
    CHECK_NOTHROW(c.validate());
    c.swarm_size = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = box(2, 0, 1);
    c.bounds[1] = {1.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = box(2, 0, 1);
    c.inertia_weight = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = box(2, 0, 1);
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("init is seeded and stays inside the box") {
    auto c = box(2, 0, 1, 7);
    c.swarm_size = 50;
    const auto a = Swarm::init(c, sphere);
    const auto b = Swarm::init(c, sphere);
    REQUIRE(a.particles().size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a.particles()[i].position == b.particles()[i].position);
        CHECK(a.particles()[i].velocity == b.particles()[i].velocity);
        for (double x : a.particles()[i].position) CHECK((x >= 0.0 && x <= 1.0));
        for (double v : a.particles()[i].velocity) CHECK(std::abs(v) <= 0.5);
    }
}

TEST_CASE("init errors") {
    auto c = box(2, -1, 1);
    CHECK_THROWS_AS(Swarm::init(c, sphere, 3), ConfigError);

    // A NaN wherever the objective is evaluated names the point.
    try {
        Swarm::init(c, [](std::span<const double>) { return std::nan(""); });
        FAIL("expected EvaluationError");
    } catch (const EvaluationError& e) {
        CHECK(std::string(e.what()).find("point (") != std::string::npos);
    }
}

TEST_CASE("step on an uninitialized swarm") {
    Swarm s;
    CHECK_THROWS_AS(s.step(), StateError);
}

TEST_CASE("update rule degenerate cases") {
    SUBCASE("w = 1, c1 = c2 = 0, zero velocity keeps positions") {
        auto c = box(3, -5, 5, 3);
        c.inertia_weight = 1.0;
        c.cognitive_coeff = c.social_coeff = 0.0;
        // Velocities below one ulp of any position.
        c.velocity_clamp_fraction = 1e-300;
        auto s = Swarm::init(c, sphere);
        std::vector<std::vector<double>> before;
        for (const auto& p : s.particles()) before.push_back(p.position);
        s.step();
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(s.particles()[i].position == before[i]);
    }
    SUBCASE("c1 = c2 = 0 halves the velocity with w = 0.5") {
        auto c = box(2, -100, 100, 9);
        c.inertia_weight = 0.5;
        c.cognitive_coeff = c.social_coeff = 0.0;
        c.velocity_clamp_fraction = 0.01;
        auto s = Swarm::init(c, sphere);
        std::vector<std::vector<double>> vel;
        for (const auto& p : s.particles()) vel.push_back(p.velocity);
        s.step();
        for (std::size_t i = 0; i < vel.size(); ++i) {
            for (std::size_t d = 0; d < 2; ++d) {
                const double x = s.particles()[i].position[d];
                if (x == -100.0 || x == 100.0) continue;  // boundary zeroes v
                CHECK(s.particles()[i].velocity[d] == 0.5 * vel[i][d]);
            }
        }
    }
}

TEST_CASE("global best never gets worse") {
    auto s = Swarm::init(box(4, -3, 3, 11), rosenbrock);
    double prev = s.global_best_value();
    for (int i = 0; i < 50; ++i) {
        s.step();
        CHECK(s.global_best_value() <= prev);
        prev = s.global_best_value();
    }
}

TEST_CASE("sphere and rosenbrock") {
    auto c = box(3, -5, 5, 1);
    c.max_iterations = 300;
    const auto r = optimize(c, sphere);
    CHECK(r.best_value < 1e-6);

    std::vector<double> dist;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto rc = box(2, -2, 2, seed);
        rc.swarm_size = 40;
        rc.max_iterations = 500;
        const auto res = optimize(rc, rosenbrock);
        dist.push_back(std::hypot(res.best_position[0] - 1.0, res.best_position[1] - 1.0));
    }
    CHECK(median(dist) < 0.05);
}

TEST_CASE("determinism, feasibility and trace shape") {
    auto c = box(5, -2, 3, 42);
    double lo_seen = std::numeric_limits<double>::infinity();
    double hi_seen = -lo_seen;
    Objective f = [&](std::span<const double> x) {
        for (double v : x) {
            lo_seen = std::min(lo_seen, v);
            hi_seen = std::max(hi_seen, v);
        }
        return rosenbrock(x.subspan(0, 2)) + sphere(x.subspan(2));
    };
    const auto a = optimize(c, f);
    const auto b = optimize(c, f);
    CHECK(lo_seen >= -2.0);
    CHECK(hi_seen <= 3.0);
    CHECK(a.best_value == b.best_value);
    CHECK(a.best_position == b.best_position);
    REQUIRE(a.convergence_trace.size() == b.convergence_trace.size());
    for (std::size_t i = 0; i < a.convergence_trace.size(); ++i) {
        CHECK(a.convergence_trace[i].best_value == b.convergence_trace[i].best_value);
        if (i) CHECK(a.convergence_trace[i].best_value <= a.convergence_trace[i - 1].best_value);
    }
    CHECK(a.convergence_trace.front().iteration == 0);
    CHECK(a.iterations_run <= c.max_iterations);
    CHECK(a.convergence_trace.back().iteration == a.iterations_run);
}

TEST_CASE("termination modes") {
    auto c = box(2, -1, 1, 5);
    c.max_iterations = 3;
    CHECK(optimize(c, sphere).terminated_by == Termination::max_iterations);

    c.max_iterations = 1000;
    const auto flat = optimize(c, [](std::span<const double>) { return 1.0; });
    CHECK(flat.terminated_by == Termination::stall);
    CHECK(flat.iterations_run == c.stall_iterations);

    c.stop_at_tolerance = true;
    c.tolerance = 1e-3;
    const auto tol = optimize(c, sphere);
    CHECK(tol.terminated_by == Termination::tolerance);
    CHECK(tol.best_value <= 1e-3);
}

TEST_CASE("evaluation errors carry the iteration") {
    auto c = box(1, -1, 1, 2);
    int calls = 0;
    const auto size = static_cast<int>(c.swarm_size);
    try {
        optimize(c, [&](std::span<const double> x) {
            return ++calls > size ? std::numeric_limits<double>::infinity() : x[0];
        });
        FAIL("expected EvaluationError");
    } catch (const EvaluationError& e) {
        CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
}

TEST_CASE("trace csv") {
    std::ostringstream out;
    write_trace_csv(out, {{0, 2.5}, {1, 0.1}});
    CHECK(out.str() == "iteration,best_value\n0,2.5\n1,0.10000000000000001\n");
}

TEST_CASE("sphere 10D regression") {
    std::vector<double> best;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto c = box(10, -5, 5, seed);
        c.max_iterations = 300;
        best.push_back(optimize(c, sphere).best_value);
    }
    CHECK(median(best) < 1e-4);
}
