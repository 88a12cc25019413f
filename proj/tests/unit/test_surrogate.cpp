#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "wastetwin/error.hpp"
#include "wastetwin/surrogate.hpp"

using namespace wastetwin;
using namespace wastetwin::surrogate;

namespace {

std::vector<double> predictions(const RegressionModel& m, const Dataset& d) {
    std::vector<double> out;
    for (const auto& x : d.inputs) out.push_back(m.predict(x));
    return out;
}

// Three raw features with a quadratic response and noise.
Dataset noisy_quadratic(std::uint64_t seed, std::size_t n = 60) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> t(30, 42), r(40, 160), p(6.5, 7.5);
    std::normal_distribution<double> noise(0.0, 0.05);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = t(rng), b = r(rng), c = p(rng);
        d.add({a, b, c}, 1.0 + 0.3 * a - 0.004 * a * a + 0.002 * b + 0.5 * c + noise(rng));
    }
    return d;
}

}  // namespace

TEST_CASE("feature expansion") {
    CHECK(expanded_count(FeatureMap::linear, 3) == 3);
    CHECK(expanded_count(FeatureMap::quadratic_with_interactions, 3) == 9);
    const std::vector<double> x{2.0, 3.0};
    CHECK(expand(FeatureMap::quadratic_with_interactions, x) == std::vector<double>{2, 3, 4, 6, 9});
    CHECK(to_string(feature_map_from_string("linear")) == "linear");
    CHECK_THROWS_AS(feature_map_from_string("cubic"), ConfigError);
}

TEST_CASE("exact linear data") {
    Dataset d;
    for (double x : {0.0, 1.0, 2.0, 3.0}) d.add({x}, 2.0 * x + 1.0);
    const auto m = fit(d, FeatureMap::linear);
    CHECK(m.intercept() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.coefficients()[1] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(m.train_r2() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quadratic coefficients are recovered") {
    Dataset d;
    for (int i = 0; i < 12; ++i) {
        const double T = 10.0 + 2.5 * i;
        d.add({T}, 3.0 + 0.5 * T - 0.02 * T * T);
    }
    const auto m = fit(d, FeatureMap::quadratic_with_interactions);
    REQUIRE(m.coefficients().size() == 3);
    CHECK(std::abs(m.coefficients()[0] - 3.0) < 1e-6);
    CHECK(std::abs(m.coefficients()[1] - 0.5) < 1e-6);
    CHECK(std::abs(m.coefficients()[2] + 0.02) < 1e-6);
    // 3 + 10 - 8
    CHECK(std::abs(m.predict({20.0}) - 5.0) < 1e-6);
}

TEST_CASE("fit errors") {
    Dataset one;
    one.add({1.0, 2.0}, 3.0);
    CHECK_THROWS_AS(fit(one, FeatureMap::linear), FitError);

    Dataset collinear;
    for (double x : {0.0, 1.0, 2.0, 3.0, 4.0}) collinear.add({x, 2.0 * x}, x);
    try {
        fit(collinear, FeatureMap::linear);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(std::string(e.what()).find("collinear feature columns") != std::string::npos);
    }

    Dataset bad;
    for (double x : {0.0, 1.0, 2.0}) bad.add({x}, x);
    bad.targets[1] = std::nan("");
    CHECK_THROWS_AS(fit(bad, FeatureMap::linear), FitError);
}

TEST_CASE("predict") {
    const RegressionModel m(FeatureMap::linear, 1, {1.0, 2.0}, 1.0);
    CHECK(m.predict({5.0}) == 11.0);
    const RegressionModel zero(FeatureMap::quadratic_with_interactions, 2, {4.5, 0, 0, 0, 0, 0}, 0.0);
    CHECK(zero.predict({-3.0, 8.0}) == 4.5);
    CHECK_THROWS_AS(m.predict({1.0, 2.0}), InputError);
}

TEST_CASE("r2 score") {
    const std::vector<double> y{1, 2, 3, 4};
    CHECK(r2_score(y, y) == 1.0);
    const std::vector<double> mean(4, 2.5);
    CHECK(r2_score(y, mean) == 0.0);
    // residuals 0.01+0.01+0.04+0.01 = 0.07, total 5
    const std::vector<double> p{1.1, 1.9, 3.2, 3.9};
    CHECK(r2_score(y, p) == doctest::Approx(1.0 - 0.07 / 5.0).epsilon(1e-12));
    const std::vector<double> bad{4, 3, 2, 1};
    CHECK(r2_score(y, bad) < 0.0);

    const std::vector<double> flat{2, 2, 2};
    CHECK_THROWS_AS(r2_score(flat, flat), MetricError);
    CHECK_THROWS_AS(r2_score(std::vector<double>{1.0}, std::vector<double>{1.0}), MetricError);
    CHECK_THROWS_AS(r2_score(y, std::vector<double>{1, 2}), MetricError);
}

TEST_CASE("least squares beats perturbed coefficients") {
    const auto d = noisy_quadratic(3);
    const auto m = fit(d, FeatureMap::quadratic_with_interactions);
    const double best = r2_score(d.targets, predictions(m, d));
    CHECK(best == doctest::Approx(m.train_r2()).epsilon(1e-12));

    std::mt19937_64 rng(17);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        auto coef = m.coefficients();
        for (std::size_t i = 0; i < coef.size(); ++i) coef[i] += jitter(rng) * 1e-4 * (1.0 + std::abs(coef[i]));
        const RegressionModel other(m.feature_map(), 3, coef, 0.0);
        CHECK(r2_score(d.targets, predictions(other, d)) <= best + 1e-12);
    }
}

TEST_CASE("affine target invariance and row permutation") {
    const auto d = noisy_quadratic(5);
    const auto base = fit(d, FeatureMap::quadratic_with_interactions);

    Dataset scaled = d;
    for (auto& y : scaled.targets) y = -3.5 * y + 12.0;
    CHECK(fit(scaled, FeatureMap::quadratic_with_interactions).train_r2() ==
          doctest::Approx(base.train_r2()).epsilon(1e-9));

    std::vector<std::size_t> order(d.rows());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(9));
    Dataset shuffled;
    for (auto i : order) shuffled.add(d.inputs[i], d.targets[i]);
    const auto perm = fit(shuffled, FeatureMap::quadratic_with_interactions);
    for (std::size_t i = 0; i < base.coefficients().size(); ++i) {
        CHECK(perm.coefficients()[i] == doctest::Approx(base.coefficients()[i]).epsilon(1e-9));
    }
}

TEST_CASE("json round trip") {
    const auto m = fit(noisy_quadratic(8), FeatureMap::quadratic_with_interactions);
    const auto j = to_json(m);
    CHECK(j.at("feature_map") == "quadratic_with_interactions");
    const auto back = model_from_json(j);
    CHECK(back.coefficients() == m.coefficients());
    CHECK(back.train_r2() == m.train_r2());
    CHECK(back.raw_features() == 3);
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"feature_map", "linear"}}), InputError);
}

TEST_CASE("dataset from telemetry buckets") {
    using telemetry::Channel;
    std::vector<telemetry::TelemetryRecord> recs;
    for (int t = 0; t < 60; ++t) {
        recs.push_back({double(t), Channel::temperature, 30.0 + (t < 30 ? 0.0 : 2.0)});
        recs.push_back({double(t), Channel::pressure, 1.0 + (t < 30 ? 0.0 : 1.0)});
    }
    recs.push_back({61.0, Channel::temperature, 99.0});  // bucket with no target
    const std::array<Channel, 1> in{Channel::temperature};
    const auto d = dataset_from_telemetry(recs, in, Channel::pressure, 30.0);
    REQUIRE(d.rows() == 2);
    CHECK(d.inputs[0][0] == 30.0);
    CHECK(d.targets[1] == 2.0);
}
