#include <doctest.h>

#include "wastetwin/error.hpp"
#include "wastetwin/sortline.hpp"

using namespace wastetwin;
using namespace wastetwin::sorting;

namespace {

SortReport run(std::size_t objects, double threshold = 0.5, double pick_failure = 0.02, std::uint64_t seed = 5,
               double diagonal = 0.98) {
    StreamConfig s;
    s.objects = objects;
    s.pick_failure_prob = pick_failure;
    s.seed = seed;
    return run_sortline(s, ClassifierModel::uniform_confusion(diagonal, 0.995, 3), threshold, CellLayout::bench(),
                        kinematics::ArmModel::small_arm());
}

std::size_t accepted_wrong(const SortReport& r) {
    return r.accuracy_accepted ? r.accuracy_accepted->total - r.accuracy_accepted->correct : 0;
}

}  // namespace

TEST_CASE("bench layout is valid") {
    const auto layout = CellLayout::bench();
    CHECK_NOTHROW(layout.validate());
    CHECK_NOTHROW(layout.camera.validate());
}

TEST_CASE("accuracy of the shipped classifier") {
    const auto r = run(10000);
    REQUIRE(r.accuracy_all.has_value());
    CHECK(std::abs(r.accuracy_all->overall - 0.98) <= 0.01);
    REQUIRE(r.accuracy_accepted.has_value());
    CHECK(r.accuracy_accepted->overall >= r.accuracy_all->overall);
    CHECK(r.objects == 10000);
    CHECK(r.binned + r.skipped == r.objects);
    CHECK(r.throughput_per_hour > 0.0);
    // Every accepted object inside the camera patch is reachable.
    CHECK(r.skip_reasons.count("unreachable") == 0);
}

TEST_CASE("mass is conserved") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto r = run(2000, 0.6, 0.1, seed);
        CHECK(r.mass_in_mg == r.mass_binned_mg + r.mass_skipped_mg);
        std::int64_t bins = 0;
        for (auto m : r.bin_mass_mg) bins += m;
        CHECK(bins == r.mass_binned_mg);
        CHECK(r.biodegradable_mg <= r.bin_mass_mg[index(WasteClass::food_waste)]);
        CHECK(r.biodegradable_vs_g == doctest::Approx(r.biodegradable_mg / 1000.0 * 0.18));
    }
}

TEST_CASE("certain pick failure bins nothing") {
    const auto r = run(500, 0.5, 1.0);
    CHECK(r.binned == 0);
    CHECK(r.throughput_per_hour == 0.0);
    CHECK(r.mass_binned_mg == 0);
    const auto failed = r.skip_reasons.at("pick_failed");
    CHECK(failed == r.accepted);
    CHECK(r.reattempts == failed);
    CHECK(biodegradable_fragment(r).at("vs_loaded") == 0.0);
}

TEST_CASE("raising the threshold only filters") {
    std::size_t prev_wrong = accepted_wrong(run(3000, 0.0, 0.0, 9, 0.8));
    std::size_t prev_accepted = run(3000, 0.0, 0.0, 9, 0.8).accepted;
    for (double th : {0.2, 0.4, 0.5, 0.7, 0.9, 1.0}) {
        const auto r = run(3000, th, 0.0, 9, 0.8);
        CHECK(accepted_wrong(r) <= prev_wrong);
        CHECK(r.accepted <= prev_accepted);
        prev_wrong = accepted_wrong(r);
        prev_accepted = r.accepted;
    }
    CHECK(prev_accepted == 0);
}

TEST_CASE("deterministic for a seed") {
    const auto a = to_json(run(1000));
    const auto b = to_json(run(1000));
    CHECK(a.dump() == b.dump());
    CHECK(a.dump() != to_json(run(1000, 0.5, 0.02, 6)).dump());
    CHECK(a.contains("accuracy"));
    CHECK(a.contains("throughput_per_hour"));
    CHECK(a.contains("skipped"));
}

TEST_CASE("stream config") {
    StreamConfig s;
    s.class_mix = {0, 0, 0, 0};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    const auto j = stream_from_json(nlohmann::json{{"class_mix", {{"food_waste", 1.0}}}, {"objects", 10}});
    CHECK(j.class_mix[index(WasteClass::food_waste)] == 1.0);
    CHECK(j.class_mix[index(WasteClass::metal)] == 0.0);
    CHECK_THROWS_AS(stream_from_json(nlohmann::json{{"class_mix", {{"glass", 1.0}}}}), ConfigError);

    StreamConfig food;
    food.objects = 200;
    food.class_mix = {1, 0, 0, 0};
    const auto r = run_sortline(food, ClassifierModel::uniform_confusion(1.0, 1.0), 0.0, CellLayout::bench(),
                                kinematics::ArmModel::small_arm());
    CHECK(r.biodegradable_mg == r.mass_binned_mg);
    CHECK_THROWS_AS(run_sortline(food, ClassifierModel::uniform_confusion(1.0), 1.5, CellLayout::bench(),
                                 kinematics::ArmModel::small_arm()),
                    ConfigError);
}
