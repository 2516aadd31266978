#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/dbn.hpp"
#include "mddra/errors.hpp"
#include "mddra/generator.hpp"
#include "mddra/severity.hpp"
#include "mddra/trip_io.hpp"

using namespace mddra;
using gen::LabelMode;
using gen::ScenarioConfig;
using gen::Segment;

TEST_CASE("presets exist and carry their names") {
    CHECK(gen::preset_names() ==
          std::vector<std::string>{"safe_cruise", "escalating_distraction",
                                   "urban_stop_go"});
    for (const std::string& name : gen::preset_names()) {
        const ScenarioConfig cfg = gen::preset(name);
        CHECK(cfg.trip_id == name);
        CHECK(cfg.frame_count == 1000);
        CHECK_FALSE(cfg.segments.empty());
        CHECK(cfg.segments.front().start_frame == 0);
    }
    const ScenarioConfig esc = gen::preset("escalating_distraction");
    REQUIRE(esc.segments.size() == 10);
    for (std::size_t s = 0; s < 10; ++s)
        CHECK(esc.segments[s].start_frame == s * 100);
    CHECK_THROWS_AS(gen::preset("calm_chaos"), ValidationError);
}

TEST_CASE("generation is deterministic in the seed") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("urban_stop_go");
    cfg.frame_count = 400;
    cfg.seed = 77;

    const TripRecord a = gen::generate(cfg, cat);
    const TripRecord b = gen::generate(cfg, cat);
    CHECK(a == b);
    CHECK(io::serialize_trip(a) == io::serialize_trip(b));

    REQUIRE(a.frames.size() == 400);
    for (std::size_t t = 0; t < a.frames.size(); ++t)
        CHECK(a.frames[t].frame == static_cast<std::int64_t>(t));
    CHECK(a.metadata.trip_id == "urban_stop_go");
    REQUIRE(a.metadata.seed.has_value());
    CHECK(*a.metadata.seed == 77);

    cfg.seed = 78;
    const TripRecord c = gen::generate(cfg, cat);
    CHECK_FALSE(a == c);
}

TEST_CASE("derived labels equal the collapsed severity classes") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("escalating_distraction");
    cfg.frame_count = 600;
    cfg.seed = 5;
    cfg.label_mode = LabelMode::Derived;

    const TripRecord trip = gen::generate(cfg, cat);
    REQUIRE(trip.labels.size() == trip.frames.size());
    const auto assessments = assess_stream(trip, cat);
    for (std::size_t i = 0; i < trip.frames.size(); ++i)
        CHECK(trip.labels[i] ==
              to_string(collapse(assessments[i].band().distraction_class)));
}

TEST_CASE("the calm preset stays overwhelmingly safe") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("safe_cruise");
    cfg.label_mode = LabelMode::Derived;
    cfg.seed = 9;
    const TripRecord trip = gen::generate(cfg, cat);
    std::size_t safe = 0;
    for (const auto& label : trip.labels)
        if (label == "safe") ++safe;
    CHECK(static_cast<double>(safe) / static_cast<double>(trip.labels.size()) >= 0.95);
}

TEST_CASE("the escalating preset trends upward in severity") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("escalating_distraction");
    cfg.seed = 13;
    const TripRecord trip = gen::generate(cfg, cat);
    const auto assessments = assess_stream(trip, cat);

    std::vector<double> block_mean(10, 0.0);
    for (std::size_t i = 0; i < assessments.size(); ++i)
        block_mean[i / 100] += assessments[i].aggregate_score / 100.0;
    // Block noise allows small local dips; the ramp itself must be obvious.
    for (std::size_t b = 1; b < 10; ++b)
        CHECK(block_mean[b] > block_mean[b - 1] - 0.05);
    CHECK(block_mean.back() > block_mean.front() + 0.25);
}

TEST_CASE("sampled action frequencies follow the weights") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("urban_stop_go");
    cfg.frame_count = 100000;
    cfg.seed = 21;
    cfg.segments[0].actions["hand_state"].weights = {
        {"double_hand", 1.0}, {"single_hand", 2.0}, {"no_hands", 1.0}};

    const TripRecord trip = gen::generate(cfg, cat);
    std::map<std::string, double> freq;
    for (const auto& f : trip.frames) freq[f.action(Param::HandState)] += 1.0;
    for (auto& [label, count] : freq) count /= static_cast<double>(cfg.frame_count);
    CHECK(std::abs(freq["double_hand"] - 0.25) < 0.01);
    CHECK(std::abs(freq["single_hand"] - 0.50) < 0.01);
    CHECK(std::abs(freq["no_hands"] - 0.25) < 0.01);
}

TEST_CASE("speed process holds its target when noiseless") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("urban_stop_go");
    cfg.frame_count = 50;
    cfg.segments[0].speed = {0.5, 0.25, 0.0};
    const TripRecord trip = gen::generate(cfg, cat);
    // The road never leaves urban (limit 30), so the target is fixed.
    for (const auto& f : trip.frames) CHECK(f.speed_mph == 15.0);
}

TEST_CASE("speeds are non-negative and quantized to thousandths") {
    const ParameterCatalog cat = default_catalog();
    ScenarioConfig cfg = gen::preset("urban_stop_go");
    cfg.frame_count = 2000;
    cfg.seed = 33;
    cfg.segments[0].speed = {0.1, 0.05, 8.0};  // noisy enough to hit the floor
    const TripRecord trip = gen::generate(cfg, cat);
    bool floored = false;
    for (const auto& f : trip.frames) {
        CHECK(f.speed_mph >= 0.0);
        CHECK(f.speed_mph == std::round(f.speed_mph * 1000.0) / 1000.0);
        floored = floored || f.speed_mph == 0.0;
    }
    CHECK(floored);
}

TEST_CASE("scenario JSON round trips") {
    ScenarioConfig cfg = gen::preset("escalating_distraction");
    cfg.seed = 123;
    cfg.label_mode = LabelMode::Derived;
    const std::string text = gen::save_scenario(cfg);
    const ScenarioConfig back = gen::load_scenario(text);
    CHECK(gen::save_scenario(back) == text);

    // Defaults apply for omitted keys.
    const ScenarioConfig sparse = gen::load_scenario(R"({"frame_count": 5})");
    CHECK(sparse.frame_count == 5);
    CHECK(sparse.seed == 1);
    CHECK(sparse.label_mode == LabelMode::None);
    CHECK(sparse.segments.empty());

    CHECK_THROWS_AS(gen::load_scenario("{"), ValidationError);
    CHECK_THROWS_AS(gen::load_scenario(R"([1, 2])"), ValidationError);
    CHECK_THROWS_AS(gen::load_scenario(R"({"frames": 5})"), ValidationError);
    CHECK_THROWS_AS(gen::load_scenario(R"({"label_mode": "auto"})"), ValidationError);
    CHECK_THROWS_AS(gen::load_scenario(R"({"segments": [{"speed": {"mph": 3}}]})"),
                    ValidationError);
}

TEST_CASE("scenario validation rejects malformed configurations") {
    const ParameterCatalog cat = default_catalog();
    const ScenarioConfig base = gen::preset("urban_stop_go");

    ScenarioConfig cfg = base;
    cfg.frame_count = 0;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments.clear();
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].start_frame = 10;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments.push_back(cfg.segments[0]);  // duplicate start frame
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].actions.erase("weather");
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].actions["weather"].weights["hail"] = 1.0;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].actions["weather"].weights["dry"] = -0.5;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    for (auto& [label, w] : cfg.segments[0].actions["weather"].weights) w = 0.0;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].speed.reversion = 1.5;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);

    cfg = base;
    cfg.segments[0].speed.noise_mph = -1.0;
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);
}

TEST_CASE("ground-truth mode drives frames from a state chain") {
    const ParameterCatalog cat = default_catalog();
    const dbn::FrameDiscretizer disc(cat);

    dbn::CptSet cpts;
    cpts.states = dbn::three_state_names();
    cpts.families = disc.families();
    for (const auto& fam : cpts.families) {
        std::vector<std::vector<double>> rows;
        for (std::size_t s = 0; s < 3; ++s)
            rows.push_back(std::vector<double>(
                fam.cardinality, 1.0 / static_cast<double>(fam.cardinality)));
        cpts.emissions.push_back(std::move(rows));
    }
    cpts.transition = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
    cpts.initial = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    cpts.check();

    ScenarioConfig cfg;
    cfg.trip_id = "chained";
    cfg.frame_count = 200;
    cfg.seed = 55;
    cfg.cpts = cpts;

    const TripRecord trip = gen::generate(cfg, cat);
    REQUIRE(trip.frames.size() == 200);
    REQUIRE(trip.labels.size() == 200);
    for (const auto& label : trip.labels)
        CHECK((label == "safe" || label == "careless" || label == "dangerous"));
    CHECK(gen::generate(cfg, cat) == trip);

    // The round trip keeps the chain tables.
    const ScenarioConfig back = gen::load_scenario(gen::save_scenario(cfg));
    REQUIRE(back.cpts.has_value());
    CHECK(*back.cpts == cpts);

    cfg.cpts->families.pop_back();
    cfg.cpts->emissions.pop_back();
    CHECK_THROWS_AS(gen::generate(cfg, cat), ValidationError);
}
