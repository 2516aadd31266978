#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/errors.hpp"
#include "mddra/rng.hpp"
#include "mddra/severity.hpp"
#include "mddra/trip.hpp"

using namespace mddra;

namespace {

// Lowest-weight action everywhere except the four parameters whose minimum
// weight is nonzero (road, face, illumination, weather).
FrameObservation baseline_frame(std::int64_t frame = 0) {
    FrameObservation f;
    f.frame = frame;
    f.action(Param::HandState) = "double_hand";
    f.action(Param::RoadType) = "urban";
    f.action(Param::FaceOrientation) = "on_road";
    f.action(Param::Illumination) = "day";
    f.action(Param::EyeGaze) = "eyes_on_road";
    f.action(Param::Weather) = "dry";
    f.action(Param::Manoeuvre) = "stopped";
    f.action(Param::Surroundings) = "vehicle_not_present";
    f.action(Param::Pedestrians) = "not_present";
    f.speed_mph = 0.0;
    return f;
}

FrameObservation worst_frame(std::int64_t frame = 0) {
    FrameObservation f;
    f.frame = frame;
    f.action(Param::HandState) = "no_hands";
    f.action(Param::RoadType) = "highway";
    f.action(Param::FaceOrientation) = "off_road";
    f.action(Param::Illumination) = "night";
    f.action(Param::EyeGaze) = "eyes_shut";
    f.action(Param::Weather) = "snow";
    f.action(Param::Manoeuvre) = "moving";
    f.action(Param::Surroundings) = "vehicle_present";
    f.action(Param::Pedestrians) = "present";
    f.speed_mph = 70.0;
    return f;
}

FrameObservation random_frame(const ParameterCatalog& cat, Xoshiro256& rng,
                              std::int64_t frame) {
    FrameObservation f;
    f.frame = frame;
    for (std::size_t p = 0; p < kParameterCount; ++p) {
        const auto& actions = cat.parameters[p].actions;
        f.actions[p] = actions[rng.below(actions.size())].label;
    }
    f.speed_mph = rng.uniform(0.0, 90.0);
    return f;
}

TripRecord trip_of(std::vector<FrameObservation> frames) {
    TripRecord trip;
    trip.metadata.trip_id = "t";
    trip.frames = std::move(frames);
    return trip;
}

}  // namespace

TEST_CASE("normalized term is weight over max weight") {
    const ParameterCatalog cat = default_catalog();
    CHECK(normalized_term(cat.parameter(Param::HandState), "double_hand") == 0.0);
    CHECK(normalized_term(cat.parameter(Param::HandState), "single_hand") == 0.5);
    CHECK(normalized_term(cat.parameter(Param::HandState), "no_hands") == 1.0);
    CHECK(normalized_term(cat.parameter(Param::RoadType), "urban") ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(normalized_term(cat.parameter(Param::HandState), "nope"),
                    ValidationError);
}

TEST_CASE("speed factor blends legal-speed ratio with road weight") {
    const ParameterCatalog cat = default_catalog();
    CHECK(speed_factor(70.0, "highway", cat) == 1.0);
    CHECK(speed_factor(140.0, "highway", cat) == 1.0);  // ratio capped at 1
    CHECK(speed_factor(35.0, "highway", cat) ==
          doctest::Approx(0.5).epsilon(1e-15));
    CHECK(speed_factor(30.0, "urban", cat) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(speed_factor(30.0, "dual", cat) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(speed_factor(0.0, "urban", cat) == 0.0);
    CHECK(speed_factor(0.0, "highway", cat) == 0.0);
    CHECK_THROWS_AS(speed_factor(-1.0, "urban", cat), ValidationError);
    CHECK_THROWS_AS(speed_factor(std::numeric_limits<double>::infinity(), "urban", cat),
                    ValidationError);
    CHECK_THROWS_AS(speed_factor(30.0, "gravel", cat), ValidationError);
}

TEST_CASE("frame severity worked examples") {
    const ParameterCatalog cat = default_catalog();

    // Baseline: only road (1/3), face (1/2), illumination (1/2), weather (1/3)
    // contribute.
    CHECK(frame_severity(baseline_frame(), cat) ==
          doctest::Approx(5.0 / 27.0).epsilon(1e-15));

    // Adding a surrounding vehicle at the urban limit multiplies the
    // surroundings term (1) by the speed factor (1/3).
    FrameObservation f = baseline_frame();
    f.action(Param::Surroundings) = "vehicle_present";
    f.speed_mph = 30.0;
    CHECK(frame_severity(f, cat) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));

    // Same frame when stationary: the surroundings term vanishes.
    f.speed_mph = 0.0;
    CHECK(frame_severity(f, cat) == doctest::Approx(5.0 / 27.0).epsilon(1e-15));

    CHECK(frame_severity(worst_frame(), cat) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("independent speed term mode divides by ten") {
    ParameterCatalog cat = default_catalog();
    cat.speed_mode = SpeedMode::IndependentTerm;
    FrameObservation f = baseline_frame();
    f.action(Param::Surroundings) = "vehicle_present";
    f.speed_mph = 30.0;
    // Terms 1/3 + 1/2 + 1/2 + 1/3 + 1 (surroundings) + 1/3 (speed), over 10.
    CHECK(frame_severity(f, cat) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(frame_severity(worst_frame(), cat) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("without a surrounding vehicle the multiplier mode ignores speed") {
    const ParameterCatalog cat = default_catalog();
    FrameObservation f = baseline_frame();
    f.action(Param::EyeGaze) = "eyes_shut";
    const double base = frame_severity(f, cat);
    for (double mph : {0.0, 10.0, 30.0, 55.5, 90.0}) {
        f.speed_mph = mph;
        CHECK(frame_severity(f, cat) == base);
    }
}

TEST_CASE("aggregate severity is the trailing mean") {
    const std::vector<double> history = {0.1, 0.2, 0.3, 0.4};
    CHECK(aggregate_severity(0.5, history) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(aggregate_severity(0.5, {}) == 0.5);
    CHECK(aggregate_severity(0.2, std::vector<double>{0.4}) ==
          doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("likelihood and risk cells") {
    const ParameterCatalog cat = default_catalog();
    CHECK(likelihood_of(0.05, cat) == 1);
    CHECK(likelihood_of(0.12, cat) == 2);
    CHECK(likelihood_of(0.3, cat) == 3);
    CHECK(likelihood_of(0.5, cat) == 4);
    CHECK(likelihood_of(0.7, cat) == 4);
    CHECK(likelihood_of(0.95, cat) == 4);

    CHECK(risk_cell(7, 4) == 28);
    CHECK(risk_cell(3, 3) == 9);
    CHECK(risk_cell(1, 1) == 1);
    CHECK_THROWS_AS(risk_cell(0, 1), ValidationError);
    CHECK_THROWS_AS(risk_cell(8, 1), ValidationError);
    CHECK_THROWS_AS(risk_cell(3, 0), ValidationError);
    CHECK_THROWS_AS(risk_cell(3, 5), ValidationError);
}

TEST_CASE("risk matrix rows multiply rank by likelihood levels") {
    const auto table = risk_matrix_table();
    CHECK(table[0] == std::array<int, 5>{7, 7, 14, 21, 28});
    CHECK(table[2] == std::array<int, 5>{5, 5, 10, 15, 20});
    CHECK(table[6] == std::array<int, 5>{1, 1, 2, 3, 4});
    for (int row = 0; row < 7; ++row) {
        const int rank = 7 - row;
        CHECK(table[static_cast<std::size_t>(row)][0] == rank);
        for (int level = 1; level <= 4; ++level)
            CHECK(table[static_cast<std::size_t>(row)][static_cast<std::size_t>(level)] ==
                  risk_cell(rank, level));
    }
}

TEST_CASE("assess_stream aggregates match a brute-force trailing mean") {
    const ParameterCatalog cat = default_catalog();
    Xoshiro256 rng(404);
    std::vector<FrameObservation> frames;
    for (int i = 0; i < 400; ++i) frames.push_back(random_frame(cat, rng, i));
    const TripRecord trip = trip_of(frames);

    for (int window : {1, 3, 5, 8}) {
        const auto rows = assess_stream(trip, cat, window);
        REQUIRE(rows.size() == frames.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].frame_score == frame_severity(frames[i], cat));
            const std::size_t start =
                i + 1 >= static_cast<std::size_t>(window)
                    ? i + 1 - static_cast<std::size_t>(window)
                    : 0;
            double sum = 0.0;
            for (std::size_t j = start; j <= i; ++j)
                sum += frame_severity(frames[j], cat);
            const double mean = sum / static_cast<double>(i - start + 1);
            CHECK(rows[i].aggregate_score == mean);  // same summation order, bit-equal
            CHECK(rows[i].rank == band_for(mean).rank);
            CHECK(rows[i].likelihood ==
                  cat.likelihood_by_rank[static_cast<std::size_t>(rows[i].rank - 1)]);
            CHECK(rows[i].risk_value == rows[i].rank * rows[i].likelihood);
        }
    }
}

TEST_CASE("takeover fires once per entry into the dangerous classes") {
    const ParameterCatalog cat = default_catalog();
    // Window 1 makes the aggregate equal the frame score, so the class
    // sequence is directly scripted: safe, dangerous, dangerous, careless,
    // dangerous.
    ParameterCatalog narrow = cat;
    narrow.window = 1;

    FrameObservation safe = baseline_frame();          // 5/27, band 2
    FrameObservation danger = worst_frame();           // 1.0, band 7
    FrameObservation milder = worst_frame();           // band 5
    milder.action(Param::EyeGaze) = "eyes_on_road";
    milder.action(Param::HandState) = "single_hand";
    milder.action(Param::Weather) = "dry";
    REQUIRE(band_for(frame_severity(milder, cat)).rank == 5);
    FrameObservation careless = baseline_frame();
    careless.action(Param::EyeGaze) = "eyes_shut";
    careless.action(Param::Manoeuvre) = "moving";
    careless.action(Param::FaceOrientation) = "off_road";
    REQUIRE(band_for(frame_severity(careless, cat)).rank == 4);

    std::vector<FrameObservation> frames = {safe, danger, milder, careless, danger};
    for (std::size_t i = 0; i < frames.size(); ++i)
        frames[i].frame = static_cast<std::int64_t>(i);
    const auto rows = assess_stream(trip_of(frames), narrow);
    REQUIRE(rows.size() == 5);
    CHECK_FALSE(rows[0].takeover);
    CHECK(rows[1].takeover);        // safe -> dangerous
    CHECK_FALSE(rows[2].takeover);  // stays dangerous (band 7 -> band 5)
    CHECK_FALSE(rows[3].takeover);  // leaves to careless
    CHECK(rows[4].takeover);        // re-enters dangerous

    // A trip that starts dangerous never flags frame 0.
    const auto first = assess_stream(trip_of({danger}), narrow);
    CHECK_FALSE(first[0].takeover);
}

TEST_CASE("assess_stream validates input") {
    const ParameterCatalog cat = default_catalog();
    TripRecord trip = trip_of({baseline_frame(0), baseline_frame(0)});
    CHECK_THROWS_AS(assess_stream(trip, cat), ValidationError);  // frames not increasing
    trip.frames[1].frame = 1;
    trip.frames[1].action(Param::Weather) = "hail";
    CHECK_THROWS_AS(assess_stream(trip, cat), ValidationError);
    trip.frames[1].action(Param::Weather) = "dry";
    CHECK_THROWS_AS(assess_stream(trip, cat, 0), ValidationError);
    CHECK_NOTHROW(assess_stream(trip, cat));
}

TEST_CASE("single-action escalation never lowers the frame score") {
    const ParameterCatalog cat = default_catalog();
    Xoshiro256 rng(777);
    for (int trial = 0; trial < 2000; ++trial) {
        FrameObservation f = random_frame(cat, rng, 0);
        const std::size_t p = rng.below(kParameterCount);
        const auto& actions = cat.parameters[p].actions;
        const std::size_t at = cat.parameters[p].action_index(f.actions[p]);
        if (at + 1 >= actions.size()) continue;
        FrameObservation g = f;
        g.actions[p] = actions[at + 1].label;
        CHECK(frame_severity(g, cat) >= frame_severity(f, cat));
    }
}
