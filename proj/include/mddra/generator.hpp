#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/dbn.hpp"
#include "mddra/trip.hpp"

namespace mddra::gen {

// Unnormalized sampling weights per action label.
struct ActionDistribution {
    std::map<std::string, double> weights;

    bool operator==(const ActionDistribution&) const = default;
};

// Mean-reverting speed: v' = v + reversion * (target - v) + noise, clamped
// at 0, where target = limit_fraction * limit(current road action).
struct SpeedProcess {
    double limit_fraction = 0.8;
    double reversion = 0.25;
    double noise_mph = 1.5;

    bool operator==(const SpeedProcess&) const = default;
};

struct Segment {
    std::size_t start_frame = 0;
    std::map<std::string, ActionDistribution> actions;  // keyed by parameter name
    SpeedProcess speed;

    bool operator==(const Segment&) const = default;
};

enum class LabelMode { None, Derived };

struct ScenarioConfig {
    std::size_t frame_count = 1000;
    std::uint64_t seed = 1;
    double frame_rate_hz = 30.0;
    std::string trip_id = "synthetic";
    // Piecewise distributions; first segment starts at 0, starts strictly
    // increasing. Ignored when cpts is set.
    std::vector<Segment> segments;
    LabelMode label_mode = LabelMode::None;
    // Ground-truth mode: states from the transition chain, observations from
    // the emission tables, decoded back into frames. Labels become the state
    // tokens. Families must match the catalog's FrameDiscretizer.
    std::optional<dbn::CptSet> cpts;
};

// safe_cruise | escalating_distraction | urban_stop_go
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

TripRecord generate(const ScenarioConfig& config, const ParameterCatalog& catalog);

ScenarioConfig load_scenario(const std::string& json_text);
std::string save_scenario(const ScenarioConfig& config);

}  // namespace mddra::gen
