#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace mddra {

// The nine observed frame parameters, in CSV column order.
enum class Param : std::size_t {
    HandState = 0,
    RoadType,
    FaceOrientation,
    Illumination,
    EyeGaze,
    Weather,
    Manoeuvre,
    Surroundings,
    Pedestrians,
};

inline constexpr std::size_t kParameterCount = 9;

inline constexpr std::array<const char*, kParameterCount> kParameterNames = {
    "hand_state",    "road_type", "face_orientation", "illumination", "eye_gaze",
    "weather",       "manoeuvre", "surroundings",     "pedestrians",
};

constexpr std::size_t idx(Param p) { return static_cast<std::size_t>(p); }

// Four-way class attached to each severity band.
enum class DistractionClass { Safe, Careless, Dangerous, ExtremelyDangerous };

// Three-way collapse used for classifier labels and the default filter states:
// Safe bands 1-3, Careless band 4, Dangerous bands 5-7.
enum class SeverityClass { Safe = 0, Careless = 1, Dangerous = 2 };

const char* to_string(DistractionClass c);
const char* to_string(SeverityClass c);
DistractionClass distraction_class_from(const std::string& name);
SeverityClass severity_class_from(const std::string& name);
SeverityClass collapse(DistractionClass c);

struct ActionWeight {
    std::string label;
    int weight = 0;

    bool operator==(const ActionWeight&) const = default;
};

struct ParameterSpec {
    std::string name;
    std::vector<ActionWeight> actions;  // weights non-decreasing in listed order
    int max_weight = 1;

    int weight_of(const std::string& action) const;  // throws on unknown action
    bool has_action(const std::string& action) const;
    // Position of an action in the list; throws on unknown action.
    std::size_t action_index(const std::string& action) const;

    bool operator==(const ParameterSpec&) const = default;
};

enum class SpeedMode { SurroundingsMultiplier, IndependentTerm };

struct SeverityBand {
    double lower = 0.0;  // inclusive
    double upper = 0.0;  // exclusive, except the top band which closes at 1.0
    std::string color;
    std::string impact;
    DistractionClass distraction_class = DistractionClass::Safe;
    int rank = 1;  // 1..7, monotone in score
};

struct ParameterCatalog {
    std::vector<ParameterSpec> parameters;       // always the nine-parameter schema
    std::map<std::string, double> speed_limits;  // road-type action -> mph
    SpeedMode speed_mode = SpeedMode::SurroundingsMultiplier;
    int window = 5;
    // Likelihood level per band rank; overridable in code, not part of the
    // JSON schema.
    std::array<int, 7> likelihood_by_rank = {1, 2, 3, 4, 4, 4, 4};

    const ParameterSpec& parameter(const std::string& name) const;
    const ParameterSpec& parameter(Param p) const;
    double speed_limit_for(const std::string& road_action) const;

    bool operator==(const ParameterCatalog&) const = default;
};

ParameterCatalog default_catalog();

// The seven canonical severity bands over [0, 1].
const std::vector<SeverityBand>& severity_bands();

// Band containing a score; throws outside [0, 1] (NaN included).
const SeverityBand& band_for(double score);
const SeverityBand& band_by_rank(int rank);
int severity_rank(const SeverityBand& band);

// JSON config document. Absent fields fall back to the defaults above;
// entries in "parameters" override the same-named default parameter.
// Unknown keys are rejected.
ParameterCatalog load_catalog(const std::string& json_text);
ParameterCatalog load_catalog_file(const std::string& path);
std::string save_catalog(const ParameterCatalog& catalog);

}  // namespace mddra
