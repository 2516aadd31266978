#include "mddra/catalog.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mddra/errors.hpp"

namespace mddra {

namespace {

using nlohmann::json;

ParameterCatalog build_default_catalog() {
    ParameterCatalog cat;
    cat.parameters = {
        {"hand_state",
         {{"double_hand", 0}, {"single_hand", 1}, {"no_hands", 2}},
         2},
        {"road_type", {{"urban", 1}, {"dual", 2}, {"highway", 3}}, 3},
        {"face_orientation", {{"on_road", 1}, {"off_road", 2}}, 2},
        {"illumination", {{"day", 1}, {"night", 2}}, 2},
        {"eye_gaze",
         {{"eyes_on_road", 0}, {"eyes_off_road", 1}, {"eyes_shut", 2}},
         2},
        {"weather", {{"dry", 1}, {"rain", 2}, {"snow", 3}}, 3},
        {"manoeuvre", {{"stopped", 0}, {"turning", 1}, {"moving", 2}}, 2},
        {"surroundings", {{"vehicle_not_present", 0}, {"vehicle_present", 1}}, 1},
        {"pedestrians", {{"not_present", 0}, {"present", 1}}, 1},
    };
    cat.speed_limits = {{"urban", 30.0}, {"dual", 60.0}, {"highway", 70.0}};
    cat.speed_mode = SpeedMode::SurroundingsMultiplier;
    cat.window = 5;
    return cat;
}

std::vector<SeverityBand> build_bands() {
    return {
        {0.00, 0.10, "light_green", "no_impact", DistractionClass::Safe, 1},
        {0.10, 0.25, "green", "slight_impact", DistractionClass::Safe, 2},
        {0.25, 0.40, "yellow", "low", DistractionClass::Safe, 3},
        {0.40, 0.60, "dark_yellow", "medium", DistractionClass::Careless, 4},
        {0.60, 0.80, "orange", "high", DistractionClass::Dangerous, 5},
        {0.80, 0.90, "dark_orange", "very_high", DistractionClass::Dangerous, 6},
        {0.90, 1.00, "red", "extreme", DistractionClass::ExtremelyDangerous, 7},
    };
}

void check_parameter(const ParameterSpec& p,
                     const std::map<std::string, double>& speed_limits) {
    if (p.actions.empty())
        throw ValidationError("parameter '" + p.name + "' has no actions");
    if (p.max_weight < 1)
        throw ValidationError("parameter '" + p.name + "' needs max_weight >= 1");
    std::set<std::string> labels;
    int top = 0;
    int prev = p.actions.front().weight;
    for (const auto& a : p.actions) {
        if (a.weight < 0)
            throw ValidationError("parameter '" + p.name + "' action '" + a.label +
                                  "' has a negative weight");
        if (a.weight < prev)
            throw ValidationError("parameter '" + p.name +
                                  "' action weights must be non-decreasing");
        prev = a.weight;
        top = std::max(top, a.weight);
        if (!labels.insert(a.label).second)
            throw ValidationError("parameter '" + p.name + "' repeats action '" +
                                  a.label + "'");
    }
    if (top != p.max_weight)
        throw ValidationError("parameter '" + p.name +
                              "' max_weight does not match its largest action weight");
    if (p.name == "road_type") {
        for (const auto& a : p.actions) {
            if (!speed_limits.count(a.label))
                throw ValidationError("road-type action '" + a.label +
                                      "' has no speed limit");
        }
    }
}

void check_catalog(const ParameterCatalog& cat) {
    if (cat.window < 1) throw ValidationError("window must be >= 1");
    std::set<std::string> names;
    for (const auto& p : cat.parameters) {
        if (!names.insert(p.name).second)
            throw ValidationError("duplicate parameter name '" + p.name + "'");
        check_parameter(p, cat.speed_limits);
    }
    for (const auto& [road, limit] : cat.speed_limits) {
        if (!(limit > 0.0) || !std::isfinite(limit))
            throw ValidationError("speed limit for '" + road + "' must be positive");
    }
}

void reject_unknown_keys(const json& object, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (auto it = object.begin(); it != object.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok)
            throw ValidationError("unknown key '" + it.key() + "' in " + where);
    }
}

ParameterSpec parse_parameter(const json& node) {
    reject_unknown_keys(node, {"name", "actions", "max_weight"}, "parameter entry");
    ParameterSpec spec;
    if (!node.contains("name") || !node["name"].is_string())
        throw ValidationError("parameter entry needs a string 'name'");
    spec.name = node["name"].get<std::string>();
    if (!node.contains("actions") || !node["actions"].is_array())
        throw ValidationError("parameter '" + spec.name + "' needs an 'actions' array");
    for (const auto& a : node["actions"]) {
        reject_unknown_keys(a, {"label", "weight"}, "action entry");
        if (!a.contains("label") || !a["label"].is_string() ||
            !a.contains("weight") || !a["weight"].is_number_integer())
            throw ValidationError("actions of '" + spec.name +
                                  "' need string labels and integer weights");
        spec.actions.push_back({a["label"].get<std::string>(), a["weight"].get<int>()});
    }
    if (!node.contains("max_weight") || !node["max_weight"].is_number_integer())
        throw ValidationError("parameter '" + spec.name + "' needs integer 'max_weight'");
    spec.max_weight = node["max_weight"].get<int>();
    return spec;
}

}  // namespace

const char* to_string(DistractionClass c) {
    switch (c) {
        case DistractionClass::Safe: return "safe";
        case DistractionClass::Careless: return "careless";
        case DistractionClass::Dangerous: return "dangerous";
        case DistractionClass::ExtremelyDangerous: return "extremely_dangerous";
    }
    return "?";
}

const char* to_string(SeverityClass c) {
    switch (c) {
        case SeverityClass::Safe: return "safe";
        case SeverityClass::Careless: return "careless";
        case SeverityClass::Dangerous: return "dangerous";
    }
    return "?";
}

DistractionClass distraction_class_from(const std::string& name) {
    if (name == "safe") return DistractionClass::Safe;
    if (name == "careless") return DistractionClass::Careless;
    if (name == "dangerous") return DistractionClass::Dangerous;
    if (name == "extremely_dangerous") return DistractionClass::ExtremelyDangerous;
    throw ValidationError("unknown distraction class '" + name + "'");
}

SeverityClass severity_class_from(const std::string& name) {
    if (name == "safe") return SeverityClass::Safe;
    if (name == "careless") return SeverityClass::Careless;
    if (name == "dangerous") return SeverityClass::Dangerous;
    throw ValidationError("unknown severity class '" + name + "'");
}

SeverityClass collapse(DistractionClass c) {
    switch (c) {
        case DistractionClass::Safe: return SeverityClass::Safe;
        case DistractionClass::Careless: return SeverityClass::Careless;
        default: return SeverityClass::Dangerous;
    }
}

int ParameterSpec::weight_of(const std::string& action) const {
    for (const auto& a : actions)
        if (a.label == action) return a.weight;
    throw ValidationError("unknown action '" + action + "' for parameter '" + name + "'");
}

bool ParameterSpec::has_action(const std::string& action) const {
    for (const auto& a : actions)
        if (a.label == action) return true;
    return false;
}

std::size_t ParameterSpec::action_index(const std::string& action) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i].label == action) return i;
    throw ValidationError("unknown action '" + action + "' for parameter '" + name + "'");
}

const ParameterSpec& ParameterCatalog::parameter(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p;
    throw ValidationError("unknown parameter '" + name + "'");
}

const ParameterSpec& ParameterCatalog::parameter(Param p) const {
    return parameter(kParameterNames[idx(p)]);
}

double ParameterCatalog::speed_limit_for(const std::string& road_action) const {
    auto it = speed_limits.find(road_action);
    if (it == speed_limits.end())
        throw ValidationError("no speed limit for road action '" + road_action + "'");
    return it->second;
}

ParameterCatalog default_catalog() {
    static const ParameterCatalog cat = build_default_catalog();
    return cat;
}

const std::vector<SeverityBand>& severity_bands() {
    static const std::vector<SeverityBand> bands = build_bands();
    return bands;
}

const SeverityBand& band_for(double score) {
    if (!(score >= 0.0 && score <= 1.0))
        throw ValidationError("severity score outside [0, 1]");
    const auto& bands = severity_bands();
    for (const auto& b : bands) {
        if (score >= b.lower && score < b.upper) return b;
    }
    return bands.back();  // score == 1.0; the top band closes at 1
}

const SeverityBand& band_by_rank(int rank) {
    const auto& bands = severity_bands();
    if (rank < 1 || rank > static_cast<int>(bands.size()))
        throw ValidationError("band rank outside 1..7");
    return bands[static_cast<std::size_t>(rank - 1)];
}

int severity_rank(const SeverityBand& band) { return band.rank; }

ParameterCatalog load_catalog(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed config document: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config document must be a JSON object");
    reject_unknown_keys(doc, {"parameters", "speed_limits", "speed_mode", "window"},
                        "config document");

    ParameterCatalog cat = default_catalog();

    if (doc.contains("speed_limits")) {
        if (!doc["speed_limits"].is_object())
            throw ValidationError("'speed_limits' must map road actions to mph");
        for (auto it = doc["speed_limits"].begin(); it != doc["speed_limits"].end(); ++it) {
            if (!it.value().is_number())
                throw ValidationError("speed limit for '" + it.key() + "' must be a number");
            cat.speed_limits[it.key()] = it.value().get<double>();
        }
    }

    if (doc.contains("parameters")) {
        if (!doc["parameters"].is_array())
            throw ValidationError("'parameters' must be an array");
        std::set<std::string> seen;
        for (const auto& node : doc["parameters"]) {
            ParameterSpec spec = parse_parameter(node);
            if (!seen.insert(spec.name).second)
                throw ValidationError("duplicate parameter name '" + spec.name + "'");
            bool replaced = false;
            for (auto& existing : cat.parameters) {
                if (existing.name == spec.name) {
                    existing = spec;
                    replaced = true;
                    break;
                }
            }
            if (!replaced)
                throw ValidationError("parameter '" + spec.name +
                                      "' is not part of the frame schema");
        }
    }

    if (doc.contains("speed_mode")) {
        const std::string mode = doc["speed_mode"].is_string()
                                     ? doc["speed_mode"].get<std::string>()
                                     : std::string();
        if (mode == "surroundings_multiplier")
            cat.speed_mode = SpeedMode::SurroundingsMultiplier;
        else if (mode == "independent_term")
            cat.speed_mode = SpeedMode::IndependentTerm;
        else
            throw ValidationError(
                "speed_mode must be 'surroundings_multiplier' or 'independent_term'");
    }

    if (doc.contains("window")) {
        if (!doc["window"].is_number_integer())
            throw ValidationError("'window' must be an integer");
        cat.window = doc["window"].get<int>();
    }

    check_catalog(cat);
    return cat;
}

ParameterCatalog load_catalog_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_catalog(buf.str());
}

std::string save_catalog(const ParameterCatalog& catalog) {
    json doc;
    doc["parameters"] = json::array();
    for (const auto& p : catalog.parameters) {
        json actions = json::array();
        for (const auto& a : p.actions)
            actions.push_back({{"label", a.label}, {"weight", a.weight}});
        doc["parameters"].push_back(
            {{"name", p.name}, {"actions", actions}, {"max_weight", p.max_weight}});
    }
    doc["speed_limits"] = json::object();
    for (const auto& [road, limit] : catalog.speed_limits)
        doc["speed_limits"][road] = limit;
    doc["speed_mode"] = catalog.speed_mode == SpeedMode::SurroundingsMultiplier
                            ? "surroundings_multiplier"
                            : "independent_term";
    doc["window"] = catalog.window;
    return doc.dump(2) + "\n";
}

}  // namespace mddra
