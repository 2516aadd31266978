#include "mddra/generator.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mddra/errors.hpp"
#include "mddra/rng.hpp"
#include "mddra/severity.hpp"

namespace mddra::gen {

namespace {

using nlohmann::json;

// Blend of a calm profile and a distracted profile; q in [0, 1].
std::map<std::string, ActionDistribution> blended_actions(double q) {
    const auto mix = [q](std::initializer_list<std::pair<const char*, std::pair<double, double>>>
                             entries) {
        ActionDistribution d;
        for (const auto& [label, w] : entries)
            d.weights[label] = (1.0 - q) * w.first + q * w.second;
        return d;
    };
    return {
        {"hand_state", mix({{"double_hand", {0.90, 0.05}},
                            {"single_hand", {0.10, 0.30}},
                            {"no_hands", {0.00, 0.65}}})},
        {"road_type", mix({{"urban", {1.00, 0.05}},
                           {"dual", {0.00, 0.15}},
                           {"highway", {0.00, 0.80}}})},
        {"face_orientation", mix({{"on_road", {0.95, 0.20}}, {"off_road", {0.05, 0.80}}})},
        {"illumination", mix({{"day", {1.00, 0.10}}, {"night", {0.00, 0.90}}})},
        {"eye_gaze", mix({{"eyes_on_road", {0.90, 0.10}},
                          {"eyes_off_road", {0.10, 0.45}},
                          {"eyes_shut", {0.00, 0.45}}})},
        {"weather", mix({{"dry", {1.00, 0.10}},
                         {"rain", {0.00, 0.30}},
                         {"snow", {0.00, 0.60}}})},
        {"manoeuvre", mix({{"stopped", {0.05, 0.00}},
                           {"turning", {0.15, 0.10}},
                           {"moving", {0.80, 0.90}}})},
        {"surroundings", mix({{"vehicle_not_present", {0.70, 0.10}},
                              {"vehicle_present", {0.30, 0.90}}})},
        {"pedestrians", mix({{"not_present", {0.90, 0.30}}, {"present", {0.10, 0.70}}})},
    };
}

ScenarioConfig safe_cruise_preset() {
    ScenarioConfig cfg;
    cfg.trip_id = "safe_cruise";
    cfg.frame_count = 1000;
    cfg.seed = 1;
    Segment seg;
    seg.start_frame = 0;
    seg.actions = blended_actions(0.0);
    seg.speed = {0.8, 0.25, 1.5};
    cfg.segments.push_back(std::move(seg));
    return cfg;
}

ScenarioConfig escalating_preset() {
    ScenarioConfig cfg;
    cfg.trip_id = "escalating_distraction";
    cfg.frame_count = 1000;
    cfg.seed = 1;
    // Ten blocks ramping the distracted-profile share; expected severity
    // climbs roughly 0.3 -> 0.85 with steps well above block noise.
    constexpr std::size_t kSteps = 10;
    for (std::size_t s = 0; s < kSteps; ++s) {
        Segment seg;
        seg.start_frame = s * (cfg.frame_count / kSteps);
        const double q = static_cast<double>(s) / static_cast<double>(kSteps - 1);
        seg.actions = blended_actions(q);
        seg.speed = {0.8 + 0.4 * q, 0.25, 1.5 + 1.5 * q};
        cfg.segments.push_back(std::move(seg));
    }
    return cfg;
}

ScenarioConfig urban_stop_go_preset() {
    ScenarioConfig cfg;
    cfg.trip_id = "urban_stop_go";
    cfg.frame_count = 1000;
    cfg.seed = 1;
    Segment seg;
    seg.start_frame = 0;
    seg.actions = {
        {"hand_state", {{{"double_hand", 0.80}, {"single_hand", 0.20}}}},
        {"road_type", {{{"urban", 1.0}}}},
        {"face_orientation", {{{"on_road", 0.90}, {"off_road", 0.10}}}},
        {"illumination", {{{"day", 1.0}}}},
        {"eye_gaze", {{{"eyes_on_road", 0.85}, {"eyes_off_road", 0.15}}}},
        {"weather", {{{"dry", 0.9}, {"rain", 0.1}}}},
        {"manoeuvre", {{{"stopped", 0.35}, {"turning", 0.20}, {"moving", 0.45}}}},
        {"surroundings", {{{"vehicle_not_present", 0.40}, {"vehicle_present", 0.60}}}},
        {"pedestrians", {{{"not_present", 0.55}, {"present", 0.45}}}},
    };
    seg.speed = {0.55, 0.35, 3.0};
    cfg.segments.push_back(std::move(seg));
    return cfg;
}

void check_scenario(const ScenarioConfig& cfg, const ParameterCatalog& catalog) {
    if (cfg.frame_count == 0) throw ValidationError("frame_count must be >= 1");
    if (cfg.cpts) return;  // segments unused in ground-truth mode
    if (cfg.segments.empty()) throw ValidationError("scenario needs at least one segment");
    if (cfg.segments.front().start_frame != 0)
        throw ValidationError("first segment must start at frame 0");
    for (std::size_t s = 1; s < cfg.segments.size(); ++s)
        if (cfg.segments[s].start_frame <= cfg.segments[s - 1].start_frame)
            throw ValidationError("segment start frames must be strictly increasing");
    for (const auto& seg : cfg.segments) {
        for (const auto& p : catalog.parameters) {
            auto it = seg.actions.find(p.name);
            if (it == seg.actions.end())
                throw ValidationError("segment lacks a distribution for parameter '" +
                                      p.name + "'");
            double total = 0.0;
            for (const auto& [label, w] : it->second.weights) {
                if (!p.has_action(label))
                    throw ValidationError("distribution for '" + p.name +
                                          "' names unknown action '" + label + "'");
                if (w < 0.0 || !std::isfinite(w))
                    throw ValidationError("distribution weight for '" + p.name +
                                          "' must be finite and >= 0");
                total += w;
            }
            if (total <= 0.0)
                throw ValidationError("distribution for '" + p.name +
                                      "' has no positive weight");
        }
        if (!(seg.speed.limit_fraction >= 0.0) || !(seg.speed.noise_mph >= 0.0) ||
            !(seg.speed.reversion >= 0.0 && seg.speed.reversion <= 1.0))
            throw ValidationError("speed process parameters out of range");
    }
}

TripRecord generate_from_chain(const ScenarioConfig& cfg, const ParameterCatalog& catalog) {
    const dbn::FrameDiscretizer disc(catalog);
    const dbn::CptSet& cpts = *cfg.cpts;
    if (cpts.families != disc.families())
        throw ValidationError(
            "CPT families do not match the catalog's observation families");

    Xoshiro256 rng(cfg.seed);
    dbn::LabeledSequence seq = dbn::sample_sequence(cpts, cfg.frame_count, rng);

    TripRecord trip;
    trip.metadata.trip_id = cfg.trip_id;
    trip.metadata.frame_rate_hz = cfg.frame_rate_hz;
    trip.metadata.seed = cfg.seed;
    trip.frames.reserve(cfg.frame_count);
    trip.labels.reserve(cfg.frame_count);
    for (std::size_t t = 0; t < cfg.frame_count; ++t) {
        trip.frames.push_back(
            disc.decode(seq.observations[t], static_cast<std::int64_t>(t), rng));
        trip.labels.push_back(cpts.states[seq.states[t]]);
    }
    trip.validate(catalog);
    return trip;
}

}  // namespace

ScenarioConfig preset(const std::string& name) {
    if (name == "safe_cruise") return safe_cruise_preset();
    if (name == "escalating_distraction") return escalating_preset();
    if (name == "urban_stop_go") return urban_stop_go_preset();
    throw ValidationError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"safe_cruise", "escalating_distraction", "urban_stop_go"};
}

TripRecord generate(const ScenarioConfig& config, const ParameterCatalog& catalog) {
    check_scenario(config, catalog);
    if (config.cpts) return generate_from_chain(config, catalog);

    Xoshiro256 rng(config.seed);

    // Per-segment sampling tables in catalog action order.
    struct SegmentTables {
        std::size_t start = 0;
        std::array<std::vector<double>, kParameterCount> weights;
        SpeedProcess speed;
    };
    std::vector<SegmentTables> tables;
    for (const auto& seg : config.segments) {
        SegmentTables t;
        t.start = seg.start_frame;
        t.speed = seg.speed;
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            const ParameterSpec& spec = catalog.parameter(kParameterNames[p]);
            t.weights[p].resize(spec.actions.size(), 0.0);
            const auto& dist = seg.actions.at(spec.name);
            for (const auto& [label, w] : dist.weights)
                t.weights[p][spec.action_index(label)] = w;
        }
        tables.push_back(std::move(t));
    }

    TripRecord trip;
    trip.metadata.trip_id = config.trip_id;
    trip.metadata.frame_rate_hz = config.frame_rate_hz;
    trip.metadata.seed = config.seed;
    trip.frames.reserve(config.frame_count);

    std::size_t seg_at = 0;
    double speed = -1.0;  // initialized from the first frame's target
    for (std::size_t t = 0; t < config.frame_count; ++t) {
        while (seg_at + 1 < tables.size() && t >= tables[seg_at + 1].start) ++seg_at;
        const SegmentTables& tab = tables[seg_at];

        FrameObservation f;
        f.frame = static_cast<std::int64_t>(t);
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            const ParameterSpec& spec = catalog.parameter(kParameterNames[p]);
            f.actions[p] = spec.actions[rng.categorical(tab.weights[p])].label;
        }
        const double limit = catalog.speed_limit_for(f.action(Param::RoadType));
        const double target = tab.speed.limit_fraction * limit;
        if (speed < 0.0) speed = target;
        speed += tab.speed.reversion * (target - speed) +
                 tab.speed.noise_mph * rng.normal();
        speed = std::max(0.0, speed);
        // Quantized for tidy CSVs; scoring tolerances do not care.
        f.speed_mph = std::round(speed * 1000.0) / 1000.0;
        trip.frames.push_back(std::move(f));
    }

    if (config.label_mode == LabelMode::Derived) {
        const auto assessments = assess_stream(trip, catalog);
        trip.labels.reserve(assessments.size());
        for (const auto& a : assessments)
            trip.labels.push_back(to_string(collapse(a.band().distraction_class)));
    }
    trip.validate(catalog);
    return trip;
}

ScenarioConfig load_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed scenario document: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("scenario document must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& k = it.key();
        if (k != "frame_count" && k != "seed" && k != "frame_rate_hz" && k != "trip_id" &&
            k != "segments" && k != "label_mode" && k != "cpts")
            throw ValidationError("unknown key '" + k + "' in scenario document");
    }
    try {
        ScenarioConfig cfg;
        cfg.segments.clear();
        if (doc.contains("frame_count")) cfg.frame_count = doc["frame_count"].get<std::size_t>();
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("frame_rate_hz")) cfg.frame_rate_hz = doc["frame_rate_hz"].get<double>();
        if (doc.contains("trip_id")) cfg.trip_id = doc["trip_id"].get<std::string>();
        if (doc.contains("label_mode")) {
            const std::string m = doc["label_mode"].get<std::string>();
            if (m == "none")
                cfg.label_mode = LabelMode::None;
            else if (m == "derived")
                cfg.label_mode = LabelMode::Derived;
            else
                throw ValidationError("label_mode must be 'none' or 'derived'");
        }
        if (doc.contains("segments")) {
            for (const auto& s : doc["segments"]) {
                for (auto it = s.begin(); it != s.end(); ++it)
                    if (it.key() != "start_frame" && it.key() != "actions" && it.key() != "speed")
                        throw ValidationError("unknown key '" + it.key() + "' in segment");
                Segment seg;
                seg.start_frame = s.value("start_frame", std::size_t{0});
                if (s.contains("actions"))
                    for (auto it = s["actions"].begin(); it != s["actions"].end(); ++it) {
                        ActionDistribution dist;
                        for (auto w = it.value().begin(); w != it.value().end(); ++w)
                            dist.weights[w.key()] = w.value().get<double>();
                        seg.actions[it.key()] = std::move(dist);
                    }
                if (s.contains("speed")) {
                    const auto& sp = s["speed"];
                    for (auto it = sp.begin(); it != sp.end(); ++it)
                        if (it.key() != "limit_fraction" && it.key() != "reversion" &&
                            it.key() != "noise_mph")
                            throw ValidationError("unknown key '" + it.key() +
                                                  "' in speed process");
                    seg.speed.limit_fraction = sp.value("limit_fraction", 0.8);
                    seg.speed.reversion = sp.value("reversion", 0.25);
                    seg.speed.noise_mph = sp.value("noise_mph", 1.5);
                }
                cfg.segments.push_back(std::move(seg));
            }
        }
        if (doc.contains("cpts")) cfg.cpts = dbn::load_cpts(doc["cpts"].dump());
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid scenario document: ") + e.what());
    }
}

std::string save_scenario(const ScenarioConfig& config) {
    json doc;
    doc["frame_count"] = config.frame_count;
    doc["seed"] = config.seed;
    doc["frame_rate_hz"] = config.frame_rate_hz;
    doc["trip_id"] = config.trip_id;
    doc["label_mode"] = config.label_mode == LabelMode::Derived ? "derived" : "none";
    doc["segments"] = json::array();
    for (const auto& seg : config.segments) {
        json actions = json::object();
        for (const auto& [param, dist] : seg.actions) {
            json weights = json::object();
            for (const auto& [label, w] : dist.weights) weights[label] = w;
            actions[param] = weights;
        }
        doc["segments"].push_back({{"start_frame", seg.start_frame},
                                   {"actions", actions},
                                   {"speed",
                                    {{"limit_fraction", seg.speed.limit_fraction},
                                     {"reversion", seg.speed.reversion},
                                     {"noise_mph", seg.speed.noise_mph}}}});
    }
    if (config.cpts) doc["cpts"] = json::parse(dbn::save_cpts(*config.cpts));
    return doc.dump(2) + "\n";
}

}  // namespace mddra::gen
