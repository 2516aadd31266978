#include "mddra/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mddra/errors.hpp"

namespace mddra::dbn {

namespace {

using nlohmann::json;

void check_row(const std::vector<double>& row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError(what + " probability outside [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError(what + " row does not sum to 1");
}

std::vector<double> smoothed_row(const std::vector<double>& counts, double alpha) {
    const double total =
        std::accumulate(counts.begin(), counts.end(), 0.0) +
        alpha * static_cast<double>(counts.size());
    std::vector<double> row(counts.size());
    if (total <= 0.0) {
        // State never observed and no smoothing: fall back to uniform.
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(counts.size()));
        return row;
    }
    for (std::size_t i = 0; i < counts.size(); ++i)
        row[i] = (counts[i] + alpha) / total;
    return row;
}

}  // namespace

void CptSet::check() const {
    const std::size_t s = states.size();
    if (s == 0) throw ValidationError("CPT set has no states");
    if (emissions.size() != families.size())
        throw ValidationError("emission table count does not match family count");
    for (std::size_t f = 0; f < families.size(); ++f) {
        if (families[f].cardinality == 0)
            throw ValidationError("family '" + families[f].name + "' has zero cardinality");
        if (emissions[f].size() != s)
            throw ValidationError("family '" + families[f].name +
                                  "' emission table has wrong state count");
        for (const auto& row : emissions[f]) {
            if (row.size() != families[f].cardinality)
                throw ValidationError("family '" + families[f].name +
                                      "' emission row has wrong width");
            check_row(row, "emission");
        }
    }
    if (transition.size() != s)
        throw ValidationError("transition table has wrong state count");
    for (const auto& row : transition) {
        if (row.size() != s) throw ValidationError("transition row has wrong width");
        check_row(row, "transition");
    }
    if (initial.size() != s) throw ValidationError("initial belief has wrong length");
    check_row(initial, "initial");
}

CptSet estimate_cpts(const std::vector<LabeledSequence>& sequences,
                     std::vector<std::string> states,
                     std::vector<FamilySpec> families,
                     double alpha) {
    if (alpha < 0.0) throw ValidationError("smoothing alpha must be >= 0");
    if (states.empty()) throw ValidationError("estimation needs a state list");
    if (families.empty()) throw ValidationError("estimation needs observation families");
    std::size_t total_frames = 0;
    for (const auto& seq : sequences) total_frames += seq.states.size();
    if (total_frames == 0) throw ValidationError("estimation needs labeled frames");

    const std::size_t s = states.size();
    std::vector<std::vector<std::vector<double>>> emission_counts(families.size());
    for (std::size_t f = 0; f < families.size(); ++f)
        emission_counts[f].assign(s, std::vector<double>(families[f].cardinality, 0.0));
    std::vector<std::vector<double>> transition_counts(s, std::vector<double>(s, 0.0));
    std::vector<double> state_counts(s, 0.0);

    for (const auto& seq : sequences) {
        if (seq.observations.size() != seq.states.size())
            throw ValidationError("sequence observations and states differ in length");
        for (std::size_t t = 0; t < seq.states.size(); ++t) {
            const std::size_t st = seq.states[t];
            if (st >= s) throw ValidationError("state label index out of range");
            state_counts[st] += 1.0;
            const Observation& obs = seq.observations[t];
            if (obs.size() != families.size())
                throw ValidationError("observation family count mismatch");
            for (std::size_t f = 0; f < families.size(); ++f) {
                const int code = obs[f];
                if (code == -1) continue;  // optional family unobserved
                if (code < 0 || static_cast<std::size_t>(code) >= families[f].cardinality)
                    throw ValidationError("observation code out of range for family '" +
                                          families[f].name + "'");
                emission_counts[f][st][static_cast<std::size_t>(code)] += 1.0;
            }
            if (t > 0) transition_counts[seq.states[t - 1]][st] += 1.0;
        }
    }

    CptSet cpts;
    cpts.states = std::move(states);
    cpts.families = std::move(families);
    cpts.emissions.resize(cpts.families.size());
    for (std::size_t f = 0; f < cpts.families.size(); ++f) {
        cpts.emissions[f].reserve(s);
        for (std::size_t st = 0; st < s; ++st)
            cpts.emissions[f].push_back(smoothed_row(emission_counts[f][st], alpha));
    }
    cpts.transition.reserve(s);
    for (std::size_t st = 0; st < s; ++st)
        cpts.transition.push_back(smoothed_row(transition_counts[st], alpha));
    cpts.initial.resize(s);
    for (std::size_t st = 0; st < s; ++st)
        cpts.initial[st] = state_counts[st] / static_cast<double>(total_frames);
    cpts.check();
    return cpts;
}

std::size_t BeliefState::argmax() const {
    if (probabilities.empty()) throw ValidationError("empty belief");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[best]) best = i;
    return best;
}

BeliefState filter_step(const BeliefState& belief, const CptSet& cpts,
                        const Observation& obs) {
    const std::size_t s = cpts.state_count();
    if (belief.probabilities.size() != s)
        throw ValidationError("belief length does not match state count");
    if (obs.size() != cpts.families.size())
        throw ValidationError("observation family count mismatch");

    BeliefState next;
    next.probabilities.assign(s, 0.0);
    double total = 0.0;
    for (std::size_t to = 0; to < s; ++to) {
        double predicted = 0.0;
        for (std::size_t from = 0; from < s; ++from)
            predicted += cpts.transition[from][to] * belief.probabilities[from];
        double likelihood = 1.0;
        for (std::size_t f = 0; f < cpts.families.size(); ++f) {
            const int code = obs[f];
            if (code == -1) continue;
            if (code < 0 ||
                static_cast<std::size_t>(code) >= cpts.families[f].cardinality)
                throw ValidationError("observation code out of range for family '" +
                                      cpts.families[f].name + "'");
            likelihood *= cpts.emissions[f][to][static_cast<std::size_t>(code)];
        }
        next.probabilities[to] = predicted * likelihood;
        total += next.probabilities[to];
    }
    if (total <= 0.0)
        throw ValidationError("zero-probability observation; belief cannot be normalized");
    for (double& p : next.probabilities) p /= total;
    return next;
}

std::vector<BeliefState> filter_sequence(const std::vector<Observation>& observations,
                                         const CptSet& cpts,
                                         const std::vector<double>* initial_belief) {
    cpts.check();
    BeliefState belief;
    belief.probabilities = initial_belief ? *initial_belief : cpts.initial;
    if (belief.probabilities.size() != cpts.state_count())
        throw ValidationError("initial belief length does not match state count");
    check_row(belief.probabilities, "initial belief");

    std::vector<BeliefState> out;
    out.reserve(observations.size());
    for (const Observation& obs : observations) {
        belief = filter_step(belief, cpts, obs);
        out.push_back(belief);
    }
    return out;
}

LabeledSequence sample_sequence(const CptSet& cpts, std::size_t frames, Xoshiro256& rng) {
    cpts.check();
    LabeledSequence seq;
    seq.observations.reserve(frames);
    seq.states.reserve(frames);
    std::size_t state = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        state = t == 0 ? rng.categorical(cpts.initial)
                       : rng.categorical(cpts.transition[state]);
        Observation obs(cpts.families.size());
        for (std::size_t f = 0; f < cpts.families.size(); ++f)
            obs[f] = static_cast<int>(rng.categorical(cpts.emissions[f][state]));
        seq.states.push_back(state);
        seq.observations.push_back(std::move(obs));
    }
    return seq;
}

std::string save_cpts(const CptSet& cpts) {
    cpts.check();
    json doc;
    doc["version"] = 1;
    doc["states"] = cpts.states;
    doc["families"] = json::array();
    for (const auto& f : cpts.families)
        doc["families"].push_back({{"name", f.name}, {"cardinality", f.cardinality}});
    doc["emissions"] = json::object();
    for (std::size_t f = 0; f < cpts.families.size(); ++f)
        doc["emissions"][cpts.families[f].name] = cpts.emissions[f];
    doc["transition"] = cpts.transition;
    doc["initial"] = cpts.initial;
    return doc.dump(2) + "\n";
}

CptSet load_cpts(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed CPT document: ") + e.what());
    }
    try {
        CptSet cpts;
        if (doc.value("version", 0) != 1)
            throw ValidationError("unsupported CPT document version");
        cpts.states = doc.at("states").get<std::vector<std::string>>();
        for (const auto& f : doc.at("families"))
            cpts.families.push_back({f.at("name").get<std::string>(),
                                     f.at("cardinality").get<std::size_t>()});
        for (const auto& f : cpts.families)
            cpts.emissions.push_back(
                doc.at("emissions").at(f.name).get<std::vector<std::vector<double>>>());
        cpts.transition = doc.at("transition").get<std::vector<std::vector<double>>>();
        cpts.initial = doc.at("initial").get<std::vector<double>>();
        cpts.check();
        return cpts;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid CPT document: ") + e.what());
    }
}

std::vector<std::string> three_state_names() { return {"safe", "careless", "dangerous"}; }

std::vector<std::string> seven_state_names() {
    std::vector<std::string> names;
    for (const auto& band : severity_bands()) names.push_back(band.impact);
    return names;
}

FrameDiscretizer::FrameDiscretizer(const ParameterCatalog& catalog) : catalog_(catalog) {
    const auto card = [&](Param p) {
        return catalog_.parameter(p).actions.size();
    };
    families_ = {
        {"driver_state", card(Param::HandState) * card(Param::FaceOrientation) *
                             card(Param::EyeGaze) * card(Param::Manoeuvre) * 3},
        {"environment",
         card(Param::RoadType) * card(Param::Illumination) * card(Param::Weather)},
        {"surroundings", card(Param::Surroundings)},
        {"pedestrians", card(Param::Pedestrians)},
    };
}

int FrameDiscretizer::speed_bin(double speed_mph, const std::string& road_action) const {
    const double limit = catalog_.speed_limit_for(road_action);
    if (speed_mph < 0.5 * limit) return 0;
    if (speed_mph <= limit) return 1;
    return 2;
}

Observation FrameDiscretizer::discretize(const FrameObservation& frame) const {
    const auto index = [&](Param p) {
        return catalog_.parameter(p).action_index(frame.action(p));
    };
    const auto card = [&](Param p) { return catalog_.parameter(p).actions.size(); };

    std::size_t driver = index(Param::HandState);
    driver = driver * card(Param::FaceOrientation) + index(Param::FaceOrientation);
    driver = driver * card(Param::EyeGaze) + index(Param::EyeGaze);
    driver = driver * card(Param::Manoeuvre) + index(Param::Manoeuvre);
    driver = driver * 3 +
             static_cast<std::size_t>(speed_bin(frame.speed_mph, frame.action(Param::RoadType)));

    std::size_t environment = index(Param::RoadType);
    environment = environment * card(Param::Illumination) + index(Param::Illumination);
    environment = environment * card(Param::Weather) + index(Param::Weather);

    return {static_cast<int>(driver), static_cast<int>(environment),
            static_cast<int>(index(Param::Surroundings)),
            static_cast<int>(index(Param::Pedestrians))};
}

std::vector<Observation> FrameDiscretizer::discretize(const TripRecord& trip) const {
    std::vector<Observation> out;
    out.reserve(trip.frames.size());
    for (const auto& f : trip.frames) out.push_back(discretize(f));
    return out;
}

FrameObservation FrameDiscretizer::decode(const Observation& obs,
                                          std::int64_t frame_index,
                                          Xoshiro256& rng) const {
    if (obs.size() != families_.size())
        throw ValidationError("observation family count mismatch");
    for (std::size_t f = 0; f < families_.size(); ++f) {
        if (obs[f] < 0 || static_cast<std::size_t>(obs[f]) >= families_[f].cardinality)
            throw ValidationError("cannot decode: code out of range for family '" +
                                  families_[f].name + "'");
    }
    const auto actions_of = [&](Param p) -> const std::vector<ActionWeight>& {
        return catalog_.parameter(p).actions;
    };

    FrameObservation frame;
    frame.frame = frame_index;

    std::size_t env = static_cast<std::size_t>(obs[1]);
    const std::size_t weather_i = env % actions_of(Param::Weather).size();
    env /= actions_of(Param::Weather).size();
    const std::size_t illum_i = env % actions_of(Param::Illumination).size();
    env /= actions_of(Param::Illumination).size();
    const std::size_t road_i = env;

    std::size_t drv = static_cast<std::size_t>(obs[0]);
    const std::size_t bin = drv % 3;
    drv /= 3;
    const std::size_t man_i = drv % actions_of(Param::Manoeuvre).size();
    drv /= actions_of(Param::Manoeuvre).size();
    const std::size_t eye_i = drv % actions_of(Param::EyeGaze).size();
    drv /= actions_of(Param::EyeGaze).size();
    const std::size_t face_i = drv % actions_of(Param::FaceOrientation).size();
    drv /= actions_of(Param::FaceOrientation).size();
    const std::size_t hand_i = drv;

    frame.action(Param::HandState) = actions_of(Param::HandState).at(hand_i).label;
    frame.action(Param::RoadType) = actions_of(Param::RoadType).at(road_i).label;
    frame.action(Param::FaceOrientation) =
        actions_of(Param::FaceOrientation).at(face_i).label;
    frame.action(Param::Illumination) =
        actions_of(Param::Illumination).at(illum_i).label;
    frame.action(Param::EyeGaze) = actions_of(Param::EyeGaze).at(eye_i).label;
    frame.action(Param::Weather) = actions_of(Param::Weather).at(weather_i).label;
    frame.action(Param::Manoeuvre) = actions_of(Param::Manoeuvre).at(man_i).label;
    frame.action(Param::Surroundings) =
        actions_of(Param::Surroundings).at(static_cast<std::size_t>(obs[2])).label;
    frame.action(Param::Pedestrians) =
        actions_of(Param::Pedestrians).at(static_cast<std::size_t>(obs[3])).label;

    // Draw a speed strictly inside the coded bin.
    const double limit = catalog_.speed_limit_for(frame.action(Param::RoadType));
    if (bin == 0) {
        frame.speed_mph = rng.uniform() * 0.5 * limit;
    } else if (bin == 1) {
        frame.speed_mph = 0.5 * limit + rng.uniform() * 0.5 * limit;
    } else {
        frame.speed_mph = limit + (1.0 - rng.uniform()) * 0.3 * limit;  // > limit
    }
    return frame;
}

}  // namespace mddra::dbn
