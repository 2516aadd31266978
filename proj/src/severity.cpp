#include "mddra/severity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "mddra/errors.hpp"

namespace mddra {

namespace {

// Label -> weight fraction lookups hoisted out of the per-frame loop.
struct Resolved {
    std::array<std::unordered_map<std::string, double>, kParameterCount> fraction;
    std::unordered_map<std::string, double> road_limit;
    std::unordered_map<std::string, double> road_fraction;
    SpeedMode mode;
    std::size_t term_count;

    explicit Resolved(const ParameterCatalog& catalog)
        : mode(catalog.speed_mode), term_count(catalog.parameters.size()) {
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            const ParameterSpec& spec = catalog.parameter(kParameterNames[p]);
            for (const auto& a : spec.actions)
                fraction[p][a.label] =
                    static_cast<double>(a.weight) / static_cast<double>(spec.max_weight);
        }
        const ParameterSpec& road = catalog.parameter(Param::RoadType);
        for (const auto& a : road.actions) {
            road_limit[a.label] = catalog.speed_limit_for(a.label);
            road_fraction[a.label] =
                static_cast<double>(a.weight) / static_cast<double>(road.max_weight);
        }
    }

    double term(std::size_t p, const std::string& action) const {
        auto it = fraction[p].find(action);
        if (it == fraction[p].end())
            throw ValidationError("unknown action '" + action + "' for parameter '" +
                                  std::string(kParameterNames[p]) + "'");
        return it->second;
    }

    double speed(double mph, const std::string& road_action) const {
        if (!std::isfinite(mph) || mph < 0.0)
            throw ValidationError("speed must be finite and >= 0");
        auto lim = road_limit.find(road_action);
        auto frac = road_fraction.find(road_action);
        if (lim == road_limit.end() || frac == road_fraction.end())
            throw ValidationError("unknown road action '" + road_action + "'");
        const double ratio = std::min(mph / lim->second, 1.0);
        return std::clamp(ratio * frac->second, 0.0, 1.0);
    }

    double score(const FrameObservation& f) const {
        double sum = 0.0;
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            double t = term(p, f.actions[p]);
            if (mode == SpeedMode::SurroundingsMultiplier &&
                p == idx(Param::Surroundings))
                t *= speed(f.speed_mph, f.action(Param::RoadType));
            sum += t;
        }
        if (mode == SpeedMode::IndependentTerm) {
            sum += speed(f.speed_mph, f.action(Param::RoadType));
            return sum / static_cast<double>(term_count + 1);
        }
        return sum / static_cast<double>(term_count);
    }
};

}  // namespace

double normalized_term(const ParameterSpec& param, const std::string& action) {
    return static_cast<double>(param.weight_of(action)) /
           static_cast<double>(param.max_weight);
}

double speed_factor(double speed_mph, const std::string& road_action,
                    const ParameterCatalog& catalog) {
    return Resolved(catalog).speed(speed_mph, road_action);
}

double frame_severity(const FrameObservation& frame, const ParameterCatalog& catalog) {
    return Resolved(catalog).score(frame);
}

double aggregate_severity(double current, std::span<const double> history) {
    double sum = current;
    for (double h : history) sum += h;
    return sum / static_cast<double>(history.size() + 1);
}

int likelihood_of(double aggregate_score, const ParameterCatalog& catalog) {
    const int rank = band_for(aggregate_score).rank;
    return catalog.likelihood_by_rank[static_cast<std::size_t>(rank - 1)];
}

int risk_cell(int rank, int likelihood) {
    if (rank < 1 || rank > 7) throw ValidationError("rank outside 1..7");
    if (likelihood < 1 || likelihood > 4)
        throw ValidationError("likelihood outside 1..4");
    return rank * likelihood;
}

std::array<std::array<int, 5>, 7> risk_matrix_table() {
    std::array<std::array<int, 5>, 7> table{};
    for (int row = 0; row < 7; ++row) {
        const int rank = 7 - row;
        table[static_cast<std::size_t>(row)] = {rank, rank * 1, rank * 2, rank * 3,
                                                rank * 4};
    }
    return table;
}

std::vector<FrameAssessment> assess_stream(const TripRecord& trip,
                                           const ParameterCatalog& catalog) {
    return assess_stream(trip, catalog, catalog.window);
}

std::vector<FrameAssessment> assess_stream(const TripRecord& trip,
                                           const ParameterCatalog& catalog,
                                           int window) {
    if (window < 1) throw ValidationError("window must be >= 1");
    trip.validate(catalog);
    const Resolved resolved(catalog);

    std::vector<FrameAssessment> out;
    out.reserve(trip.frames.size());
    std::deque<double> trailing;  // last `window` frame scores, current included
    DistractionClass prev_class = DistractionClass::Safe;

    for (std::size_t i = 0; i < trip.frames.size(); ++i) {
        const FrameObservation& f = trip.frames[i];
        const double score = resolved.score(f);

        trailing.push_back(score);
        if (trailing.size() > static_cast<std::size_t>(window)) trailing.pop_front();
        // Direct oldest-to-newest sum: bit-identical to a brute-force
        // trailing mean and free of running-sum drift.
        double sum = 0.0;
        for (double s : trailing) sum += s;
        const double aggregate = sum / static_cast<double>(trailing.size());

        const SeverityBand& band = band_for(aggregate);
        FrameAssessment a;
        a.frame = f.frame;
        a.frame_score = score;
        a.aggregate_score = aggregate;
        a.rank = band.rank;
        a.likelihood = catalog.likelihood_by_rank[static_cast<std::size_t>(band.rank - 1)];
        a.risk_value = a.rank * a.likelihood;
        a.takeover = i > 0 &&
                     collapse(prev_class) != SeverityClass::Dangerous &&
                     collapse(band.distraction_class) == SeverityClass::Dangerous;
        prev_class = band.distraction_class;
        out.push_back(a);
    }
    return out;
}

}  // namespace mddra
