#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/trip.hpp"

namespace mddra {

struct FrameAssessment {
    std::int64_t frame = 0;
    double frame_score = 0.0;
    double aggregate_score = 0.0;
    int rank = 1;        // band rank of the aggregate score
    int likelihood = 1;  // 1..4
    int risk_value = 1;  // rank * likelihood
    bool takeover = false;

    const SeverityBand& band() const { return band_by_rank(rank); }
};

// weight / max_weight for one action; throws on unknown action.
double normalized_term(const ParameterSpec& param, const std::string& action);

// min(speed/limit(road), 1) * weight(road)/max_weight(road), clamped to [0,1].
// Throws on negative/non-finite speed or an unknown road action.
double speed_factor(double speed_mph, const std::string& road_action,
                    const ParameterCatalog& catalog);

// Mean of the normalized terms. In SurroundingsMultiplier mode the
// surroundings term is scaled by the speed factor (k = 9); in
// IndependentTerm mode the speed factor joins as a tenth term (k = 10).
double frame_severity(const FrameObservation& frame, const ParameterCatalog& catalog);

// Trailing-window mean: current plus up to window-1 previous frame scores.
double aggregate_severity(double current, std::span<const double> history);

// Likelihood level of an aggregate score via its band rank.
int likelihood_of(double aggregate_score, const ParameterCatalog& catalog);

// Risk matrix cell value.
int risk_cell(int rank, int likelihood);

// The full 7x5 risk matrix, highest band first. Each row renders
// {rank, rank*1, rank*2, rank*3, rank*4}; the leading column repeats the
// rank so a rendered row carries its own label.
std::array<std::array<int, 5>, 7> risk_matrix_table();

// Per-frame assessment over a whole trip. The takeover flag fires on the
// transition of the collapsed class into Dangerous (never on the first
// frame, and not on moves within the Dangerous bands).
std::vector<FrameAssessment> assess_stream(const TripRecord& trip,
                                           const ParameterCatalog& catalog);
std::vector<FrameAssessment> assess_stream(const TripRecord& trip,
                                           const ParameterCatalog& catalog,
                                           int window);

}  // namespace mddra
