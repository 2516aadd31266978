#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/rng.hpp"
#include "mddra/trip.hpp"

namespace mddra::dbn {

struct FamilySpec {
    std::string name;
    std::size_t cardinality = 0;

    bool operator==(const FamilySpec&) const = default;
};

// One categorical code per observation family; -1 marks an unobserved
// (optional) family whose factor is skipped during filtering.
using Observation = std::vector<int>;

struct LabeledSequence {
    std::vector<Observation> observations;
    std::vector<std::size_t> states;  // indices into CptSet::states
};

struct CptSet {
    std::vector<std::string> states;
    std::vector<FamilySpec> families;
    // emissions[family][state][code] = P(code | state).
    std::vector<std::vector<std::vector<double>>> emissions;
    // transition[from][to] = P(to | from).
    std::vector<std::vector<double>> transition;
    // Default belief; estimation fills it with the empirical class frequency.
    std::vector<double> initial;

    std::size_t state_count() const { return states.size(); }
    // Shapes consistent, probabilities in [0,1], rows normalized within 1e-9.
    void check() const;

    bool operator==(const CptSet&) const = default;
};

// Count-based estimation with additive-alpha smoothing. Transitions count
// consecutive pairs within each sequence only; the initial distribution is
// the empirical state frequency over all frames. A state never observed
// gets uniform rows. alpha >= 0; alpha = 0 is unsmoothed.
CptSet estimate_cpts(const std::vector<LabeledSequence>& sequences,
                     std::vector<std::string> states,
                     std::vector<FamilySpec> families,
                     double alpha = 1.0);

struct BeliefState {
    std::vector<double> probabilities;

    // Ties resolve to the lowest state index (fixed class order).
    std::size_t argmax() const;
};

// One predict-update step:
//   posterior(s') o< [ prod_F P(obs_F | s') ] * sum_s P(s' | s) belief(s)
// renormalized. Errors: code out of range, zero-probability normalization.
BeliefState filter_step(const BeliefState& belief, const CptSet& cpts,
                        const Observation& obs);

// Folds filter_step over a sequence, starting from initial_belief when given
// and cpts.initial otherwise. Returns one posterior per observation.
std::vector<BeliefState> filter_sequence(const std::vector<Observation>& observations,
                                         const CptSet& cpts,
                                         const std::vector<double>* initial_belief = nullptr);

// Simulates the chain: states from the transition table, one emission code
// per family per frame. Used by the generator's ground-truth mode.
LabeledSequence sample_sequence(const CptSet& cpts, std::size_t frames, Xoshiro256& rng);

std::string save_cpts(const CptSet& cpts);
CptSet load_cpts(const std::string& json_text);

// Default filter states.
std::vector<std::string> three_state_names();
// Band impact tokens, for seven-state filtering.
std::vector<std::string> seven_state_names();

// Maps frames onto the categorical observation families:
//   driver_state  = hand x face x eye_gaze x manoeuvre x speed_bin
//   environment   = road x illumination x weather
//   surroundings, pedestrians = the raw binary actions
// Speed bins relative to the road-type limit: 0 below half the limit,
// 1 legal (up to and including the limit), 2 over the limit.
class FrameDiscretizer {
public:
    explicit FrameDiscretizer(const ParameterCatalog& catalog);

    const std::vector<FamilySpec>& families() const { return families_; }
    Observation discretize(const FrameObservation& frame) const;
    std::vector<Observation> discretize(const TripRecord& trip) const;

    // Inverse of discretize; the speed is drawn uniformly inside the coded
    // bin so that discretize(decode(o)) == o. Over-limit caps at 1.3x limit.
    FrameObservation decode(const Observation& obs, std::int64_t frame_index,
                            Xoshiro256& rng) const;

    int speed_bin(double speed_mph, const std::string& road_action) const;

private:
    ParameterCatalog catalog_;
    std::vector<FamilySpec> families_;
};

}  // namespace mddra::dbn
