#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/dbn.hpp"
#include "mddra/errors.hpp"
#include "mddra/rng.hpp"

using namespace mddra;
using dbn::CptSet;
using dbn::FamilySpec;
using dbn::LabeledSequence;
using dbn::Observation;

namespace {

CptSet two_state_toy() {
    CptSet c;
    c.states = {"calm", "agitated"};
    c.families = {{"signal", 2}, {"extra", 3}};
    c.emissions = {
        {{0.8, 0.2}, {0.3, 0.7}},
        {{0.5, 0.25, 0.25}, {0.1, 0.4, 0.5}},
    };
    c.transition = {{0.9, 0.1}, {0.2, 0.8}};
    c.initial = {0.6, 0.4};
    return c;
}

// Filtering posterior by explicit path enumeration: the state before the
// first frame follows `initial`, each frame applies transition then
// emissions.
std::vector<std::vector<double>> brute_posteriors(const CptSet& c,
                                                  const std::vector<Observation>& obs) {
    const std::size_t s = c.state_count();
    std::vector<std::vector<double>> out;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        const std::size_t frames = t + 1;
        std::vector<double> marginal(s, 0.0);
        std::vector<std::size_t> path(frames, 0);
        while (true) {
            double joint = 0.0;
            for (std::size_t s0 = 0; s0 < s; ++s0)
                joint += c.initial[s0] * c.transition[s0][path[0]];
            for (std::size_t u = 0; u < frames; ++u) {
                if (u > 0) joint *= c.transition[path[u - 1]][path[u]];
                for (std::size_t f = 0; f < c.families.size(); ++f) {
                    const int code = obs[u][f];
                    if (code == -1) continue;
                    joint *= c.emissions[f][path[u]][static_cast<std::size_t>(code)];
                }
            }
            marginal[path[frames - 1]] += joint;
            // Advance the mixed-radix path counter.
            std::size_t at = 0;
            while (at < frames && ++path[at] == s) path[at++] = 0;
            if (at == frames) break;
        }
        double norm = 0.0;
        for (double m : marginal) norm += m;
        for (double& m : marginal) m /= norm;
        out.push_back(marginal);
    }
    return out;
}

}  // namespace

TEST_CASE("estimation matches hand counts") {
    LabeledSequence seq;
    seq.observations = {{0}, {1}, {1}};
    seq.states = {0, 0, 1};
    const std::vector<std::string> states = {"a", "b"};
    const std::vector<FamilySpec> families = {{"f", 2}};

    SUBCASE("unsmoothed") {
        const CptSet c = dbn::estimate_cpts({seq}, states, families, 0.0);
        CHECK(c.emissions[0][0] == std::vector<double>{0.5, 0.5});
        CHECK(c.emissions[0][1] == std::vector<double>{0.0, 1.0});
        CHECK(c.transition[0] == std::vector<double>{0.5, 0.5});
        // No transitions out of b were seen: uniform fallback.
        CHECK(c.transition[1] == std::vector<double>{0.5, 0.5});
        CHECK(c.initial[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(c.initial[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }

    SUBCASE("additive smoothing") {
        const CptSet c = dbn::estimate_cpts({seq}, states, families, 1.0);
        CHECK(c.emissions[0][0] == std::vector<double>{0.5, 0.5});
        CHECK(c.emissions[0][1][0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(c.emissions[0][1][1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(c.transition[1] == std::vector<double>{0.5, 0.5});
    }

    SUBCASE("unobserved family codes are skipped") {
        LabeledSequence partial = seq;
        partial.observations[1] = {-1};
        const CptSet c = dbn::estimate_cpts({partial}, states, families, 0.0);
        // State a now only saw code 0.
        CHECK(c.emissions[0][0] == std::vector<double>{1.0, 0.0});
    }

    SUBCASE("estimation validation") {
        CHECK_THROWS_AS(dbn::estimate_cpts({seq}, states, families, -0.5),
                        ValidationError);
        CHECK_THROWS_AS(dbn::estimate_cpts({}, states, families, 1.0), ValidationError);
        LabeledSequence bad = seq;
        bad.states[2] = 7;
        CHECK_THROWS_AS(dbn::estimate_cpts({bad}, states, families, 1.0),
                        ValidationError);
        bad = seq;
        bad.observations[0] = {5};
        CHECK_THROWS_AS(dbn::estimate_cpts({bad}, states, families, 1.0),
                        ValidationError);
    }
}

TEST_CASE("filtering matches brute-force path enumeration") {
    const CptSet c = two_state_toy();
    c.check();

    Xoshiro256 rng(64);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Observation> obs;
        const std::size_t frames = 1 + rng.below(6);
        for (std::size_t t = 0; t < frames; ++t) {
            Observation o(2);
            o[0] = rng.below(4) == 0 ? -1 : static_cast<int>(rng.below(2));
            o[1] = rng.below(4) == 0 ? -1 : static_cast<int>(rng.below(3));
            obs.push_back(o);
        }
        const auto got = dbn::filter_sequence(obs, c);
        const auto want = brute_posteriors(c, obs);
        REQUIRE(got.size() == want.size());
        for (std::size_t t = 0; t < got.size(); ++t) {
            double sum = 0.0;
            for (std::size_t s = 0; s < 2; ++s) {
                CHECK(std::abs(got[t].probabilities[s] - want[t][s]) < 1e-12);
                sum += got[t].probabilities[s];
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("a uniform emission row acts like an unobserved family") {
    CptSet c = two_state_toy();
    // Make the second family uninformative.
    c.emissions[1] = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};

    const std::vector<Observation> with = {{0, 2}, {1, 0}, {0, 1}};
    std::vector<Observation> without = with;
    for (auto& o : without) o[1] = -1;

    const auto a = dbn::filter_sequence(with, c);
    const auto b = dbn::filter_sequence(without, c);
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t s = 0; s < 2; ++s)
            CHECK(std::abs(a[t].probabilities[s] - b[t].probabilities[s]) < 1e-12);
}

TEST_CASE("filter validation and degenerate evidence") {
    CptSet c = two_state_toy();
    dbn::BeliefState b;
    b.probabilities = c.initial;

    CHECK_THROWS_AS(dbn::filter_step(b, c, Observation{0}), ValidationError);
    CHECK_THROWS_AS(dbn::filter_step(b, c, Observation{0, 9}), ValidationError);
    dbn::BeliefState truncated;
    truncated.probabilities = {1.0};
    CHECK_THROWS_AS(dbn::filter_step(truncated, c, Observation{0, 0}), ValidationError);

    // An observation both states emit with probability zero.
    c.emissions[0] = {{1.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(dbn::filter_step(b, c, Observation{1, -1}), ValidationError);

    // Bad initial belief.
    const std::vector<double> broken = {0.7, 0.7};
    CHECK_THROWS_AS(dbn::filter_sequence({Observation{0, 0}}, two_state_toy(), &broken),
                    ValidationError);
}

TEST_CASE("identity transition with flat emissions keeps the belief") {
    CptSet c;
    c.states = {"x", "y", "z"};
    c.families = {{"f", 2}};
    c.emissions = {{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}};
    c.transition = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    c.initial = {0.2, 0.5, 0.3};
    std::vector<Observation> obs(10, Observation{0});
    const auto beliefs = dbn::filter_sequence(obs, c);
    for (const auto& b : beliefs)
        for (std::size_t s = 0; s < 3; ++s)
            CHECK(b.probabilities[s] == doctest::Approx(c.initial[s]).epsilon(1e-12));
}

TEST_CASE("belief converges to the stationary distribution without evidence") {
    CptSet c;
    c.states = {"p", "q"};
    c.families = {{"f", 2}};
    c.emissions = {{{0.5, 0.5}, {0.5, 0.5}}};
    c.transition = {{0.7, 0.3}, {0.4, 0.6}};
    c.initial = {1.0, 0.0};
    // Stationary vector of the chain: pi = (4/7, 3/7).
    const double pi0 = 4.0 / 7.0;

    std::vector<Observation> obs(60, Observation{-1});
    const auto beliefs = dbn::filter_sequence(obs, c);

    // Power iteration oracle.
    std::vector<double> v = c.initial;
    double prev_gap = 1.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        std::vector<double> next(2, 0.0);
        for (std::size_t to = 0; to < 2; ++to)
            for (std::size_t from = 0; from < 2; ++from)
                next[to] += c.transition[from][to] * v[from];
        v = next;
        CHECK(std::abs(beliefs[t].probabilities[0] - v[0]) < 1e-12);
        const double gap = std::abs(beliefs[t].probabilities[0] - pi0);
        CHECK(gap <= prev_gap + 1e-15);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-9);
}

TEST_CASE("sampled sequences recover the transition table") {
    const CptSet c = two_state_toy();
    Xoshiro256 rng(2001);
    const LabeledSequence seq = dbn::sample_sequence(c, 20000, rng);
    REQUIRE(seq.states.size() == 20000);
    REQUIRE(seq.observations.size() == 20000);

    const CptSet fit = dbn::estimate_cpts({seq}, c.states, c.families, 0.0);
    for (std::size_t from = 0; from < 2; ++from)
        for (std::size_t to = 0; to < 2; ++to)
            CHECK(std::abs(fit.transition[from][to] - c.transition[from][to]) < 0.02);
    for (std::size_t f = 0; f < c.families.size(); ++f)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t code = 0; code < c.families[f].cardinality; ++code)
                CHECK(std::abs(fit.emissions[f][s][code] - c.emissions[f][s][code]) <
                      0.02);

    // Same seed, same draw.
    Xoshiro256 again(2001);
    const LabeledSequence repeat = dbn::sample_sequence(c, 20000, again);
    CHECK(repeat.states == seq.states);
    CHECK(repeat.observations == seq.observations);
}

TEST_CASE("CPT JSON round trip is exact") {
    const CptSet c = two_state_toy();
    const std::string text = dbn::save_cpts(c);
    const CptSet back = dbn::load_cpts(text);
    CHECK(back == c);
    CHECK(dbn::save_cpts(back) == text);

    CHECK_THROWS_AS(dbn::load_cpts("{"), ValidationError);
    CHECK_THROWS_AS(dbn::load_cpts("{}"), ValidationError);
    CHECK_THROWS_AS(dbn::load_cpts(R"({"version": 2})"), ValidationError);
}

TEST_CASE("CPT shape validation") {
    CptSet c = two_state_toy();
    c.transition[0] = {0.9, 0.2};  // does not sum to 1
    CHECK_THROWS_AS(c.check(), ValidationError);

    c = two_state_toy();
    c.emissions[0][0] = {1.2, -0.2};
    CHECK_THROWS_AS(c.check(), ValidationError);

    c = two_state_toy();
    c.initial = {1.0};
    CHECK_THROWS_AS(c.check(), ValidationError);
}

TEST_CASE("state name lists") {
    CHECK(dbn::three_state_names() ==
          std::vector<std::string>{"safe", "careless", "dangerous"});
    const auto seven = dbn::seven_state_names();
    REQUIRE(seven.size() == 7);
    CHECK(seven.front() == "no_impact");
    CHECK(seven.back() == "extreme");
}

TEST_CASE("frame discretizer families and codes") {
    const ParameterCatalog cat = default_catalog();
    const dbn::FrameDiscretizer disc(cat);
    const auto& families = disc.families();
    REQUIRE(families.size() == 4);
    CHECK(families[0].name == "driver_state");
    CHECK(families[0].cardinality == 162);  // 3*2*3*3*3
    CHECK(families[1].name == "environment");
    CHECK(families[1].cardinality == 18);  // 3*2*3
    CHECK(families[2].cardinality == 2);
    CHECK(families[3].cardinality == 2);

    CHECK(disc.speed_bin(14.9, "urban") == 0);
    CHECK(disc.speed_bin(15.0, "urban") == 1);
    CHECK(disc.speed_bin(30.0, "urban") == 1);
    CHECK(disc.speed_bin(30.1, "urban") == 2);
    CHECK(disc.speed_bin(70.0, "highway") == 1);
    CHECK(disc.speed_bin(71.0, "highway") == 2);
}

TEST_CASE("decode is a right inverse of discretize") {
    const ParameterCatalog cat = default_catalog();
    const dbn::FrameDiscretizer disc(cat);
    Xoshiro256 rng(5150);
    for (int driver = 0; driver < 162; ++driver) {
        const int environment = driver % 18;
        const int surroundings = driver % 2;
        const int pedestrians = (driver / 2) % 2;
        const Observation o = {driver, environment, surroundings, pedestrians};
        const FrameObservation frame = disc.decode(o, driver, rng);
        CHECK(disc.discretize(frame) == o);
        CHECK(frame.frame == driver);
        CHECK(frame.speed_mph >= 0.0);
    }
    CHECK_THROWS_AS(disc.decode({162, 0, 0, 0}, 0, rng), ValidationError);
    CHECK_THROWS_AS(disc.decode({0, 0, 0}, 0, rng), ValidationError);
}
