#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mddra/errors.hpp"
#include "mddra/rng.hpp"
#include "mddra/segmentation.hpp"

using namespace mddra;

namespace {

double brute_diameter(const std::vector<double>& v, std::size_t i, std::size_t j) {
    double mean = 0.0;
    for (std::size_t t = i; t <= j; ++t) mean += v[t];
    mean /= static_cast<double>(j - i + 1);
    double sse = 0.0;
    for (std::size_t t = i; t <= j; ++t) sse += (v[t] - mean) * (v[t] - mean);
    return sse;
}

struct OracleBest {
    std::vector<std::size_t> boundaries;
    double total = 0.0;
    bool set = false;
};

// Exhaustive partition search. Totals accumulate right to left (the same
// association the DP's suffix table uses) so ties are decided on identical
// floating-point values; equal totals prefer the lexicographically smaller
// boundary vector.
void enumerate(const seg::DiameterTable& d, std::size_t n, std::size_t k,
               std::vector<std::size_t>& cuts, OracleBest& best) {
    if (cuts.size() == k) {
        double total = 0.0;
        for (std::size_t s = k; s-- > 0;) {
            const std::size_t lo = cuts[s];
            const std::size_t hi = (s + 1 < k ? cuts[s + 1] : n) - 1;
            total = d(lo, hi) + total;
        }
        if (!best.set || total < best.total ||
            (total == best.total && cuts < best.boundaries)) {
            best.set = true;
            best.total = total;
            best.boundaries = cuts;
        }
        return;
    }
    const std::size_t remaining = k - cuts.size();
    for (std::size_t next = cuts.back() + 1; next + remaining - 1 <= n - 1; ++next) {
        cuts.push_back(next);
        enumerate(d, n, k, cuts, best);
        cuts.pop_back();
    }
}

seg::Partition oracle_partition(const std::vector<double>& values, std::size_t k) {
    const seg::DiameterTable d(values);
    OracleBest best;
    std::vector<std::size_t> cuts = {0};
    enumerate(d, values.size(), k, cuts, best);
    seg::Partition p;
    p.boundaries = best.boundaries;
    // Left-to-right recompute, matching the reported loss convention.
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t lo = p.boundaries[s];
        const std::size_t hi = (s + 1 < k ? p.boundaries[s + 1] : values.size()) - 1;
        p.loss += d(lo, hi);
    }
    return p;
}

}  // namespace

TEST_CASE("diameter worked examples") {
    const std::vector<double> v = {1.0, 2.0, 10.0, 11.0};
    CHECK(seg::diameter(v, 0, 0) == 0.0);
    CHECK(seg::diameter(v, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(seg::diameter(v, 2, 3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(seg::diameter(v, 0, 3) == doctest::Approx(82.0).epsilon(1e-12));
}

TEST_CASE("diameter table matches the quadratic formula") {
    Xoshiro256 rng(15);
    std::vector<double> v(40);
    for (double& x : v) x = rng.uniform();
    std::sort(v.begin(), v.end());
    const seg::DiameterTable table(v);
    REQUIRE(table.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i; j < v.size(); ++j) {
            const double expect = brute_diameter(v, i, j);
            CHECK(table(i, j) == doctest::Approx(expect).epsilon(1e-9));
            CHECK(table(i, j) >= 0.0);
        }
    }
    // Constant runs have (numerically) zero spread.
    const std::vector<double> flat(12, 0.1);
    const seg::DiameterTable zero(flat);
    CHECK(zero(0, 11) <= 1e-12);
    CHECK(zero(3, 7) <= 1e-12);
}

TEST_CASE("optimal partition hand examples") {
    const std::vector<double> v = {1.0, 2.0, 10.0, 11.0};

    const auto whole = seg::optimal_partition(v, 1);
    CHECK(whole.boundaries == std::vector<std::size_t>{0});
    CHECK(whole.loss == doctest::Approx(82.0).epsilon(1e-12));

    const auto halves = seg::optimal_partition(v, 2);
    CHECK(halves.boundaries == std::vector<std::size_t>{0, 2});
    CHECK(halves.loss == doctest::Approx(1.0).epsilon(1e-12));

    // k=3 ties 0.5 between {0,1,2} and {0,2,3}; the smaller vector wins.
    const auto thirds = seg::optimal_partition(v, 3);
    CHECK(thirds.boundaries == std::vector<std::size_t>{0, 1, 2});
    CHECK(thirds.loss == doctest::Approx(0.5).epsilon(1e-12));

    const auto all = seg::optimal_partition(v, 4);
    CHECK(all.boundaries == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(all.loss == 0.0);
}

TEST_CASE("ties resolve to the lexicographically smallest boundaries") {
    const auto flat = seg::optimal_partition(std::vector<double>{5.0, 5.0, 5.0}, 2);
    CHECK(flat.boundaries == std::vector<std::size_t>{0, 1});
    CHECK(flat.loss <= 1e-12);

    // {0,1} and {0,3} both cost exactly 6; {0,1} is smaller.
    const auto skew = seg::optimal_partition(std::vector<double>{0.0, 3.0, 3.0, 6.0}, 2);
    CHECK(skew.boundaries == std::vector<std::size_t>{0, 1});
    CHECK(skew.loss == 6.0);
}

TEST_CASE("dynamic program equals exhaustive enumeration") {
    Xoshiro256 rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> v(n);
        if (trial % 2 == 0) {
            for (double& x : v) x = rng.uniform();
        } else {
            // Tie-heavy quantized values.
            for (double& x : v) x = 0.5 * static_cast<double>(rng.below(5));
        }
        std::sort(v.begin(), v.end());
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
        const auto got = seg::optimal_partition(v, k);
        const auto want = oracle_partition(v, k);
        REQUIRE(got.boundaries == want.boundaries);
        REQUIRE(got.loss == want.loss);
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("loss is non-increasing in the segment count") {
    Xoshiro256 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> v(20);
        for (double& x : v) x = rng.uniform();
        std::sort(v.begin(), v.end());
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k <= 8; ++k) {
            const double loss = seg::optimal_partition(v, k).loss;
            CHECK(loss <= prev + 1e-12 * std::max(1.0, prev));
            prev = loss;
        }
        CHECK(seg::optimal_partition(v, v.size()).loss == 0.0);
    }
}

TEST_CASE("boundaries are invariant under affine rescaling") {
    Xoshiro256 rng(7);
    std::vector<double> v(60);
    for (double& x : v) x = rng.uniform();
    std::sort(v.begin(), v.end());
    std::vector<double> scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = 3.0 * v[i] + 2.0;
    for (std::size_t k : {2, 4, 7}) {
        const auto a = seg::optimal_partition(v, k);
        const auto b = seg::optimal_partition(scaled, k);
        CHECK(a.boundaries == b.boundaries);
        CHECK(b.loss == doctest::Approx(9.0 * a.loss).epsilon(1e-9));
    }
}

TEST_CASE("optimal partition input validation") {
    const std::vector<double> v = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(seg::optimal_partition(v, 0), ValidationError);
    CHECK_THROWS_AS(seg::optimal_partition(v, 4), ValidationError);
    CHECK_THROWS_AS(seg::optimal_partition(std::vector<double>{}, 1), ValidationError);
    CHECK_THROWS_AS(seg::optimal_partition(std::vector<double>{2.0, 1.0}, 1),
                    ValidationError);
    CHECK_THROWS_AS(
        seg::optimal_partition(
            std::vector<double>{0.0, std::numeric_limits<double>::quiet_NaN()}, 1),
        ValidationError);
}

TEST_CASE("band edges are midpoints between adjacent segments") {
    const std::vector<double> simple = {0.0, 0.0, 1.0, 1.0};
    const auto edges = seg::derive_band_edges(simple, 2);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0] == doctest::Approx(0.5).epsilon(1e-12));

    Xoshiro256 rng(31);
    std::vector<double> scores(80);
    for (double& s : scores) s = rng.uniform();
    const std::size_t k = 7;
    const auto got = seg::derive_band_edges(scores, k);
    REQUIRE(got.size() == k - 1);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] > 0.0);
        CHECK(got[i] < 1.0);
        if (i > 0) CHECK(got[i] > got[i - 1]);
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const auto part = seg::optimal_partition(sorted, k);
    for (std::size_t i = 1; i < part.boundaries.size(); ++i) {
        const std::size_t b = part.boundaries[i];
        CHECK(got[i - 1] == 0.5 * (sorted[b - 1] + sorted[b]));
    }
}

TEST_CASE("band edge validation") {
    CHECK_THROWS_AS(seg::derive_band_edges(std::vector<double>{0.2, 0.2, 0.2}, 2),
                    ValidationError);
    CHECK_THROWS_AS(seg::derive_band_edges(std::vector<double>{0.1, 1.2}, 2),
                    ValidationError);
    CHECK_THROWS_AS(seg::derive_band_edges(std::vector<double>{-0.1, 0.5}, 2),
                    ValidationError);
    CHECK_THROWS_AS(seg::derive_band_edges(std::vector<double>{0.1, 0.9}, 1),
                    ValidationError);
}
