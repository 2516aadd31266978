#include "mddra/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mddra/errors.hpp"

namespace mddra::seg {

namespace {

void check_series(std::span<const double> values) {
    if (values.empty()) throw ValidationError("series is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw ValidationError("series value at index " + std::to_string(i) +
                                  " is not finite");
        if (i > 0 && values[i] < values[i - 1])
            throw ValidationError("series must be sorted ascending (violated at index " +
                                  std::to_string(i) + ")");
    }
}

}  // namespace

DiameterTable::DiameterTable(std::span<const double> values) {
    prefix_.resize(values.size() + 1, 0.0);
    prefix_sq_.resize(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        prefix_[i + 1] = prefix_[i] + values[i];
        prefix_sq_[i + 1] = prefix_sq_[i] + values[i] * values[i];
    }
}

double DiameterTable::operator()(std::size_t i, std::size_t j) const {
    if (i > j || j >= size()) throw ValidationError("diameter range out of bounds");
    // One point has no scatter; skipping the subtraction avoids leaving an
    // ulp-sized residue from the prefix sums.
    if (i == j) return 0.0;
    const double n = static_cast<double>(j - i + 1);
    const double sum = prefix_[j + 1] - prefix_[i];
    const double sum_sq = prefix_sq_[j + 1] - prefix_sq_[i];
    // Catastrophic cancellation can leave a tiny negative for constant runs.
    return std::max(0.0, sum_sq - (sum * sum) / n);
}

double diameter(std::span<const double> values, std::size_t i, std::size_t j) {
    check_series(values);
    return DiameterTable(values)(i, j);
}

Partition optimal_partition(std::span<const double> values, std::size_t k) {
    check_series(values);
    const std::size_t n = values.size();
    if (k == 0) throw ValidationError("segment count k must be >= 1");
    if (k > n) throw ValidationError("segment count k exceeds series length");

    const DiameterTable d(values);

    // suffix[i]: minimal loss of splitting values[i..n-1] into m segments,
    // for the layer m currently being built. choice[m][i] is the leftmost
    // optimal start of the following segment; leftmost argmins are monotone
    // in i (the cost is Monge), which both makes the divide-and-conquer
    // valid and yields the lexicographically smallest boundary vector on
    // backtracking.
    std::vector<double> suffix(n), next_suffix(n);
    std::vector<std::vector<std::size_t>> choice(
        k + 1, std::vector<std::size_t>());

    for (std::size_t i = 0; i < n; ++i) suffix[i] = d(i, n - 1);

    for (std::size_t m = 2; m <= k; ++m) {
        // Row i valid while the suffix holds at least m elements.
        const std::size_t last_row = n - m;
        const std::size_t j_max = n - (m - 1);  // last feasible segment start
        choice[m].assign(last_row + 1, 0);

        // Iterative divide and conquer over rows [lo, hi] with the argmin
        // bracketed in [jlo, jhi].
        struct Span {
            std::size_t lo, hi, jlo, jhi;
        };
        std::vector<Span> work;
        work.push_back({0, last_row, 1, j_max});
        while (!work.empty()) {
            const Span s = work.back();
            work.pop_back();
            if (s.lo > s.hi) continue;
            const std::size_t mid = s.lo + (s.hi - s.lo) / 2;
            const std::size_t j_begin = std::max(s.jlo, mid + 1);
            const std::size_t j_end = std::min(s.jhi, j_max);
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_j = j_begin;
            for (std::size_t j = j_begin; j <= j_end; ++j) {
                const double cost = d(mid, j - 1) + suffix[j];
                if (cost < best) {
                    best = cost;
                    best_j = j;
                }
            }
            next_suffix[mid] = best;
            choice[m][mid] = best_j;
            if (mid > s.lo) work.push_back({s.lo, mid - 1, s.jlo, best_j});
            if (mid < s.hi) work.push_back({mid + 1, s.hi, best_j, s.jhi});
        }
        std::swap(suffix, next_suffix);
    }

    Partition part;
    part.boundaries.reserve(k);
    part.boundaries.push_back(0);
    std::size_t at = 0;
    for (std::size_t m = k; m >= 2; --m) {
        at = choice[m][at];
        part.boundaries.push_back(at);
    }

    // Left-to-right recomputation over the final boundaries, matching the
    // accumulation order of a plain enumeration.
    double loss = 0.0;
    for (std::size_t s = 0; s < part.boundaries.size(); ++s) {
        const std::size_t start = part.boundaries[s];
        const std::size_t end =
            (s + 1 < part.boundaries.size()) ? part.boundaries[s + 1] - 1 : n - 1;
        loss += d(start, end);
    }
    part.loss = loss;
    return part;
}

std::vector<double> derive_band_edges(std::span<const double> scores, std::size_t k) {
    if (k < 2) throw ValidationError("band derivation needs k >= 2");
    std::vector<double> sorted(scores.begin(), scores.end());
    for (double v : sorted)
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError("scores must lie in [0, 1]");
    std::sort(sorted.begin(), sorted.end());
    const std::set<double> distinct(sorted.begin(), sorted.end());
    if (distinct.size() < k)
        throw ValidationError("need at least k distinct score values");

    const Partition part = optimal_partition(sorted, k);
    std::vector<double> edges;
    edges.reserve(k - 1);
    for (std::size_t s = 1; s < part.boundaries.size(); ++s) {
        const std::size_t b = part.boundaries[s];
        edges.push_back(0.5 * (sorted[b - 1] + sorted[b]));
    }
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw ValidationError("degenerate clustering: thresholds not strictly increasing");
    return edges;
}

}  // namespace mddra::seg
