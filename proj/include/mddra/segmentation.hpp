#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mddra::seg {

// Within-segment sum of squared deviations from the segment mean, answered
// in O(1) from prefix sums of values and squares.
class DiameterTable {
public:
    explicit DiameterTable(std::span<const double> values);

    // Inclusive 0-based range [i, j].
    double operator()(std::size_t i, std::size_t j) const;
    std::size_t size() const { return prefix_.size() - 1; }

private:
    std::vector<double> prefix_;
    std::vector<double> prefix_sq_;
};

double diameter(std::span<const double> values, std::size_t i, std::size_t j);

struct Partition {
    // Segment start indices; boundaries[0] == 0, strictly increasing.
    std::vector<std::size_t> boundaries;
    // Sum of segment diameters, accumulated left to right over the final
    // boundaries so it is bit-comparable with an enumeration oracle.
    double loss = 0.0;
};

// Optimal k-segment partition of an ascending series, minimizing the summed
// diameters. Ties resolve to the lexicographically smallest boundary vector.
// Errors: k == 0, k > n, unsorted or non-finite input.
Partition optimal_partition(std::span<const double> values, std::size_t k);

// Sorts the scores, partitions into k segments, and returns the k-1
// thresholds as midpoints between adjacent segment boundary values.
// Errors: scores outside [0,1], k < 2, fewer than k distinct values.
std::vector<double> derive_band_edges(std::span<const double> scores, std::size_t k);

}  // namespace mddra::seg
