#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mddra/catalog.hpp"

namespace mddra {

struct TripMetadata {
    std::string trip_id;
    std::string driver_id;
    double frame_rate_hz = 30.0;
    std::optional<std::uint64_t> seed;  // set for synthetic trips

    bool operator==(const TripMetadata&) const = default;
};

struct FrameObservation {
    std::int64_t frame = 0;
    std::array<std::string, kParameterCount> actions;  // ordered per kParameterNames
    double speed_mph = 0.0;

    const std::string& action(Param p) const { return actions[idx(p)]; }
    std::string& action(Param p) { return actions[idx(p)]; }

    bool operator==(const FrameObservation&) const = default;
};

struct TripRecord {
    TripMetadata metadata;
    std::vector<FrameObservation> frames;
    std::vector<std::string> labels;  // empty, or one class token per frame

    bool has_labels() const { return !labels.empty(); }

    // Frame indices strictly increasing, actions known to the catalog,
    // speeds finite and non-negative, label count matching. Error messages
    // name the offending row and column.
    void validate(const ParameterCatalog& catalog) const;

    bool operator==(const TripRecord&) const = default;
};

}  // namespace mddra
