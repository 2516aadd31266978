#include "mddra/trip.hpp"

#include <cmath>
#include <string>

#include "mddra/errors.hpp"

namespace mddra {

void TripRecord::validate(const ParameterCatalog& catalog) const {
    if (!labels.empty() && labels.size() != frames.size())
        throw ValidationError("label count (" + std::to_string(labels.size()) +
                              ") does not match frame count (" +
                              std::to_string(frames.size()) + ")");
    std::int64_t prev = 0;
    bool first = true;
    for (std::size_t row = 0; row < frames.size(); ++row) {
        const FrameObservation& f = frames[row];
        const std::string where = "frame row " + std::to_string(row);
        if (!first && f.frame <= prev)
            throw ValidationError(where + ": frame index " + std::to_string(f.frame) +
                                  " is not strictly increasing");
        prev = f.frame;
        first = false;
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            const ParameterSpec& spec = catalog.parameter(kParameterNames[p]);
            if (!spec.has_action(f.actions[p]))
                throw ValidationError(where + ", column " + kParameterNames[p] +
                                      ": unknown action '" + f.actions[p] + "'");
        }
        if (!std::isfinite(f.speed_mph) || f.speed_mph < 0.0)
            throw ValidationError(where +
                                  ", column speed_mph: must be finite and >= 0");
    }
}

}  // namespace mddra
