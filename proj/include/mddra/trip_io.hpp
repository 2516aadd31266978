#pragma once

#include <span>
#include <string>

#include "mddra/severity.hpp"
#include "mddra/trip.hpp"

namespace mddra::io {

// Trip CSV: optional leading "# key=value" metadata comments, then the exact
// header
//   frame,hand_state,road_type,face_orientation,illumination,eye_gaze,
//   weather,manoeuvre,surroundings,pedestrians,speed_mph[,label]
// one row per frame, UTF-8, LF. Parse errors name the row and column.
TripRecord parse_trip(const std::string& csv_text);
std::string serialize_trip(const TripRecord& trip);

TripRecord read_trip_file(const std::string& path);
void write_trip_file(const TripRecord& trip, const std::string& path);

// Score report CSV:
//   frame,frame_score,aggregate_score,band,rank,likelihood,risk_value,takeover
// Scores carry six decimal places; band is the colour token.
std::string serialize_assessments(std::span<const FrameAssessment> rows);

std::string read_file(const std::string& path);
// Write-temp-then-rename in the target directory.
void atomic_write(const std::string& path, const std::string& content);

// FNV-1a 64-bit, hex-encoded; used for config hashes in manifests.
std::string fnv1a_hex(const std::string& text);

}  // namespace mddra::io
