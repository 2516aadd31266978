#include "mddra/trip_io.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mddra/errors.hpp"

namespace mddra::io {

namespace {

constexpr const char* kHeader =
    "frame,hand_state,road_type,face_orientation,illumination,eye_gaze,weather,"
    "manoeuvre,surroundings,pedestrians,speed_mph";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, std::size_t row, const char* column) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("row " + std::to_string(row) + ", column " + column +
                              ": cannot parse number '" + text + "'");
    return v;
}

std::int64_t parse_int(const std::string& text, std::size_t row, const char* column) {
    std::int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("row " + std::to_string(row) + ", column " + column +
                              ": cannot parse integer '" + text + "'");
    return v;
}

}  // namespace

TripRecord parse_trip(const std::string& csv_text) {
    TripRecord trip;
    std::istringstream in(csv_text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool with_label = false;
    std::size_t row = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen && line.front() == '#') {
            // Metadata comments: "# key=value". Unrecognized comments pass.
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                const std::string value = line.substr(eq + 1);
                while (!key.empty() && key.front() == ' ') key.erase(key.begin());
                while (!key.empty() && key.back() == ' ') key.pop_back();
                if (key == "trip_id") trip.metadata.trip_id = value;
                else if (key == "driver_id") trip.metadata.driver_id = value;
                else if (key == "frame_rate_hz")
                    trip.metadata.frame_rate_hz = parse_double(value, 0, "frame_rate_hz");
                else if (key == "seed")
                    trip.metadata.seed =
                        static_cast<std::uint64_t>(parse_int(value, 0, "seed"));
            }
            continue;
        }
        if (!header_seen) {
            if (line == kHeader) {
                with_label = false;
            } else if (line == std::string(kHeader) + ",label") {
                with_label = true;
            } else {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": unexpected header '" + line + "'");
            }
            header_seen = true;
            continue;
        }

        ++row;
        const auto fields = split_csv(line);
        const std::size_t expected = with_label ? kParameterCount + 3 : kParameterCount + 2;
        if (fields.size() != expected)
            throw ValidationError("row " + std::to_string(row) + ": expected " +
                                  std::to_string(expected) + " fields, got " +
                                  std::to_string(fields.size()));
        FrameObservation f;
        f.frame = parse_int(fields[0], row, "frame");
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            if (fields[p + 1].empty())
                throw ValidationError("row " + std::to_string(row) + ", column " +
                                      kParameterNames[p] + ": empty action");
            f.actions[p] = fields[p + 1];
        }
        f.speed_mph = parse_double(fields[kParameterCount + 1], row, "speed_mph");
        trip.frames.push_back(std::move(f));
        if (with_label) trip.labels.push_back(fields[kParameterCount + 2]);
    }
    if (!header_seen) throw ValidationError("trip CSV has no header line");
    return trip;
}

std::string serialize_trip(const TripRecord& trip) {
    std::string out;
    if (!trip.metadata.trip_id.empty())
        out += "# trip_id=" + trip.metadata.trip_id + "\n";
    if (!trip.metadata.driver_id.empty())
        out += "# driver_id=" + trip.metadata.driver_id + "\n";
    if (trip.metadata.frame_rate_hz != 30.0)
        out += "# frame_rate_hz=" + format_double(trip.metadata.frame_rate_hz) + "\n";
    if (trip.metadata.seed)
        out += "# seed=" + std::to_string(*trip.metadata.seed) + "\n";
    out += kHeader;
    if (trip.has_labels()) out += ",label";
    out += "\n";
    for (std::size_t i = 0; i < trip.frames.size(); ++i) {
        const FrameObservation& f = trip.frames[i];
        out += std::to_string(f.frame);
        for (const auto& a : f.actions) {
            out += ',';
            out += a;
        }
        out += ',';
        out += format_double(f.speed_mph);
        if (trip.has_labels()) {
            out += ',';
            out += trip.labels[i];
        }
        out += '\n';
    }
    return out;
}

TripRecord read_trip_file(const std::string& path) {
    return parse_trip(read_file(path));
}

void write_trip_file(const TripRecord& trip, const std::string& path) {
    atomic_write(path, serialize_trip(trip));
}

std::string serialize_assessments(std::span<const FrameAssessment> rows) {
    std::string out =
        "frame,frame_score,aggregate_score,band,rank,likelihood,risk_value,takeover\n";
    char buf[64];
    for (const auto& a : rows) {
        out += std::to_string(a.frame);
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,", a.frame_score, a.aggregate_score);
        out += buf;
        out += a.band().color;
        std::snprintf(buf, sizeof(buf), ",%d,%d,%d,", a.rank, a.likelihood, a.risk_value);
        out += buf;
        out += a.takeover ? "true" : "false";
        out += '\n';
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path dir = target.parent_path().empty() ? "." : target.parent_path();
    const fs::path tmp = dir / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write file '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw ValidationError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw ValidationError("cannot move '" + tmp.string() + "' into place: " +
                              ec.message());
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return std::string(buf);
}

}  // namespace mddra::io
