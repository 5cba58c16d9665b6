#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "anchorlab/box.hpp"

namespace anchorlab {

/*----------------------------------------------------------------------
  KITTI object label format: one object per line,
  15 whitespace-separated fields for ground truth,
  16 for detector results (trailing confidence score):

    type truncated occluded alpha  left top right bottom
    height width length  x y z  rotation_y  [score]
----------------------------------------------------------------------*/

struct GroundTruthObject {
    std::string class_name;
    double truncation = 0.0;  // 0 (visible) .. 1 (fully truncated); -1 on DontCare rows
    int occlusion = 0;        // 0,1,2,3; -1 on DontCare rows
    double alpha = 0.0;       // observation angle, radians
    Box2D bbox;
    double dim_height = 0.0;  // 3D extents, meters
    double dim_width = 0.0;
    double dim_length = 0.0;
    double loc_x = 0.0;  // 3D location in camera coordinates, meters
    double loc_y = 0.0;
    double loc_z = 0.0;
    double rotation_y = 0.0;

    bool dont_care() const { return class_name == "DontCare"; }
};

struct Detection : GroundTruthObject {
    double score = 0.0;  // higher = more confident
};

enum class DifficultyBin { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };

inline const char* to_string(DifficultyBin bin) {
    switch (bin) {
        case DifficultyBin::Easy: return "Easy";
        case DifficultyBin::Moderate: return "Moderate";
        case DifficultyBin::Hard: return "Hard";
        default: return "Ignored";
    }
}

// KITTI development-kit regimes, indexed by Easy/Moderate/Hard.
struct DifficultyThresholds {
    double min_height;
    int max_occlusion;
    double max_truncation;
};

inline constexpr std::array<DifficultyThresholds, 3> kDifficultyThresholds = {{
    {40.0, 0, 0.15},
    {25.0, 1, 0.30},
    {25.0, 2, 0.50},
}};

// Easiest bin whose thresholds the object satisfies; depends only on box
// height, occlusion level and truncation fraction. DontCare rows are Ignored.
inline DifficultyBin classify_difficulty(const GroundTruthObject& obj) {
    if (obj.dont_care()) return DifficultyBin::Ignored;
    const double height = obj.bbox.height();
    for (int level = 0; level < 3; ++level) {
        const DifficultyThresholds& t = kDifficultyThresholds[static_cast<std::size_t>(level)];
        if (height >= t.min_height && obj.occlusion <= t.max_occlusion &&
            obj.truncation <= t.max_truncation) {
            return static_cast<DifficultyBin>(level);
        }
    }
    return DifficultyBin::Ignored;
}

class parse_error : public std::runtime_error {
public:
    parse_error(std::size_t line, const std::string& message)
        : parse_error("line " + std::to_string(line) + ": " + message, line) {}

    std::size_t line() const { return line_; }

    // same error with the file path prepended
    parse_error in_file(const std::string& path) const {
        return parse_error(path + ": " + what(), line_);
    }

private:
    parse_error(const std::string& full_message, std::size_t line)
        : std::runtime_error(full_message), line_(line) {}

    std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

// Accepts integer and decimal notation alike; rejects inf/nan and trailing junk.
inline double parse_real(std::string_view token, std::size_t line, const char* field) {
    double value = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw parse_error(line, std::string("field '") + field + "' is not numeric: '" +
                                    std::string(token) + "'");
    }
    if (!std::isfinite(value)) {
        throw parse_error(line, std::string("field '") + field + "' must be finite: '" +
                                    std::string(token) + "'");
    }
    return value;
}

inline int parse_integer(std::string_view token, std::size_t line, const char* field) {
    const double value = parse_real(token, line, field);
    const double rounded = std::nearbyint(value);
    if (value != rounded) {
        throw parse_error(line, std::string("field '") + field + "' must be an integer: '" +
                                    std::string(token) + "'");
    }
    return static_cast<int>(rounded);
}

// Geometry must be valid on every row; truncation/occlusion ranges are only
// enforced on ground-truth rows (detector results conventionally carry -1
// placeholders and DontCare regions use -1 as well).
inline void fill_object(GroundTruthObject& obj, const std::vector<std::string_view>& f,
                        std::size_t line, bool is_ground_truth) {
    obj.class_name = std::string(f[0]);
    obj.truncation = parse_real(f[1], line, "truncated");
    obj.occlusion = parse_integer(f[2], line, "occluded");
    obj.alpha = parse_real(f[3], line, "alpha");
    obj.bbox.left = parse_real(f[4], line, "bbox.left");
    obj.bbox.top = parse_real(f[5], line, "bbox.top");
    obj.bbox.right = parse_real(f[6], line, "bbox.right");
    obj.bbox.bottom = parse_real(f[7], line, "bbox.bottom");
    obj.dim_height = parse_real(f[8], line, "dim.height");
    obj.dim_width = parse_real(f[9], line, "dim.width");
    obj.dim_length = parse_real(f[10], line, "dim.length");
    obj.loc_x = parse_real(f[11], line, "loc.x");
    obj.loc_y = parse_real(f[12], line, "loc.y");
    obj.loc_z = parse_real(f[13], line, "loc.z");
    obj.rotation_y = parse_real(f[14], line, "rotation_y");

    if (!(obj.bbox.left < obj.bbox.right) || !(obj.bbox.top < obj.bbox.bottom)) {
        throw parse_error(line, "bbox must satisfy left < right and top < bottom");
    }
    if (is_ground_truth && !obj.dont_care()) {
        if (obj.truncation < 0.0 || obj.truncation > 1.0) {
            throw parse_error(line, "truncation must lie in [0,1]");
        }
        if (obj.occlusion < 0 || obj.occlusion > 3) {
            throw parse_error(line, "occlusion must be one of {0,1,2,3}");
        }
    }
}

// fixed 2-decimal formatting, locale independent
inline void append_real(std::string& out, double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 2);
    out.append(buf, ptr);
}

inline void append_object(std::string& out, const GroundTruthObject& obj) {
    out += obj.class_name;
    out += ' ';
    append_real(out, obj.truncation);
    out += ' ';
    out += std::to_string(obj.occlusion);
    out += ' ';
    append_real(out, obj.alpha);
    for (double v : {obj.bbox.left, obj.bbox.top, obj.bbox.right, obj.bbox.bottom, obj.dim_height,
                     obj.dim_width, obj.dim_length, obj.loc_x, obj.loc_y, obj.loc_z,
                     obj.rotation_y}) {
        out += ' ';
        append_real(out, v);
    }
}

}  // namespace detail

inline std::vector<GroundTruthObject> parse_label_file(std::istream& in) {
    std::vector<GroundTruthObject> objects;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = detail::split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 15) {
            throw parse_error(line_no, "expected 15 fields, got " + std::to_string(fields.size()));
        }
        GroundTruthObject obj;
        detail::fill_object(obj, fields, line_no, /*is_ground_truth=*/true);
        objects.push_back(std::move(obj));
    }
    return objects;
}

inline std::vector<Detection> parse_result_file(std::istream& in) {
    std::vector<Detection> detections;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = detail::split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 16) {
            throw parse_error(line_no, "expected 16 fields, got " + std::to_string(fields.size()));
        }
        Detection det;
        detail::fill_object(det, fields, line_no, /*is_ground_truth=*/false);
        det.score = detail::parse_real(fields[15], line_no, "score");
        detections.push_back(std::move(det));
    }
    return detections;
}

inline std::vector<GroundTruthObject> parse_label_text(const std::string& text) {
    std::istringstream in(text);
    return parse_label_file(in);
}

inline std::vector<Detection> parse_result_text(const std::string& text) {
    std::istringstream in(text);
    return parse_result_file(in);
}

inline std::string serialize(std::span<const GroundTruthObject> objects) {
    std::string out;
    for (const GroundTruthObject& obj : objects) {
        detail::append_object(out, obj);
        out += '\n';
    }
    return out;
}

inline std::string serialize(std::span<const Detection> detections) {
    std::string out;
    for (const Detection& det : detections) {
        detail::append_object(out, det);
        out += ' ';
        detail::append_real(out, det.score);
        out += '\n';
    }
    return out;
}

/*----------------------------------------------------------------------
  File and directory helpers. A dataset is any directory of per-frame
  label files named <frame_id>.txt.
----------------------------------------------------------------------*/

struct FrameFile {
    std::string frame_id;  // filename stem
    std::filesystem::path path;
};

inline std::vector<FrameFile> list_frame_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("not a directory: " + dir.string());
    }
    std::vector<FrameFile> frames;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            frames.push_back({entry.path().stem().string(), entry.path()});
        }
    }
    std::sort(frames.begin(), frames.end(),
              [](const FrameFile& a, const FrameFile& b) { return a.frame_id < b.frame_id; });
    return frames;
}

namespace detail {
inline std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}
}  // namespace detail

inline std::vector<GroundTruthObject> read_label_file(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path);
    try {
        return parse_label_file(in);
    } catch (const parse_error& e) {
        throw e.in_file(path.string());
    }
}

inline std::vector<Detection> read_result_file(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path);
    try {
        return parse_result_file(in);
    } catch (const parse_error& e) {
        throw e.in_file(path.string());
    }
}

inline void write_result_file(const std::filesystem::path& path,
                              std::span<const Detection> detections) {
    std::ofstream out(path, std::ios::binary);  // binary keeps '\n' on every platform
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize(detections);
}

}  // namespace anchorlab
