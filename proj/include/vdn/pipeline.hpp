#pragma once

#include "vdn/decode.hpp"
#include "vdn/geometry.hpp"
#include "vdn/image.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace vdn {

struct DialGroup {
    int id = 0;
    std::vector<std::size_t> indices;  // scale points of this dial, in polyline order

    friend bool operator==(const DialGroup&, const DialGroup&) = default;
};

/// Labeled template meter: ordered scale points with their values.
struct MeterTemplate {
    BBox bbox;
    std::vector<Point> scale_points;
    std::vector<double> scale_values;
    // Empty means a single dial made of every scale point.
    std::vector<DialGroup> dial_groups;

    /// Throws DataError unless e >= 2, counts agree, consecutive points differ
    /// and group indices are valid.
    void validate() const;
    std::vector<DialGroup> effective_groups() const;
    double full_scale_range() const;

    friend bool operator==(const MeterTemplate&, const MeterTemplate&) = default;
};

inline constexpr const char* kTemplateVersion = "meter-template-1";

void to_json(nlohmann::json& j, const MeterTemplate& t);
void from_json(const nlohmann::json& j, MeterTemplate& t);
MeterTemplate read_template(const std::filesystem::path& path);
void write_template(const MeterTemplate& t, const std::filesystem::path& path);

/// Center of a dial: centroid of its (projected) scale points.
Point dial_center(std::span<const Point> scale_points, const DialGroup& group);

/// KNN (k = 1) assignment of a pinpoint to a dial; returns the dial id.
int assign_pointer_to_dial(Point pinpoint, std::span<const Point> scale_points, std::span<const DialGroup> groups);

struct Reading {
    std::size_t pointer = 0;  // index into the detection list
    double value = 0.0;
    std::size_t segment = 0;
    Point point;
};

struct PointerReading {
    std::size_t pointer = 0;
    int dial = 0;
    std::optional<Reading> reading;  // empty: the ray crosses no scale segment
};

/// Projects template scale points with M, assigns every detection (in image
/// pixels) to a dial, intersects its ray with that dial's polyline and
/// interpolates. Unread pointers are reported, never dropped.
std::vector<PointerReading> read_meter(std::span<const VectorDetection> detections, const MeterTemplate& tmpl,
                                       const Homography& template_to_image);

/// Template-to-image homography from the four bounding-box corners.
Homography bbox_homography(const BBox& template_box, const BBox& image_box);

/// Post-processing hook turning per-pointer readings into semantic values.
using ReadingCombiner = std::function<std::map<int, std::vector<double>>(std::span<const PointerReading>)>;

/// Built-in rule: each dial is independent; values grouped by dial id.
std::map<int, std::vector<double>> combine_independent_dials(std::span<const PointerReading> readings);

}  // namespace vdn
