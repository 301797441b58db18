#pragma once

#include "vdn/image.hpp"
#include "vdn/pipeline.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vdn {

/// Three-keypoint pointer label in image pixels: tip, midpoint, tail.
struct PointerLabel {
    Point tip;
    Point midpoint;
    Point tail;
    std::array<int, 3> visibility{2, 2, 2};
    std::optional<double> value;  // renderer ground-truth reading, when known
    bool out_of_range = false;

    static PointerLabel from_tip_tail(Point tip, Point tail);
    friend bool operator==(const PointerLabel&, const PointerLabel&) = default;
};

struct MeterLabel {
    int id = 0;
    BBox bbox;
    std::vector<PointerLabel> pointers;
    // Scale points/values in image pixels; empty when unlabeled.
    std::optional<MeterTemplate> scale;

    friend bool operator==(const MeterLabel&, const MeterLabel&) = default;
};

struct ImageRecord {
    int id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
    bool hard = false;
    std::vector<MeterLabel> meters;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AnnotationSet {
    std::vector<ImageRecord> images;

    friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

/// COCO-style document: one annotation per pointer carrying its meter's bbox
/// and keypoints [tip, midpoint, tail] as (x, y, v) triples, single category
/// "meter"; meter-level fields live in a top-level "meters" array.
nlohmann::json annotations_to_json(const AnnotationSet& set);
/// Throws DataError on malformed documents or keypoint counts other than 3.
AnnotationSet annotations_from_json(const nlohmann::json& j);

void write_annotations(const AnnotationSet& set, const std::filesystem::path& path);
AnnotationSet read_annotations(const std::filesystem::path& path);

}  // namespace vdn
