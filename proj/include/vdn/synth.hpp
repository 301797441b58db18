#pragma once

#include "vdn/annotations.hpp"
#include "vdn/image.hpp"
#include "vdn/pipeline.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace vdn {

using Rgb = std::array<std::uint8_t, 3>;

struct PointerSpec {
    double value = 0.0;
    // When set, overrides `value`: angle in degrees, x right / y down.
    std::optional<double> angle_deg;
    double length_ratio = 0.7;  // tip distance from center / radius, in (0, 1]
    double tail_ratio = 0.15;   // tail distance behind the center / radius
    double width = 3.0;         // pixels at the tail
    Rgb color{20, 20, 20};
    bool out_of_range = false;  // value may lie outside the scale
};

struct Degradation {
    double blur_radius = 0.0;  // pixels
    double noise_std = 0.0;    // on the [0, 1] intensity scale
    double brightness = 1.0;
    bool glare = false;

    /// blur >= 2 px, noise >= 0.1 or glare.
    bool is_hard() const;
};

/// Everything needed to render one gauge deterministically.
struct DialSpec {
    int image_width = 160;
    int image_height = 160;
    Point center{80.0, 80.0};
    double radius = 60.0;
    // Scale arc, degrees, increasing clockwise on screen (y down).
    double arc_start_deg = 135.0;
    double arc_end_deg = 405.0;
    std::vector<double> tick_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    double scale_radius_ratio = 0.86;  // inner end of the major ticks = template scale points
    int minor_ticks = 4;
    std::vector<PointerSpec> pointers{PointerSpec{}};
    Degradation degradation;
    double face_gray = 0.92;
    double background_gray = 0.45;
    std::array<double, 3> tint{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on inconsistent specs.
    void validate() const;
    double value_to_angle_deg(double v) const;
    double angle_to_value(double angle_deg) const;
    double pointer_angle_deg(const PointerSpec& p) const;
    double pointer_value(const PointerSpec& p) const;
    BBox dial_bbox() const;
    std::vector<Point> scale_points() const;
};

struct RenderedDial {
    Image image;
    ImageRecord record;  // one meter with its pointer labels and template fields
};

/// Renders the dial and its exact labels. Degradations are applied after the
/// labels are computed and never move them.
RenderedDial render_dial(const DialSpec& spec);

struct SampleRanges {
    double radius_min = 32.0;
    double radius_max = 90.0;
    double margin_min = 4.0;
    double margin_max = 36.0;
    int ticks_min = 7;
    int ticks_max = 13;
    double arc_span_min_deg = 240.0;
    double arc_span_max_deg = 300.0;
    double two_pointer_fraction = 0.25;
    double out_of_range_fraction = 0.05;
    double length_ratio_min = 0.55;
    double length_ratio_max = 0.75;
    double blur_fraction = 0.35;
    double blur_max = 2.5;
    double noise_fraction = 0.4;
    double noise_max = 0.12;
    double glare_fraction = 0.1;
    double brightness_min = 0.65;
    double brightness_max = 1.15;
};

/// Draws a random dial: pointer angles uniform over the scale arc (or over the
/// gap for the out-of-range fraction), randomized ticks, radii and degradations.
DialSpec sample_spec(std::mt19937_64& rng, const SampleRanges& ranges = {});

/// Template of a rendered dial in a canonical frame: bbox [0, 0, 2R, 2R],
/// center (R, R) with R = template_radius.
MeterTemplate canonical_template(const DialSpec& spec, double template_radius = 100.0);

struct SplitRatios {
    double train = 7.0;
    double val = 2.0;
    double test = 1.0;
    double total = 10.0;
};

struct DatasetSplit {
    std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle into disjoint, exhaustive splits. With hard_quota > 0 the
/// test split is filled with that fraction of hard samples when enough exist.
DatasetSplit split_dataset(std::span<const bool> hard_flags, const SplitRatios& ratios, std::uint64_t seed,
                           double hard_quota = 0.0);

}  // namespace vdn
