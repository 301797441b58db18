#pragma once

#include "vdn/image.hpp"

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace vdn {

double cross(Point a, Point b);

/// Planar projective map, row-major, normalized so m[8] == 1.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    /// Throws NumericError if the point maps to the line at infinity.
    Point apply(Point p) const;
    double determinant() const;
    static Homography from_affine(const Affine& a);
};

struct HomographyFit {
    Homography homography;
    double rms_residual = 0.0;  // reprojection error over all pairs, pixels
    double max_residual = 0.0;
};

struct Correspondence {
    Point source;
    Point target;
};

/// Normalized DLT over >= 4 correspondences (source -> target).
/// Throws DegenerateError for collinear or rank-deficient configurations.
HomographyFit estimate_homography(std::span<const Correspondence> pairs);

/// Homogeneous transform with perspective divide of every point.
std::vector<Point> project_scale_points(const Homography& h, std::span<const Point> points);

struct RayHit {
    std::size_t segment = 0;  // q: hit lies on (s_q, s_q+1)
    Point point;
    double t = 0.0;  // ray parameter, > 0
    double u = 0.0;  // segment parameter in [0, 1]
};

/// First crossing (smallest t > 0) of origin + t*dir with the polyline;
/// endpoint hits count. Empty when the ray misses every segment.
std::optional<RayHit> intersect_ray_polyline(Point origin, Point dir, std::span<const Point> scale_points);

/// Linear interpolation of the scale value at p on segment q.
/// Throws DataError for zero-length segments or points off the segment.
double compute_reading(Point p, std::size_t q, std::span<const Point> scale_points, std::span<const double> values);

}  // namespace vdn
