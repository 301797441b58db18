#include "vdn/geometry.hpp"

#include "vdn/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vdn {

double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

Point Homography::apply(Point p) const {
    const double w = m[6] * p.x + m[7] * p.y + m[8];
    if (std::abs(w) < 1e-12) throw NumericError("point maps to the line at infinity");
    return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

double Homography::determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::from_affine(const Affine& a) {
    return Homography{{a.m[0], a.m[1], a.m[2], a.m[3], a.m[4], a.m[5], 0.0, 0.0, 1.0}};
}

namespace {

// Translates the centroid to the origin and scales the mean distance to sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Point> pts) {
    double cx = 0.0, cy = 0.0;
    for (const Point& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean = 0.0;
    for (const Point& p : pts) mean += std::hypot(p.x - cx, p.y - cy);
    mean /= static_cast<double>(pts.size());
    if (!(mean > 0.0)) throw DegenerateError("homography: all points coincide");
    const double s = std::sqrt(2.0) / mean;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

bool collinear(Point a, Point b, Point c) {
    const Point u = b - a, v = c - a;
    const double scale = std::max({norm(u), norm(v), 1e-300});
    return std::abs(cross(u, v)) <= 1e-9 * scale * scale;
}

bool any_three_collinear(std::span<const Point> p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            for (std::size_t k = j + 1; k < p.size(); ++k)
                if (collinear(p[i], p[j], p[k])) return true;
    return false;
}

}  // namespace

HomographyFit estimate_homography(std::span<const Correspondence> pairs) {
    const std::size_t n = pairs.size();
    if (n < 4) throw DegenerateError("homography needs at least 4 correspondences, got " + std::to_string(n));
    std::vector<Point> src, dst;
    for (const Correspondence& c : pairs) {
        src.push_back(c.source);
        dst.push_back(c.target);
    }
    if (n == 4 && (any_three_collinear(src) || any_three_collinear(dst)))
        throw DegenerateError("homography: three of the four correspondences are collinear");

    const Eigen::Matrix3d ts = normalizer(src), td = normalizer(dst);
    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
        const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
        const double x = p.x() / p.z(), y = p.y() / p.z(), u = q.x() / q.z(), v = q.y() / q.z();
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    // A unique solution needs an 8-dimensional row space.
    if (sv.size() < 8 || sv(7) <= 1e-10 * sv(0)) throw DegenerateError("homography: correspondences are rank deficient");
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d full = td.inverse() * hn * ts;
    if (std::abs(full(2, 2)) < 1e-15) throw DegenerateError("homography: cannot normalize (m33 ~ 0)");
    full /= full(2, 2);

    HomographyFit fit;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fit.homography.m[static_cast<std::size_t>(r * 3 + c)] = full(r, c);
    if (std::abs(fit.homography.determinant()) <= 1e-12) throw DegenerateError("homography is singular");

    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = distance(fit.homography.apply(src[i]), dst[i]);
        sq += e * e;
        fit.max_residual = std::max(fit.max_residual, e);
    }
    fit.rms_residual = std::sqrt(sq / static_cast<double>(n));
    return fit;
}

std::vector<Point> project_scale_points(const Homography& h, std::span<const Point> points) {
    std::vector<Point> out;
    out.reserve(points.size());
    for (const Point& p : points) out.push_back(h.apply(p));
    return out;
}

std::optional<RayHit> intersect_ray_polyline(Point origin, Point dir, std::span<const Point> pts) {
    constexpr double kParamTol = 1e-12;
    std::optional<RayHit> best;
    for (std::size_t q = 0; q + 1 < pts.size(); ++q) {
        const Point e = pts[q + 1] - pts[q];
        const double denom = cross(dir, e);
        if (std::abs(denom) < 1e-15 * std::max(1.0, norm(e))) continue;  // parallel
        const Point w = pts[q] - origin;
        const double t = cross(w, e) / denom;
        const double u = cross(w, dir) / denom;
        if (!(t > 0.0) || u < -kParamTol || u > 1.0 + kParamTol) continue;
        if (!best || t < best->t) {
            const double uc = std::clamp(u, 0.0, 1.0);
            best = RayHit{q, pts[q] + uc * e, t, uc};
        }
    }
    return best;
}

double compute_reading(Point p, std::size_t q, std::span<const Point> pts, std::span<const double> values) {
    if (pts.size() != values.size()) throw DataError("scale point and value counts differ");
    if (q + 1 >= pts.size()) throw DataError("segment index out of range");
    const Point a = pts[q], b = pts[q + 1];
    const double len = distance(a, b);
    if (!(len > 0.0)) throw DataError("zero-length scale segment");
    // Perpendicular distance and projection bounds check that p lies on the segment.
    const Point e = b - a, w = p - a;
    const double along = (w.x * e.x + w.y * e.y) / len;
    const double off = std::abs(cross(e, w)) / len;
    if (off > 1e-6 || along < -1e-6 || along > len + 1e-6) throw DataError("point does not lie on scale segment");
    const double d = distance(a, p);
    if (d >= len) return values[q + 1];  // the formula below can be off by an ulp at the far tick
    return d / len * (values[q + 1] - values[q]) + values[q];
}

}  // namespace vdn
