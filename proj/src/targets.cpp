#include "vdn/targets.hpp"

#include "vdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vdn {

GroundTruthVector to_vector(const PointerAnnotation& a) {
    const Point d = a.tip - a.tail;
    const double len = norm(d);
    if (!(len > 0.0)) throw DataError("pointer annotation has tip == tail");
    return {a.tip.x, a.tip.y, d.x / len, d.y / len};
}

Affine crop_transform(const BBox& bbox, int out_size) {
    if (!(bbox.width > 0.0) || !(bbox.height > 0.0)) throw DataError("crop_patch: degenerate bounding box");
    if (out_size <= 0) throw DataError("crop_patch: output size must be positive");
    const double s = std::max(bbox.width, bbox.height) / out_size;
    const Point c = bbox.center();
    const double half = out_size / 2.0;
    return Affine{{s, 0.0, c.x - s * half, 0.0, s, c.y - s * half}};
}

PatchCrop crop_patch(const Image& image, const BBox& bbox, int out_size) {
    const Affine t = crop_transform(bbox, out_size);
    constexpr double tol = 1e-9;
    if (bbox.x < -tol || bbox.y < -tol || bbox.x + bbox.width > image.width + tol ||
        bbox.y + bbox.height > image.height + tol)
        throw DataError("crop_patch: bounding box outside the image");
    return {warp_affine(image, t, out_size, out_size), t};
}

AugmentedPatch apply_similarity(const Image& patch, std::span<const PointerAnnotation> annotations, double scale,
                                double angle_rad) {
    const Point center{(patch.width - 1) / 2.0, (patch.height - 1) / 2.0};
    const Affine t = Affine::similarity(scale, angle_rad, center);
    AugmentedPatch out;
    out.transform = t;
    out.patch = (scale == 1.0 && angle_rad == 0.0) ? patch : warp_affine(patch, t.inverse(), patch.width, patch.height);
    out.annotations.reserve(annotations.size());
    for (const PointerAnnotation& a : annotations) out.annotations.push_back({t.apply(a.tip), t.apply(a.tail)});
    return out;
}

AugmentedPatch augment(const Image& patch, std::span<const PointerAnnotation> annotations, std::mt19937_64& rng,
                       const AugmentConfig& cfg) {
    std::uniform_real_distribution<double> scale_dist(cfg.scale_min, cfg.scale_max);
    const double max_rot = cfg.max_rotation_deg * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> rot_dist(-max_rot, max_rot);
    const double s = scale_dist(rng);
    const double r = rot_dist(rng);
    return apply_similarity(patch, annotations, s, r);
}

Tensor encode_heatmap(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                      double lambda, double sigma) {
    Tensor h({map_height, map_width}, 0.0);
    if (vectors.empty()) return h;
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t y = 0; y < map_height; ++y)
        for (std::size_t x = 0; x < map_width; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (const GroundTruthVector& v : vectors) {
                const double dx = static_cast<double>(x) - lambda * v.x;
                const double dy = static_cast<double>(y) - lambda * v.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            h[y * map_width + x] = std::exp(-best / denom);
        }
    return h;
}

namespace {

bool in_disc(std::size_t x, std::size_t y, const GroundTruthVector& v, double lambda, double radius_sq) {
    const double dx = static_cast<double>(x) - lambda * v.x;
    const double dy = static_cast<double>(y) - lambda * v.y;
    return dx * dx + dy * dy <= radius_sq;
}

}  // namespace

Tensor disc_count(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                  double lambda, double sigma) {
    Tensor c({map_height, map_width}, 0.0);
    const double r2 = 9.0 * sigma * sigma;
    for (std::size_t y = 0; y < map_height; ++y)
        for (std::size_t x = 0; x < map_width; ++x)
            for (const GroundTruthVector& v : vectors)
                if (in_disc(x, y, v, lambda, r2)) c[y * map_width + x] += 1.0;
    return c;
}

Tensor encode_scalarmap(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                        double lambda, double sigma) {
    Tensor v({2, map_height, map_width}, 0.0);
    const double r2 = 9.0 * sigma * sigma;
    const std::size_t plane = map_width * map_height;
    for (std::size_t y = 0; y < map_height; ++y)
        for (std::size_t x = 0; x < map_width; ++x) {
            double sa = 0.0, sb = 0.0;
            int count = 0;
            for (const GroundTruthVector& g : vectors) {
                if (!in_disc(x, y, g, lambda, r2)) continue;
                sa += g.alpha;
                sb += g.beta;
                ++count;
            }
            if (count > 0) {
                v[y * map_width + x] = sa / count;
                v[plane + y * map_width + x] = sb / count;
            }
        }
    return v;
}

TargetMaps encode_targets(std::span<const PointerAnnotation> annotations, const TargetConfig& cfg) {
    if (!(cfg.sigma > 0.0)) throw std::invalid_argument("encode_targets: sigma must be positive");
    std::vector<GroundTruthVector> vectors;
    vectors.reserve(annotations.size());
    for (const PointerAnnotation& a : annotations) vectors.push_back(to_vector(a));
    return {encode_heatmap(vectors, cfg.map_width, cfg.map_height, cfg.lambda, cfg.sigma),
            encode_scalarmap(vectors, cfg.map_width, cfg.map_height, cfg.lambda, cfg.sigma), cfg.sigma};
}

}  // namespace vdn
