#include "vdn/decode.hpp"

#include "vdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdn {

void DecodeConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("decode: threshold must lie in (0, 1)");
    if (!(nms_radius >= 1.0)) throw std::invalid_argument("decode: nms_radius must be >= 1");
}

namespace {

struct MapView {
    const double* data;
    std::size_t width, height;
    double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

MapView heatmap_view(const Tensor& h) {
    if (h.rank() == 2) return {h.data(), h.dim(1), h.dim(0)};
    if (h.rank() == 3 && h.dim(0) == 1) return {h.data(), h.dim(2), h.dim(1)};
    throw ShapeError("heatmap must be h x w or 1 x h x w, got " + shape_str(h.shape()));
}

bool strict_local_max(const MapView& m, std::size_t x, std::size_t y) {
    const double v = m.at(x, y);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
            const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(m.width) ||
                ny >= static_cast<std::ptrdiff_t>(m.height))
                continue;
            if (!(v > m.at(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)))) return false;
        }
    return true;
}

// Quarter-pixel step toward the larger neighbour along one axis.
double quarter_shift(double lower, double upper) {
    if (upper > lower) return 0.25;
    if (upper < lower) return -0.25;
    return 0.0;
}

}  // namespace

std::vector<Peak> find_peaks(const Tensor& heatmap, const DecodeConfig& cfg) {
    const MapView m = heatmap_view(heatmap);
    std::vector<Peak> candidates;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x) {
            const double v = m.at(x, y);
            if (v >= cfg.threshold && strict_local_max(m, x, y)) candidates.push_back({x, y, v});
        }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Peak& a, const Peak& b) { return a.confidence > b.confidence; });
    std::vector<Peak> kept;
    const double r2 = cfg.nms_radius * cfg.nms_radius;
    for (const Peak& p : candidates) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Peak& q) {
            const double dx = static_cast<double>(p.x) - static_cast<double>(q.x);
            const double dy = static_cast<double>(p.y) - static_cast<double>(q.y);
            return dx * dx + dy * dy <= r2;
        });
        if (!suppressed) kept.push_back(p);
    }
    return kept;
}

std::vector<VectorDetection> decode(const Tensor& heatmap, const Tensor& scalarmap, double lambda,
                                    const DecodeConfig& cfg) {
    const MapView m = heatmap_view(heatmap);
    if (scalarmap.rank() != 3 || scalarmap.dim(0) != 2 || scalarmap.dim(1) != m.height || scalarmap.dim(2) != m.width)
        throw ShapeError("scalarmap must be 2 x h x w matching the heatmap, got " + shape_str(scalarmap.shape()));
    if (!(lambda > 0.0)) throw std::invalid_argument("decode: lambda must be positive");
    const std::size_t plane = m.width * m.height;

    std::vector<VectorDetection> out;
    for (const Peak& p : find_peaks(heatmap, cfg)) {
        double mx = static_cast<double>(p.x), my = static_cast<double>(p.y);
        if (cfg.subpixel) {
            if (p.x > 0 && p.x + 1 < m.width) mx += quarter_shift(m.at(p.x - 1, p.y), m.at(p.x + 1, p.y));
            if (p.y > 0 && p.y + 1 < m.height) my += quarter_shift(m.at(p.x, p.y - 1), m.at(p.x, p.y + 1));
        }
        const double a = scalarmap[p.y * m.width + p.x];
        const double b = scalarmap[plane + p.y * m.width + p.x];
        const double mag = std::hypot(a, b);
        VectorDetection d;
        d.x = mx / lambda;
        d.y = my / lambda;
        d.confidence = p.confidence;
        d.degenerate_direction = mag < 1e-3;
        d.alpha = mag > 0.0 ? a / mag : 0.0;
        d.beta = mag > 0.0 ? b / mag : 0.0;
        out.push_back(d);
    }
    return out;
}

std::vector<std::vector<VectorDetection>> decode_batch(const Tensor& heatmaps, const Tensor& scalarmaps, double lambda,
                                                       const DecodeConfig& cfg) {
    if (heatmaps.rank() != 4 || heatmaps.dim(1) != 1 || scalarmaps.rank() != 4 || scalarmaps.dim(1) != 2 ||
        heatmaps.dim(0) != scalarmaps.dim(0))
        throw ShapeError("decode_batch: expected N x 1 x h x w and N x 2 x h x w maps");
    const std::size_t n = heatmaps.dim(0), h = heatmaps.dim(2), w = heatmaps.dim(3);
    std::vector<std::vector<VectorDetection>> out;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor hm({h, w}, std::vector<double>(heatmaps.data() + i * h * w, heatmaps.data() + (i + 1) * h * w));
        Tensor vm({2, h, w},
                  std::vector<double>(scalarmaps.data() + i * 2 * h * w, scalarmaps.data() + (i + 1) * 2 * h * w));
        out.push_back(decode(hm, vm, lambda, cfg));
    }
    return out;
}

}  // namespace vdn
