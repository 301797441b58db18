#pragma once

#include "vdn/tensor.hpp"

#include <cstddef>
#include <vector>

namespace vdn {

struct DecodeConfig {
    double threshold = 0.5;   // minimum peak confidence, in (0, 1)
    double nms_radius = 6.0;  // map pixels; 2 sigma for sigma = 3
    bool subpixel = true;

    void validate() const;
};

struct Peak {
    std::size_t x = 0;
    std::size_t y = 0;
    double confidence = 0.0;
};

/// One detected pointer: tip position in patch pixels, unit direction, confidence.
struct VectorDetection {
    double x = 0.0;
    double y = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double confidence = 0.0;
    // Raw scalarmap magnitude at the peak was below 1e-3; the direction is unreliable.
    bool degenerate_direction = false;
};

/// Strict 3x3 local maxima at or above the threshold, greedily suppressed
/// within nms_radius (higher confidence wins, ties in row-major order),
/// sorted by descending confidence. `heatmap` is h x w or 1 x h x w.
std::vector<Peak> find_peaks(const Tensor& heatmap, const DecodeConfig& cfg);

/// Peaks rescaled to patch pixels by 1/lambda, directions read from the
/// scalarmap (2 x h x w) at the integer peak location.
std::vector<VectorDetection> decode(const Tensor& heatmap, const Tensor& scalarmap, double lambda,
                                    const DecodeConfig& cfg);

/// Batched network output: heatmap N x 1 x h x w, scalarmap N x 2 x h x w.
std::vector<std::vector<VectorDetection>> decode_batch(const Tensor& heatmaps, const Tensor& scalarmaps, double lambda,
                                                       const DecodeConfig& cfg);

}  // namespace vdn
