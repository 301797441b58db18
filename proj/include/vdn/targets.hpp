#pragma once

#include "vdn/image.hpp"
#include "vdn/tensor.hpp"

#include <random>
#include <span>
#include <vector>

namespace vdn {

/// Labeled pointer in patch pixels.
struct PointerAnnotation {
    Point tip;
    Point tail;

    friend bool operator==(const PointerAnnotation&, const PointerAnnotation&) = default;
};

/// Pointer as a vector anchored at the tip with unit tail-to-tip direction.
struct GroundTruthVector {
    double x = 0.0;
    double y = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

/// Throws DataError for zero-length pointers.
GroundTruthVector to_vector(const PointerAnnotation& a);

struct TargetConfig {
    std::size_t map_width = 32;
    std::size_t map_height = 32;
    double lambda = 0.25;  // map pixels per patch pixel
    double sigma = 3.0;    // Gaussian std in map pixels; discs have radius 3 sigma
};

struct TargetMaps {
    Tensor heatmap;    // h* x w*
    Tensor scalarmap;  // 2 x h* x w*, channel 0 = alpha, 1 = beta
    double sigma = 3.0;
};

/// Patch crop: aspect-preserving scale, centered, zero padded.
struct PatchCrop {
    Image patch;
    Affine patch_to_image;
};

/// Throws DataError for empty boxes or boxes reaching outside the image.
PatchCrop crop_patch(const Image& image, const BBox& bbox, int out_size);
/// The transform crop_patch would use, without resampling.
Affine crop_transform(const BBox& bbox, int out_size);

struct AugmentConfig {
    double scale_min = 0.98;
    double scale_max = 1.02;
    double max_rotation_deg = 90.0;
};

struct AugmentedPatch {
    Image patch;
    std::vector<PointerAnnotation> annotations;
    Affine transform;  // original patch -> augmented patch
};

/// Similarity transform about the patch center applied to pixels and labels.
AugmentedPatch apply_similarity(const Image& patch, std::span<const PointerAnnotation> annotations, double scale,
                                double angle_rad);
/// Draws scale ~ U[scale_min, scale_max] and angle ~ U[-max_rot, max_rot], then apply_similarity.
AugmentedPatch augment(const Image& patch, std::span<const PointerAnnotation> annotations, std::mt19937_64& rng,
                       const AugmentConfig& cfg = {});

/// H(rho) = exp(-min_k |rho - lambda p_k|^2 / (2 sigma^2)); all zeros for no vectors.
Tensor encode_heatmap(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                      double lambda, double sigma);
/// Per channel: average of alpha_k (beta_k) over the pointers whose closed
/// 3-sigma disc contains the pixel; zero where no disc does.
Tensor encode_scalarmap(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                        double lambda, double sigma);
/// Number of pointer discs covering each pixel, h* x w*.
Tensor disc_count(std::span<const GroundTruthVector> vectors, std::size_t map_width, std::size_t map_height,
                  double lambda, double sigma);

TargetMaps encode_targets(std::span<const PointerAnnotation> annotations, const TargetConfig& cfg);

}  // namespace vdn
