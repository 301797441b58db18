#pragma once

#include "vdn/decode.hpp"
#include "vdn/image.hpp"
#include "vdn/targets.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vdn {

struct MetricConfig {
    double tau = 0.1;    // OKS falloff
    double kappa = 0.2;  // VDS falloff
    std::vector<double> ap_thresholds{0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
    // Meter-area splits, pixels^2: medium in [medium_min, large_min], large above.
    double medium_min = 32.0 * 32.0;
    double large_min = 96.0 * 96.0;

    void validate() const;
};

/// One meter: ground truth and detections in the same pixel frame.
struct EvalInstance {
    std::vector<GroundTruthVector> gt;
    std::vector<VectorDetection> det;
    double bbox_area = 0.0;   // meter box area, pixels^2
    double patch_side = 0.0;  // side of the square region the patch covers, same pixels
};

enum class SimilarityKind { oks, vds };

/// exp(-d^2 / (2 area tau^2)).
double oks_pair(double d, double area, double tau);
/// exp(-theta^2 / (2 (scale kappa)^2)); theta must lie in [0, pi].
double vds_pair(double theta, double scale, double kappa);
/// Angle in [0, pi] between two direction vectors.
double direction_angle(double a1, double b1, double a2, double b2);

double pair_similarity(const GroundTruthVector& gt, const VectorDetection& det, const EvalInstance& inst,
                       const MetricConfig& cfg, SimilarityKind kind);

struct ScoredDetection {
    std::size_t det = 0;
    std::optional<std::size_t> gt;  // empty: false positive
    double similarity = 0.0;
    double confidence = 0.0;
};

struct ImageScore {
    std::vector<ScoredDetection> detections;  // in descending confidence order
    std::vector<std::size_t> unmatched_gt;
    std::size_t num_gt = 0;
    double bbox_area = 0.0;
};

/// Greedy matching: detections by descending confidence each claim their
/// best-similarity unmatched ground truth.
ImageScore match_and_score(const EvalInstance& inst, const MetricConfig& cfg, SimilarityKind kind);
std::vector<ImageScore> match_and_score(std::span<const EvalInstance> instances, const MetricConfig& cfg,
                                        SimilarityKind kind);

/// Table-style AP/AR summary; -1 marks a split with no ground truth.
struct ApArReport {
    double ap = 0, ap50 = 0, ap75 = 0, ap_m = 0, ap_l = 0;
    double ar = 0, ar50 = 0, ar75 = 0, ar_m = 0, ar_l = 0;
};

/// Average precision (101-point interpolated) and recall at one similarity threshold.
struct PrecisionRecall {
    double ap = -1.0;
    double recall = -1.0;
};
PrecisionRecall evaluate_threshold(std::span<const ImageScore> scores, double threshold, double area_lo,
                                   double area_hi);

ApArReport ap_ar(std::span<const ImageScore> scores, const MetricConfig& cfg);

void to_json(nlohmann::json& j, const ApArReport& r);

/// Input perturbations for robustness sweeps.
enum class PerturbMode { scale, mask_tip, mask_tail };

struct Perturbation {
    PerturbMode mode = PerturbMode::scale;
    double param = 1.0;  // scale factor s, or gamma for masks

    /// Parses "scale:<s>", "mask_tip:<gamma>", "mask_tail:<gamma>".
    static Perturbation parse(const std::string& text);
    std::string str() const;
};

struct PerturbedPatch {
    Image patch;
    std::vector<PointerAnnotation> annotations;  // labels in the perturbed patch
};

/// scale: zoom about the patch center keeping the size (s > 1 crops, s < 1 zero-pads).
/// mask_*: zero a (gamma*sigma + 1)-pixel square centred on every pointer's tip or tail.
PerturbedPatch perturb_input(const Image& patch, const Perturbation& p, std::span<const PointerAnnotation> annotations,
                             double sigma = 3.0);

}  // namespace vdn
