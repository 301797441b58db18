#include "vdn/metrics.hpp"

#include "vdn/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace vdn {

void MetricConfig::validate() const {
    if (!(tau > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("metrics: tau and kappa must be positive");
    if (ap_thresholds.empty()) throw std::invalid_argument("metrics: ap_thresholds must not be empty");
    for (std::size_t i = 0; i < ap_thresholds.size(); ++i) {
        if (!(ap_thresholds[i] > 0.0 && ap_thresholds[i] <= 1.0))
            throw std::invalid_argument("metrics: thresholds must lie in (0, 1]");
        if (i > 0 && !(ap_thresholds[i] > ap_thresholds[i - 1]))
            throw std::invalid_argument("metrics: thresholds must be strictly increasing");
    }
    if (!(medium_min >= 0.0 && large_min > medium_min))
        throw std::invalid_argument("metrics: area splits must satisfy 0 <= medium_min < large_min");
}

double oks_pair(double d, double area, double tau) {
    if (!(area > 0.0)) throw std::invalid_argument("oks_pair: area must be positive");
    return std::exp(-(d * d) / (2.0 * area * tau * tau));
}

double vds_pair(double theta, double scale, double kappa) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw std::invalid_argument("vds_pair: theta outside [0, pi]");
    const double s = scale * kappa;
    return std::exp(-(theta * theta) / (2.0 * s * s));
}

double direction_angle(double a1, double b1, double a2, double b2) {
    return std::atan2(std::abs(a1 * b2 - b1 * a2), a1 * a2 + b1 * b2);
}

double pair_similarity(const GroundTruthVector& gt, const VectorDetection& det, const EvalInstance& inst,
                       const MetricConfig& cfg, SimilarityKind kind) {
    if (kind == SimilarityKind::oks) return oks_pair(std::hypot(det.x - gt.x, det.y - gt.y), inst.bbox_area, cfg.tau);
    if (!(inst.patch_side > 0.0)) throw std::invalid_argument("vds: patch_side must be positive");
    const double scale = std::sqrt(inst.bbox_area) / inst.patch_side;
    return vds_pair(direction_angle(det.alpha, det.beta, gt.alpha, gt.beta), scale, cfg.kappa);
}

ImageScore match_and_score(const EvalInstance& inst, const MetricConfig& cfg, SimilarityKind kind) {
    if (!(inst.bbox_area > 0.0)) throw std::invalid_argument("evaluation instance needs a positive bbox area");
    std::vector<std::size_t> order(inst.det.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return inst.det[a].confidence > inst.det[b].confidence; });

    ImageScore out;
    out.num_gt = inst.gt.size();
    out.bbox_area = inst.bbox_area;
    std::vector<char> taken(inst.gt.size(), 0);
    for (std::size_t d : order) {
        ScoredDetection s{d, std::nullopt, 0.0, inst.det[d].confidence};
        for (std::size_t g = 0; g < inst.gt.size(); ++g) {
            if (taken[g]) continue;
            const double sim = pair_similarity(inst.gt[g], inst.det[d], inst, cfg, kind);
            if (!s.gt || sim > s.similarity) {
                s.gt = g;
                s.similarity = sim;
            }
        }
        if (s.gt) taken[*s.gt] = 1;
        out.detections.push_back(s);
    }
    for (std::size_t g = 0; g < inst.gt.size(); ++g)
        if (!taken[g]) out.unmatched_gt.push_back(g);
    return out;
}

std::vector<ImageScore> match_and_score(std::span<const EvalInstance> instances, const MetricConfig& cfg,
                                        SimilarityKind kind) {
    std::vector<ImageScore> out;
    out.reserve(instances.size());
    for (const EvalInstance& inst : instances) out.push_back(match_and_score(inst, cfg, kind));
    return out;
}

PrecisionRecall evaluate_threshold(std::span<const ImageScore> scores, double threshold, double area_lo,
                                   double area_hi) {
    struct Entry {
        double confidence;
        bool tp;
    };
    std::vector<Entry> entries;
    std::size_t num_gt = 0;
    for (const ImageScore& s : scores) {
        if (s.bbox_area < area_lo || s.bbox_area > area_hi) continue;
        num_gt += s.num_gt;
        for (const ScoredDetection& d : s.detections)
            entries.push_back({d.confidence, d.gt.has_value() && d.similarity >= threshold});
    }
    if (num_gt == 0) return {};
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.confidence > b.confidence; });

    std::vector<double> precision, recall;
    double tp = 0.0, fp = 0.0;
    for (const Entry& e : entries) {
        (e.tp ? tp : fp) += 1.0;
        precision.push_back(tp / (tp + fp));
        recall.push_back(tp / static_cast<double>(num_gt));
    }
    // Precision envelope: non-increasing from the right.
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    constexpr int kRecallPoints = 101;
    double sum = 0.0;
    for (int r = 0; r < kRecallPoints; ++r) {
        const double level = r / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), level);
        if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    PrecisionRecall out;
    out.ap = sum / kRecallPoints;
    out.recall = recall.empty() ? 0.0 : recall.back();
    return out;
}

ApArReport ap_ar(std::span<const ImageScore> scores, const MetricConfig& cfg) {
    cfg.validate();
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto averaged = [&](double lo, double hi) {
        double ap = 0.0, ar = 0.0;
        for (double t : cfg.ap_thresholds) {
            const PrecisionRecall pr = evaluate_threshold(scores, t, lo, hi);
            if (pr.ap < 0.0) return PrecisionRecall{};
            ap += pr.ap;
            ar += pr.recall;
        }
        const auto n = static_cast<double>(cfg.ap_thresholds.size());
        return PrecisionRecall{ap / n, ar / n};
    };
    ApArReport r;
    const PrecisionRecall all = averaged(0.0, inf);
    const PrecisionRecall at50 = evaluate_threshold(scores, 0.50, 0.0, inf);
    const PrecisionRecall at75 = evaluate_threshold(scores, 0.75, 0.0, inf);
    const PrecisionRecall medium = averaged(cfg.medium_min, cfg.large_min);
    const PrecisionRecall large = averaged(std::nextafter(cfg.large_min, inf), inf);
    r.ap = all.ap;
    r.ar = all.recall;
    r.ap50 = at50.ap;
    r.ar50 = at50.recall;
    r.ap75 = at75.ap;
    r.ar75 = at75.recall;
    r.ap_m = medium.ap;
    r.ar_m = medium.recall;
    r.ap_l = large.ap;
    r.ar_l = large.recall;
    return r;
}

void to_json(nlohmann::json& j, const ApArReport& r) {
    j = nlohmann::json{{"AP", r.ap},     {"AP50", r.ap50}, {"AP75", r.ap75}, {"AP_M", r.ap_m}, {"AP_L", r.ap_l},
                       {"AR", r.ar},     {"AR50", r.ar50}, {"AR75", r.ar75}, {"AR_M", r.ar_m}, {"AR_L", r.ar_l}};
}

Perturbation Perturbation::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("perturbation must be <mode>:<param>, got " + text);
    const std::string mode = text.substr(0, colon);
    Perturbation p;
    if (mode == "scale")
        p.mode = PerturbMode::scale;
    else if (mode == "mask_tip")
        p.mode = PerturbMode::mask_tip;
    else if (mode == "mask_tail")
        p.mode = PerturbMode::mask_tail;
    else
        throw std::invalid_argument("unknown perturbation mode '" + mode + "'");
    std::size_t used = 0;
    try {
        p.param = std::stod(text.substr(colon + 1), &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("perturbation parameter is not a number: " + text);
    }
    if (used != text.size() - colon - 1) throw std::invalid_argument("perturbation parameter is not a number: " + text);
    if (!(p.param > 0.0)) throw std::invalid_argument("perturbation parameter must be positive: " + text);
    return p;
}

std::string Perturbation::str() const {
    const char* name = mode == PerturbMode::scale ? "scale" : mode == PerturbMode::mask_tip ? "mask_tip" : "mask_tail";
    std::string v = std::to_string(param);
    v.erase(v.find_last_not_of('0') + 1);
    if (!v.empty() && v.back() == '.') v.pop_back();
    return std::string(name) + ":" + v;
}

PerturbedPatch perturb_input(const Image& patch, const Perturbation& p, std::span<const PointerAnnotation> annotations,
                             double sigma) {
    if (!(p.param > 0.0)) throw std::invalid_argument("perturbation parameter must be positive");
    PerturbedPatch out;
    if (p.mode == PerturbMode::scale) {
        if (p.param == 1.0) return {patch, {annotations.begin(), annotations.end()}};
        const Point c{(patch.width - 1) / 2.0, (patch.height - 1) / 2.0};
        const Affine fwd = Affine::similarity(p.param, 0.0, c);
        out.patch = warp_affine(patch, fwd.inverse(), patch.width, patch.height);
        for (const PointerAnnotation& a : annotations) out.annotations.push_back({fwd.apply(a.tip), fwd.apply(a.tail)});
        return out;
    }
    out.patch = patch;
    out.annotations.assign(annotations.begin(), annotations.end());
    const long side = std::lround(p.param * sigma + 1.0);
    for (const PointerAnnotation& a : annotations) {
        const Point c = p.mode == PerturbMode::mask_tip ? a.tip : a.tail;
        const long x0 = static_cast<long>(std::floor(c.x - side / 2.0 + 0.5));
        const long y0 = static_cast<long>(std::floor(c.y - side / 2.0 + 0.5));
        for (long y = y0; y < y0 + side; ++y)
            for (long x = x0; x < x0 + side; ++x) {
                if (!out.patch.contains(static_cast<int>(x), static_cast<int>(y))) continue;
                for (int ch = 0; ch < 3; ++ch) out.patch.at(static_cast<int>(x), static_cast<int>(y), ch) = 0;
            }
    }
    return out;
}

}  // namespace vdn
