#include "oracles.hpp"

#include "vdn/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

using namespace vdn;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double oracle_ap(const std::vector<EvalInstance>& insts, const MetricConfig& cfg, SimilarityKind kind, double thr,
                 double* recall = nullptr) {
    std::size_t num_gt = 0;
    const auto ranked = oracle::greedy(insts, cfg, kind, &num_gt);
    return oracle::interpolated_ap(ranked, num_gt, thr, recall);
}

std::vector<EvalInstance> random_instances(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EvalInstance> out(1 + rng() % 3);
    for (EvalInstance& inst : out) {
        inst.bbox_area = 2000 + 8000 * u(rng);
        inst.patch_side = std::sqrt(inst.bbox_area) * (1.0 + u(rng));
        const std::size_t ng = 1 + rng() % 6, nd = rng() % 9;
        for (std::size_t g = 0; g < ng; ++g) {
            const double a = 2 * std::numbers::pi * u(rng);
            inst.gt.push_back({100 * u(rng), 100 * u(rng), std::cos(a), std::sin(a)});
        }
        for (std::size_t d = 0; d < nd; ++d) {
            // Most detections sit near some ground truth so the thresholds matter.
            const auto& g = inst.gt[rng() % ng];
            const double a = std::atan2(g.beta, g.alpha) + 0.6 * (u(rng) - 0.5);
            const double conf = std::round(u(rng) * 10) / 10;  // ties on purpose
            inst.det.push_back({g.x + 12 * (u(rng) - 0.5), g.y + 12 * (u(rng) - 0.5), std::cos(a), std::sin(a), conf,
                                false});
        }
    }
    return out;
}

}  // namespace

TEST(Similarity, OksAnchors) {
    EXPECT_DOUBLE_EQ(oks_pair(0.0, 900.0, 0.1), 1.0);
    const double d = std::sqrt(2 * 900.0 * 0.01);
    EXPECT_NEAR(oks_pair(d, 900.0, 0.1), std::exp(-1.0), 1e-15);
}

TEST(Similarity, VdsAnchors) {
    const double scale = 0.5;
    EXPECT_DOUBLE_EQ(vds_pair(0.0, scale, 0.2), 1.0);
    EXPECT_NEAR(vds_pair(scale * 0.2, scale, 0.2), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(direction_angle(1, 0, -1, 0), std::numbers::pi, 1e-15);
    EXPECT_NEAR(direction_angle(1, 0, 0, 2), std::numbers::pi / 2, 1e-15);
    EXPECT_LT(vds_pair(std::numbers::pi, 1.0, 0.2), 1e-20);
}

TEST(Similarity, VdsScaleUsesAreaOverPatchSide) {
    EvalInstance inst;
    inst.bbox_area = 64.0 * 64.0;
    inst.patch_side = 128.0;
    const GroundTruthVector g{0, 0, 1, 0};
    const double a = 0.05;
    const VectorDetection d{0, 0, std::cos(a), std::sin(a), 1, false};
    const double sc = 0.5 * 0.2;
    EXPECT_NEAR(pair_similarity(g, d, inst, {}, SimilarityKind::vds), std::exp(-a * a / (2 * sc * sc)), 1e-12);
}

TEST(AveragePrecision, MatchesDefinitionOracle) {
    std::mt19937_64 rng(31337);
    const MetricConfig cfg;
    for (int trial = 0; trial < 300; ++trial) {
        const auto insts = random_instances(rng);
        for (SimilarityKind kind : {SimilarityKind::oks, SimilarityKind::vds}) {
            const auto scores = match_and_score(insts, cfg, kind);
            for (double thr : cfg.ap_thresholds) {
                double rec = 0.0;
                const double want = oracle_ap(insts, cfg, kind, thr, &rec);
                const PrecisionRecall got = evaluate_threshold(scores, thr, 0.0, kInf);
                ASSERT_NEAR(got.ap, want, 1e-9) << "trial " << trial << " thr " << thr;
                ASSERT_NEAR(got.recall, rec, 1e-9);
            }
            const ApArReport r = ap_ar(scores, cfg);
            EXPECT_LE(r.ap, r.ap50 + 1e-12);
            EXPECT_LE(r.ap75, r.ap50 + 1e-12);
        }
    }
}

TEST(AveragePrecision, PerfectAndEmptyDetections) {
    EvalInstance inst;
    inst.bbox_area = 4096;
    inst.patch_side = 128;
    inst.gt = {{10, 10, 1, 0}, {50, 40, 0, 1}};
    inst.det = {{10, 10, 1, 0, 0.9, false}, {50, 40, 0, 1, 0.8, false}};
    const std::vector<EvalInstance> insts{inst};
    for (SimilarityKind kind : {SimilarityKind::oks, SimilarityKind::vds}) {
        const ApArReport r = ap_ar(match_and_score(insts, {}, kind), {});
        EXPECT_DOUBLE_EQ(r.ap, 1.0);
        EXPECT_DOUBLE_EQ(r.ar, 1.0);
    }
    inst.det.clear();
    const std::vector<EvalInstance> none{inst};
    const ApArReport r = ap_ar(match_and_score(none, {}, SimilarityKind::oks), {});
    EXPECT_DOUBLE_EQ(r.ap, 0.0);
    EXPECT_DOUBLE_EQ(r.ar, 0.0);
}

TEST(AveragePrecision, OneOfTwoFound) {
    // Precision 1 up to recall 0.5, nothing after: 51 of 101 recall levels.
    EvalInstance inst;
    inst.bbox_area = 4096;
    inst.patch_side = 128;
    inst.gt = {{10, 10, 1, 0}, {50, 40, 0, 1}};
    inst.det = {{10, 10, 1, 0, 0.9, false}};
    const std::vector<EvalInstance> insts{inst};
    const PrecisionRecall pr = evaluate_threshold(match_and_score(insts, {}, SimilarityKind::oks), 0.5, 0, kInf);
    EXPECT_NEAR(pr.ap, 51.0 / 101.0, 1e-15);
    EXPECT_DOUBLE_EQ(pr.recall, 0.5);
}

TEST(AveragePrecision, HandBuiltScenario) {
    // Three ground truths; detections ranked TP, FP, TP.
    // precision 1, 1/2, 2/3 at recall 1/3, 1/3, 2/3. Envelope: 1 for r <= 1/3, 2/3 up to 2/3, 0 after.
    EvalInstance inst;
    inst.bbox_area = 10000;
    inst.patch_side = 100;
    inst.gt = {{0, 0, 1, 0}, {50, 50, 1, 0}, {90, 10, 1, 0}};
    inst.det = {{0, 0, 1, 0, 0.9, false}, {120, 0, 1, 0, 0.8, false}, {50, 50, 1, 0, 0.7, false}};
    const std::vector<EvalInstance> insts{inst};
    const PrecisionRecall pr = evaluate_threshold(match_and_score(insts, {}, SimilarityKind::oks), 0.5, 0, kInf);
    // levels 0..33 -> 1 (34 levels), 34..66 -> 2/3 (33 levels)
    EXPECT_NEAR(pr.ap, (34.0 + 33.0 * 2.0 / 3.0) / 101.0, 1e-12);
    EXPECT_NEAR(pr.recall, 2.0 / 3.0, 1e-15);
}

TEST(Matching, GreedyEqualsBestAssignmentWhenWellSeparated) {
    // Ground truths far apart and detections close to one each: the
    // exhaustive best total-similarity assignment is what greedy returns.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        EvalInstance inst;
        inst.bbox_area = 1600;
        inst.patch_side = 60;
        const std::size_t n = 1 + trial % 3;
        for (std::size_t g = 0; g < n; ++g) inst.gt.push_back({100.0 * static_cast<double>(g), 50 * u(rng), 1, 0});
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& g = inst.gt[perm[k]];
            inst.det.push_back({g.x + 4 * u(rng), g.y + 4 * u(rng), 1, 0, u(rng), false});
        }
        const ImageScore s = match_and_score(inst, {}, SimilarityKind::oks);
        double best = -1.0;
        std::vector<std::size_t> best_perm, q(n);
        std::iota(q.begin(), q.end(), 0);
        do {
            double total = 0.0;
            for (std::size_t d = 0; d < n; ++d)
                total += pair_similarity(inst.gt[q[d]], inst.det[d], inst, {}, SimilarityKind::oks);
            if (total > best) {
                best = total;
                best_perm = q;
            }
        } while (std::next_permutation(q.begin(), q.end()));
        for (const ScoredDetection& d : s.detections) {
            ASSERT_TRUE(d.gt);
            EXPECT_EQ(*d.gt, best_perm[d.det]);
        }
    }
}

TEST(AveragePrecision, AreaSplits) {
    EvalInstance small, medium, large;
    small.bbox_area = 20 * 20;
    medium.bbox_area = 96 * 96;  // boundary belongs to medium
    large.bbox_area = 97 * 97;
    for (EvalInstance* i : {&small, &medium, &large}) {
        i->patch_side = 128;
        i->gt = {{5, 5, 1, 0}};
    }
    medium.det = {{5, 5, 1, 0, 1, false}};
    const std::vector<EvalInstance> insts{small, medium, large};
    const ApArReport r = ap_ar(match_and_score(insts, {}, SimilarityKind::oks), {});
    EXPECT_DOUBLE_EQ(r.ap_m, 1.0);
    EXPECT_DOUBLE_EQ(r.ap_l, 0.0);
    const std::vector<EvalInstance> only_small{small};
    EXPECT_EQ(ap_ar(match_and_score(only_small, {}, SimilarityKind::oks), {}).ap_m, -1.0);
}

TEST(Perturbation, ParseAndFormat) {
    const Perturbation p = Perturbation::parse("mask_tip:3");
    EXPECT_EQ(p.mode, PerturbMode::mask_tip);
    EXPECT_DOUBLE_EQ(p.param, 3.0);
    EXPECT_EQ(Perturbation::parse(p.str()).mode, p.mode);
    EXPECT_EQ(Perturbation::parse("scale:0.5").param, 0.5);
    EXPECT_THROW(Perturbation::parse("blur:2"), std::invalid_argument);
    EXPECT_THROW(Perturbation::parse("scale"), std::invalid_argument);
}

TEST(Perturbation, ScaleOneIsIdentity) {
    std::mt19937_64 rng(2);
    Image img(32, 32, 0);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng());
    const std::vector<PointerAnnotation> a{{{3.5, 9.0}, {20.0, 21.0}}};
    const PerturbedPatch out = perturb_input(img, {PerturbMode::scale, 1.0}, a);
    EXPECT_EQ(out.patch.pixels, img.pixels);
    EXPECT_EQ(out.annotations[0].tip.x, 3.5);
}

TEST(Perturbation, HalfScaleZeroPadsCornersAndMovesLabels) {
    Image img(64, 64, 200);
    const std::vector<PointerAnnotation> a{{{63.0, 31.5}, {31.5, 31.5}}};
    const PerturbedPatch out = perturb_input(img, {PerturbMode::scale, 0.5}, a);
    EXPECT_EQ(out.patch.at(0, 0, 0), 0);
    EXPECT_EQ(out.patch.at(63, 63, 2), 0);
    EXPECT_EQ(out.patch.at(31, 31, 0), 200);
    EXPECT_NEAR(out.annotations[0].tip.x, 47.25, 1e-12);
    EXPECT_NEAR(out.annotations[0].tail.x, 31.5, 1e-12);
}

TEST(Perturbation, TipMaskIsTenPixelSquare) {
    Image img(64, 64, 255);
    const std::vector<PointerAnnotation> a{{{20.0, 20.0}, {40.0, 40.0}}};
    const PerturbedPatch out = perturb_input(img, {PerturbMode::mask_tip, 3.0}, a, 3.0);
    int zeros = 0, x0 = 99, x1 = -1;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (out.patch.at(x, y, 0) == 0) {
                ++zeros;
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    EXPECT_EQ(zeros, 100);
    EXPECT_EQ(x1 - x0 + 1, 10);
    EXPECT_EQ(out.patch.at(40, 40, 0), 255);  // tail untouched
    const PerturbedPatch tail = perturb_input(img, {PerturbMode::mask_tail, 3.0}, a, 3.0);
    EXPECT_EQ(tail.patch.at(40, 40, 1), 0);
    EXPECT_EQ(tail.patch.at(20, 20, 1), 255);
}
