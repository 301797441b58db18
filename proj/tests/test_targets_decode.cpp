#include "oracles.hpp"

#include "vdn/decode.hpp"
#include "vdn/error.hpp"
#include "vdn/targets.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace vdn;

namespace {

std::vector<GroundTruthVector> random_scene(std::mt19937_64& rng, int max_pointers, double extent) {
    std::uniform_real_distribution<double> pos(-4.0, extent + 4.0), ang(-std::numbers::pi, std::numbers::pi);
    const int n = std::uniform_int_distribution<int>(0, max_pointers)(rng);
    std::vector<GroundTruthVector> v;
    for (int i = 0; i < n; ++i) {
        const double a = ang(rng);
        v.push_back({pos(rng), pos(rng), std::cos(a), std::sin(a)});
    }
    return v;
}

}  // namespace

TEST(Targets, VectorFromAnnotation) {
    const GroundTruthVector g = to_vector({{10.0, 10.0}, {10.0, 30.0}});
    EXPECT_DOUBLE_EQ(g.x, 10.0);
    EXPECT_DOUBLE_EQ(g.y, 10.0);
    EXPECT_DOUBLE_EQ(g.alpha, 0.0);
    EXPECT_DOUBLE_EQ(g.beta, -1.0);
    EXPECT_THROW(to_vector({{3.0, 4.0}, {3.0, 4.0}}), DataError);
}

TEST(Targets, EncodersMatchPerPixelOracles) {
    std::mt19937_64 rng(2024);
    for (int scene = 0; scene < 200; ++scene) {
        const auto v = random_scene(rng, 5, 128.0);
        const Tensor h = encode_heatmap(v, 32, 32, 0.25, 3.0);
        const Tensor s = encode_scalarmap(v, 32, 32, 0.25, 3.0);
        const Tensor ho = oracle::heatmap(v, 32, 32, 0.25, 3.0);
        const Tensor so = oracle::scalarmap(v, 32, 32, 0.25, 3.0);
        for (std::size_t i = 0; i < h.numel(); ++i) ASSERT_NEAR(h[i], ho[i], 1e-12);
        for (std::size_t i = 0; i < s.numel(); ++i) ASSERT_NEAR(s[i], so[i], 1e-12);
    }
}

TEST(Targets, HeatmapPeakAndEmptyScene) {
    const std::vector<GroundTruthVector> one{{40.0, 60.0, 1.0, 0.0}};
    const Tensor h = encode_heatmap(one, 32, 32, 0.25, 3.0);
    EXPECT_DOUBLE_EQ(h[15 * 32 + 10], 1.0);
    for (double x : h.values()) {
        EXPECT_GT(x, 0.0);
        EXPECT_LE(x, 1.0);
    }
    const Tensor empty = encode_heatmap({}, 32, 32, 0.25, 3.0);
    for (double x : empty.values()) EXPECT_EQ(x, 0.0);
}

TEST(Targets, ScalarmapDiscsAndOverlap) {
    // Two pointers 8 map px apart: overlap region averages, single cover equals the unit vector.
    const std::vector<GroundTruthVector> v{{40.0, 40.0, 1.0, 0.0}, {72.0, 40.0, 0.0, 1.0}};
    const Tensor s = encode_scalarmap(v, 32, 32, 0.25, 3.0);
    const Tensor c = disc_count(v, 32, 32, 0.25, 3.0);
    auto A = [&](int x, int y) { return s[static_cast<std::size_t>(y * 32 + x)]; };
    auto B = [&](int x, int y) { return s[static_cast<std::size_t>(1024 + y * 32 + x)]; };
    EXPECT_EQ(c[10 * 32 + 2], 1.0);  // only the first disc
    EXPECT_DOUBLE_EQ(A(2, 10), 1.0);
    EXPECT_DOUBLE_EQ(B(2, 10), 0.0);
    EXPECT_EQ(c[10 * 32 + 14], 2.0);
    EXPECT_DOUBLE_EQ(A(14, 10), 0.5);
    EXPECT_DOUBLE_EQ(B(14, 10), 0.5);
    // Boundary: exactly 3 sigma = 9 map px away is inside, 9.06 is outside.
    EXPECT_EQ(c[10 * 32 + 1], 1.0);
    EXPECT_EQ(c[19 * 32 + 10], 1.0);
    EXPECT_EQ(c[19 * 32 + 11], 0.0);
    EXPECT_DOUBLE_EQ(A(10, 28), 0.0);
}

TEST(Targets, CropTransformAndErrors) {
    Image img(200, 100, 50);
    const PatchCrop pc = crop_patch(img, {20.0, 10.0, 80.0, 40.0}, 128);
    EXPECT_EQ(pc.patch.width, 128);
    // Box center maps to patch center; aspect preserved.
    const Point c = pc.patch_to_image.apply({64.0, 64.0});
    EXPECT_NEAR(c.x, 60.0, 1e-12);
    EXPECT_NEAR(c.y, 30.0, 1e-12);
    EXPECT_NEAR(pc.patch_to_image.m[0], 80.0 / 128.0, 1e-15);
    EXPECT_NEAR(pc.patch_to_image.m[4], 80.0 / 128.0, 1e-15);
    EXPECT_THROW(crop_patch(img, {10.0, 10.0, 0.0, 5.0}, 128), DataError);
    EXPECT_THROW(crop_patch(img, {150.0, 10.0, 80.0, 40.0}, 128), DataError);
}

TEST(Targets, AugmentationMovesLabelsWithPixels) {
    // A single bright pixel must land where its label lands.
    Image img(64, 64, 0);
    for (int c = 0; c < 3; ++c) img.at(40, 20, c) = 255;
    const std::vector<PointerAnnotation> a{{{40.0, 20.0}, {31.5, 31.5}}};
    const AugmentedPatch out = apply_similarity(img, a, 1.0, std::numbers::pi / 2);
    const Point t = out.annotations[0].tip;
    int bx = 0, by = 0, best = -1;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (out.patch.at(x, y, 0) > best) {
                best = out.patch.at(x, y, 0);
                bx = x;
                by = y;
            }
    EXPECT_NEAR(t.x, bx, 0.5);
    EXPECT_NEAR(t.y, by, 0.5);
    // Center stays fixed.
    EXPECT_NEAR(out.annotations[0].tail.x, 31.5, 1e-12);
    EXPECT_NEAR(out.annotations[0].tail.y, 31.5, 1e-12);
}

TEST(Targets, AugmentStaysInConfiguredRanges) {
    std::mt19937_64 rng(3);
    Image img(32, 32, 0);
    const std::vector<PointerAnnotation> a{{{20.0, 10.0}, {15.5, 15.5}}};
    for (int i = 0; i < 100; ++i) {
        const AugmentedPatch p = augment(img, a, rng);
        const double s = std::hypot(p.transform.m[0], p.transform.m[3]);
        EXPECT_GE(s, 0.98 - 1e-12);
        EXPECT_LE(s, 1.02 + 1e-12);
        const double ang = std::atan2(p.transform.m[3], p.transform.m[0]);
        EXPECT_LE(std::abs(ang), std::numbers::pi / 2 + 1e-12);
    }
}

TEST(Decode, PeaksMatchExhaustiveOracle) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        Tensor h({12, 15});
        // Quantized values create plateaus and ties on purpose.
        for (double& x : h.values()) x = std::round(u(rng) * 8.0) / 8.0;
        DecodeConfig cfg;
        cfg.threshold = 0.5;
        cfg.nms_radius = 2.5;
        const auto got = find_peaks(h, cfg);
        const auto want = oracle::peaks(h, 15, 12, cfg.threshold, cfg.nms_radius);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].x, want[i].x);
            EXPECT_EQ(got[i].y, want[i].y);
            EXPECT_EQ(got[i].confidence, want[i].c);
        }
    }
}

TEST(Decode, PlateauIsNotAPeak) {
    Tensor h({5, 5});
    h[2 * 5 + 2] = 0.9;
    h[2 * 5 + 3] = 0.9;
    EXPECT_TRUE(find_peaks(h, {}).empty());
}

TEST(Decode, EncodeDecodeRoundTrip) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> pos(4.0, 124.0), ang(-std::numbers::pi, std::numbers::pi);
    for (int scene = 0; scene < 100; ++scene) {
        std::vector<GroundTruthVector> v;
        while (v.size() < 3) {
            const GroundTruthVector g{pos(rng), pos(rng), 0, 0};
            bool ok = true;
            for (const auto& o : v) ok = ok && std::hypot(o.x - g.x, o.y - g.y) > 48.0;
            if (!ok) continue;
            const double a = ang(rng);
            v.push_back({g.x, g.y, std::cos(a), std::sin(a)});
        }
        const auto dets = decode(encode_heatmap(v, 32, 32, 0.25, 3.0), encode_scalarmap(v, 32, 32, 0.25, 3.0), 0.25, {});
        ASSERT_EQ(dets.size(), v.size());
        for (const auto& g : v) {
            double best = 1e9;
            const VectorDetection* m = nullptr;
            for (const auto& d : dets)
                if (std::hypot(d.x - g.x, d.y - g.y) < best) {
                    best = std::hypot(d.x - g.x, d.y - g.y);
                    m = &d;
                }
            EXPECT_LE(best, 4.0);
            EXPECT_NEAR(m->alpha, g.alpha, 1e-9);
            EXPECT_NEAR(m->beta, g.beta, 1e-9);
        }
    }
}

TEST(Decode, SubpixelShiftsTowardLargerNeighbour) {
    Tensor h({5, 5});
    h[2 * 5 + 2] = 1.0;
    h[2 * 5 + 3] = 0.8;
    h[2 * 5 + 1] = 0.3;
    h[1 * 5 + 2] = 0.2;
    h[3 * 5 + 2] = 0.2;
    Tensor v({2, 5, 5});
    v[2 * 5 + 2] = 0.6;
    v[25 + 2 * 5 + 2] = 0.8;
    const auto d = decode(h, v, 0.5, {});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_DOUBLE_EQ(d[0].x, 2.25 / 0.5);
    EXPECT_DOUBLE_EQ(d[0].y, 2.0 / 0.5);
    EXPECT_NEAR(d[0].alpha, 0.6, 1e-15);
    EXPECT_NEAR(d[0].beta, 0.8, 1e-15);
    DecodeConfig plain;
    plain.subpixel = false;
    EXPECT_DOUBLE_EQ(decode(h, v, 0.5, plain)[0].x, 4.0);
}

TEST(Decode, DegenerateDirectionIsFlagged) {
    Tensor h({5, 5});
    h[12] = 1.0;
    const auto d = decode(h, Tensor({2, 5, 5}), 0.25, {});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_TRUE(d[0].degenerate_direction);
}

TEST(Decode, ConfigValidation) {
    DecodeConfig c;
    c.threshold = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.nms_radius = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
