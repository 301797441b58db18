#include "oracles.hpp"

#include "vdn/error.hpp"
#include "vdn/gradcheck.hpp"
#include "vdn/ops.hpp"
#include "vdn/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace vdn;

TEST(Tensor, ShapeAndIndexing) {
    Tensor t({2, 3, 4, 5}, 1.5);
    EXPECT_EQ(t.numel(), 120u);
    EXPECT_EQ(t.rank(), 4u);
    t.at(1, 2, 3, 4) = 7.0;
    EXPECT_EQ(t[119], 7.0);
    EXPECT_THROW(Tensor({2, 0}), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(Tensor, ReshapeKeepsValues) {
    std::mt19937_64 rng(1);
    const Tensor t = Tensor::randn({2, 6}, rng);
    const Tensor r = t.reshaped({3, 4});
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(t[i], r[i]);
    EXPECT_THROW(t.reshaped({5}), ShapeError);
}

TEST(Conv, ExtentRules) {
    EXPECT_EQ(conv_out_extent(128, 3, 2, 1), 64u);
    EXPECT_EQ(conv_out_extent(7, 3, 2, 1), 4u);
    EXPECT_EQ(deconv_out_extent(4, 4, 2, 1), 8u);
    EXPECT_THROW(conv_out_extent(2, 5, 1, 0), ShapeError);
}

struct ConvCase {
    std::size_t n, c, h, w, o, k, s, p;
};

class ConvOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracle, MatchesDirectSummation) {
    const ConvCase cc = GetParam();
    std::mt19937_64 rng(cc.h * 31 + cc.k);
    const Tensor x = Tensor::randn({cc.n, cc.c, cc.h, cc.w}, rng);
    const Tensor K = Tensor::randn({cc.o, cc.c, cc.k, cc.k}, rng);
    const Tensor b = Tensor::randn({cc.o}, rng);
    const Tensor got = conv2d(x, {K, b, cc.s, cc.p});
    const Tensor want = oracle::conv2d(x, K, b, cc.s, cc.p);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST_P(ConvOracle, DeconvMatchesScatter) {
    const ConvCase cc = GetParam();
    std::mt19937_64 rng(cc.w * 17 + cc.o);
    const Tensor x = Tensor::randn({cc.n, cc.c, cc.h, cc.w}, rng);
    const Tensor K = Tensor::randn({cc.c, cc.o, cc.k, cc.k}, rng);
    const Tensor b = Tensor::randn({cc.o}, rng);
    if ((cc.h - 1) * cc.s + cc.k <= 2 * cc.p) GTEST_SKIP();
    const Tensor got = deconv2d(x, {K, b, cc.s, cc.p});
    const Tensor want = oracle::deconv2d(x, K, b, cc.s, cc.p);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvOracle,
                         ::testing::Values(ConvCase{1, 1, 5, 5, 1, 3, 1, 0}, ConvCase{2, 3, 8, 8, 4, 3, 2, 1},
                                           ConvCase{1, 2, 7, 9, 3, 3, 2, 1}, ConvCase{2, 4, 6, 6, 2, 4, 2, 1},
                                           ConvCase{1, 3, 9, 6, 5, 1, 1, 0}, ConvCase{1, 2, 10, 7, 2, 5, 3, 2}));

// Deconvolution is the input-adjoint of the strided convolution with the same kernel.
TEST(Conv, AdjointIdentity) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t ci = 1 + trial % 3, co = 2 + trial % 2, k = trial % 2 ? 4 : 3, s = 2, p = 1;
        const std::size_t out = 3 + trial % 4;
        const std::size_t in = (out - 1) * s + k - 2 * p;
        const Tensor x = Tensor::randn({2, ci, in, in}, rng);
        const Tensor y = Tensor::randn({2, co, out, out}, rng);
        const Tensor K = Tensor::randn({co, ci, k, k}, rng);
        const Tensor zc({co}), zi({ci});
        const Tensor cx = conv2d(x, {K, zc, s, p});
        ASSERT_EQ(cx.shape(), y.shape());
        const Tensor dy = deconv2d(y, {K, zi, s, p});
        ASSERT_EQ(dy.shape(), x.shape());
        EXPECT_NEAR(dot(cx, y), dot(x, dy), 1e-10 * (1 + std::abs(dot(cx, y))));
    }
}

TEST(Conv, RejectsChannelMismatch) {
    std::mt19937_64 rng(1);
    const Tensor x = Tensor::randn({1, 3, 8, 8}, rng);
    const Tensor K = Tensor::randn({4, 2, 3, 3}, rng);
    EXPECT_THROW(conv2d(x, {K, Tensor({4}), 1, 1}), ShapeError);
}

TEST(Autodiff, SharedSubgraphAccumulates) {
    // y = mse(x + x, 0) = mean(4 x^2); dy/dx = 8 x / n
    Var x(Tensor({1, 1, 1, 2}, std::vector<double>{1.0, -2.0}), true);
    const Var y = mse(add(x, x), Var(Tensor({1, 1, 1, 2})));
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -8.0);
}

TEST(Gradcheck, EveryOpWithinTolerance) {
    for (const GradCheckRow& r : gradcheck_ops(42)) {
        EXPECT_LT(r.rel_error, 1e-4) << r.op << " wrt " << r.wrt;
    }
}

TEST(Gradcheck, DetectsAWrongGradient) {
    // A deliberately broken op: forward 2x, backward claims 3.
    Var x(Tensor({2}, std::vector<double>{0.3, -0.4}), true);
    auto broken = [](const std::vector<Var>& v) {
        const Tensor out({1}, 2.0 * (v[0].value()[0] + v[0].value()[1]));
        return Var::make(out, {v[0]}, [](detail::Node& self) {
            for (double& g : self.parents[0]->grad_buffer().values()) g += 3.0 * self.grad[0];
        });
    };
    const auto rows = gradcheck("broken", {"x"}, {x}, broken, 1e-4);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].passed());
}

TEST(Adam, HandComputedFirstSteps) {
    Var p(Tensor({2}, std::vector<double>{1.0, -1.0}), true);
    std::vector<Var> params{p};
    AdamState st = make_adam_state(params);
    p.node().grad_buffer()[0] = 0.5;
    p.node().grad_buffer()[1] = -2.0;
    adam_step(params, st, 0.1);
    // Step 1: m_hat = g, v_hat = g^2 -> update = lr * g / (|g| + eps)
    EXPECT_NEAR(p.value()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p.value()[1], -1.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);

    p.node().grad_buffer()[0] = 1.0;
    p.node().grad_buffer()[1] = 0.0;
    adam_step(params, st, 0.1);
    const double m = 0.9 * 0.1 * 0.5 + 0.1 * 1.0, v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p.value()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(Adam, NonFiniteGradientLeavesParametersUntouched) {
    Var p(Tensor({2}, std::vector<double>{1.0, 2.0}), true);
    std::vector<Var> params{p};
    AdamState st = make_adam_state(params);
    p.node().grad_buffer()[0] = 1.0;
    p.node().grad_buffer()[1] = std::nan("");
    EXPECT_THROW(adam_step(params, st, 0.1), NumericError);
    EXPECT_EQ(p.value()[0], 1.0);
    EXPECT_EQ(p.value()[1], 2.0);
    EXPECT_EQ(st.step, 0u);
}
