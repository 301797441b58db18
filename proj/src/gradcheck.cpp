#include "vdn/gradcheck.hpp"

#include "vdn/model.hpp"
#include "vdn/ops.hpp"
#include "vdn/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vdn {

std::vector<GradCheckRow> gradcheck(const std::string& op, const std::vector<std::string>& names,
                                    std::vector<Var> inputs, const std::function<Var(const std::vector<Var>&)>& f,
                                    double tolerance, double step, std::size_t max_entries) {
    for (Var& v : inputs) v.zero_grad();
    f(inputs).backward();
    std::vector<Tensor> analytic;
    for (Var& v : inputs) analytic.push_back(v.grad());

    std::vector<GradCheckRow> rows;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Tensor& x = inputs[i].mutable_value();
        const std::size_t n = x.numel();
        const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, max_entries));
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t k = 0; k < n; k += stride) {
            const double orig = x[k];
            x[k] = orig + step;
            const double up = f(inputs).item();
            x[k] = orig - step;
            const double down = f(inputs).item();
            x[k] = orig;
            const double num = (up - down) / (2.0 * step);
            const double ana = analytic[i][k];
            diff2 += (ana - num) * (ana - num);
            a2 += ana * ana;
            n2 += num * num;
        }
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
        rows.push_back({op, i < names.size() ? names[i] : "input" + std::to_string(i), std::sqrt(diff2) / denom,
                        tolerance});
    }
    return rows;
}

namespace {

Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
    Tensor t = Tensor::uniform(std::move(shape), rng, -1.0, 1.0);
    for (double& v : t.values()) v = v < 0 ? v - 0.05 : v + 0.05;
    return t;
}

void append(std::vector<GradCheckRow>& dst, std::vector<GradCheckRow> src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

std::vector<GradCheckRow> gradcheck_ops(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr double tol = 1e-4;
    std::vector<GradCheckRow> rows;
    auto param = [&](Shape s, double lo = -1.0, double hi = 1.0) { return Var(Tensor::uniform(std::move(s), rng, lo, hi), true); };
    // Random projection target so every output element carries gradient.
    auto target_like = [&](const Shape& s) { return Var(Tensor::uniform(s, rng, -1.0, 1.0)); };

    {
        const Var x = param({2, 3, 7, 6}), k = param({4, 3, 3, 3}), b = param({4});
        const Var t = target_like({2, 4, 4, 3});
        append(rows, gradcheck("conv2d", {"x", "kernel", "bias"}, {x, k, b},
                               [&](const std::vector<Var>& v) { return mse(conv2d(v[0], v[1], v[2], 2, 1), t); }, tol));
    }
    {
        const Var x = param({2, 3, 5, 4}), k = param({3, 2, 4, 4}), b = param({2});
        const Var t = target_like({2, 2, 10, 8});
        append(rows, gradcheck("deconv2d", {"x", "kernel", "bias"}, {x, k, b},
                               [&](const std::vector<Var>& v) { return mse(deconv2d(v[0], v[1], v[2], 2, 1), t); }, tol));
    }
    {
        const Var x(away_from_zero({2, 3, 4, 4}, rng), true);
        const Var t = target_like({2, 3, 4, 4});
        append(rows, gradcheck("relu", {"x"}, {x}, [&](const std::vector<Var>& v) { return mse(relu(v[0]), t); }, tol));
    }
    {
        const Var x = param({2, 2, 3, 3}, -2.0, 2.0);
        const Var t = target_like({2, 2, 3, 3});
        append(rows, gradcheck("tanh", {"x"}, {x}, [&](const std::vector<Var>& v) { return mse(tanh_act(v[0]), t); }, tol));
    }
    {
        const Var x = param({2, 3, 4, 5}), s = param({3}), sh = param({3});
        const Var t = target_like({2, 3, 4, 5});
        append(rows, gradcheck("channel_affine", {"x", "scale", "shift"}, {x, s, sh},
                               [&](const std::vector<Var>& v) { return mse(channel_affine(v[0], v[1], v[2]), t); }, tol));
    }
    {
        const Var a = param({2, 2, 3, 3}), b = param({2, 2, 3, 3});
        const Var t = target_like({2, 2, 3, 3});
        append(rows, gradcheck("add", {"a", "b"}, {a, b},
                               [&](const std::vector<Var>& v) { return mse(add(v[0], v[1]), t); }, tol));
    }
    {
        const Var x = param({2, 2, 3, 3});
        const Var t = target_like({2, 2, 3, 3});
        append(rows, gradcheck("scale", {"x"}, {x}, [&](const std::vector<Var>& v) { return mse(scale(v[0], -1.7), t); }, tol));
    }
    {
        const Var p = param({2, 2, 3, 3}), q = param({2, 2, 3, 3});
        append(rows, gradcheck("mse", {"pred", "target"}, {p, q},
                               [&](const std::vector<Var>& v) { return mse(v[0], v[1]); }, tol));
    }
    return rows;
}

std::vector<GradCheckRow> gradcheck_end_to_end(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr double tol = 1e-3;
    std::vector<GradCheckRow> rows;

    {
        // conv (stride 2) -> affine -> relu -> deconv (x2) -> tanh
        const Var x(Tensor::uniform({2, 3, 8, 8}, rng, 0.0, 1.0));
        const Var k1(Tensor::randn({4, 3, 3, 3}, rng, 0.5), true), b1(Tensor::uniform({4}, rng, -0.1, 0.1), true);
        const Var s1(Tensor::uniform({4}, rng, 0.5, 1.5), true), h1(Tensor::uniform({4}, rng, -0.1, 0.1), true);
        const Var k2(Tensor::randn({4, 2, 4, 4}, rng, 0.5), true), b2(Tensor::uniform({2}, rng, -0.1, 0.1), true);
        const Var t(Tensor::uniform({2, 2, 8, 8}, rng, -1.0, 1.0));
        append(rows, gradcheck("two_layer", {"conv.weight", "conv.bias", "norm.scale", "norm.shift", "deconv.weight",
                                             "deconv.bias"},
                               {k1, b1, s1, h1, k2, b2},
                               [&](const std::vector<Var>& v) {
                                   const Var h = relu(channel_affine(conv2d(x, v[0], v[1], 2, 1), v[2], v[3]));
                                   return mse(tanh_act(deconv2d(h, v[4], v[5], 2, 1)), t);
                               },
                               tol));
    }
    {
        ModelConfig cfg;
        cfg.input_width = cfg.input_height = 16;
        cfg.encoder_channels = {3, 4, 4};
        cfg.deconv_channels = {4, 4, 4};
        VdnModel model(cfg, seed);
        const Tensor input = Tensor::uniform({2, 3, 16, 16}, rng, 0.0, 1.0);
        const std::vector<std::vector<PointerAnnotation>> labels{{{{5.0, 6.0}, {10.0, 9.5}}},
                                                                  {{{11.2, 3.4}, {8.0, 8.0}}, {{2.5, 12.0}, {8.0, 8.0}}}};
        const auto [H, V] = batch_targets(labels, cfg, 1.5);
        const std::vector<std::string> names{"enc0.conv.weight", "enc1.norm.scale", "dec2.deconv.weight", "head_h.weight",
                                             "head_v.bias"};
        std::vector<Var> probe;
        for (const std::string& n : names) probe.push_back(model.parameter(n));
        append(rows, gradcheck("model_loss", names, probe,
                               [&](const std::vector<Var>&) {
                                   const ModelOutput o = model.forward(input);
                                   return scheduled_loss(o.heatmap, H, o.scalarmap, V, 3, 5, 1.0).total;
                               },
                               tol, 1e-5, 48));
    }
    return rows;
}

}  // namespace vdn
