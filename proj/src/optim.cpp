#include "vdn/optim.hpp"

#include "vdn/error.hpp"

#include <cmath>

namespace vdn {

AdamState make_adam_state(const std::vector<Var>& params) {
    AdamState s;
    for (const Var& p : params) {
        s.m.emplace_back(p.shape(), 0.0);
        s.v.emplace_back(p.shape(), 0.0);
    }
    return s;
}

void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape() ||
            params[i]->shape() != state.v[i].shape())
            throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i));
        if (!all_finite(*grads[i]))
            throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i));
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

void adam_step(std::vector<Var>& params, AdamState& state, double lr, const AdamConfig& cfg) {
    std::vector<Tensor*> values;
    std::vector<const Tensor*> grads;
    for (Var& p : params) {
        values.push_back(&p.mutable_value());
        grads.push_back(&p.grad());
    }
    adam_step(std::move(values), grads, state, lr, cfg);
}

}  // namespace vdn
