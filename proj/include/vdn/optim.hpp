#pragma once

#include "vdn/tensor.hpp"
#include "vdn/var.hpp"

#include <cstdint>
#include <vector>

namespace vdn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter, plus the step count.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const std::vector<Var>& params);

/// One bias-corrected Adam update applied in place to the parameter values.
/// Throws NumericError without modifying anything if any gradient is non-finite.
void adam_step(std::vector<Var>& params, AdamState& state, double lr, const AdamConfig& cfg = {});

/// Tensor-level form used by the Var overload.
void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace vdn
