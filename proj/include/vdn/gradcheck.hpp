#pragma once

#include "vdn/var.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vdn {

struct GradCheckRow {
    std::string op;
    std::string wrt;
    double rel_error = 0.0;  // |analytic - numeric|_2 / max(|analytic|_2, |numeric|_2) over checked entries
    double tolerance = 0.0;

    bool passed() const { return rel_error < tolerance; }
};

/// Central-difference check of d f / d inputs[i] for every input. At most
/// `max_entries` entries per input are probed (evenly strided).
std::vector<GradCheckRow> gradcheck(const std::string& op, const std::vector<std::string>& names,
                                    std::vector<Var> inputs, const std::function<Var(const std::vector<Var>&)>& f,
                                    double tolerance, double step = 1e-5, std::size_t max_entries = 64);

/// Every differentiable op (tolerance 1e-4).
std::vector<GradCheckRow> gradcheck_ops(std::uint64_t seed);
/// Two-layer conv/deconv toy network and a tiny full model under the
/// training loss (tolerance 1e-3).
std::vector<GradCheckRow> gradcheck_end_to_end(std::uint64_t seed);

}  // namespace vdn
