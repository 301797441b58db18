#pragma once

#include "vdn/image.hpp"

#include <span>
#include <utility>
#include <vector>

namespace vdn {

/// Minimum-cost assignment for a rows x cols cost matrix (row-major).
/// Every row is assigned when rows <= cols, every column otherwise.
/// Returns, per row, the assigned column or -1.
std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols);

struct BoxPairing {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detected, template)
    double total_cost = 0.0;
    std::vector<std::size_t> unassigned_detected;
    std::vector<std::size_t> unassigned_template;
};

/// Pairs detected box centers with template box centers, minimizing total
/// Euclidean distance over min(|detected|, |template|) pairs.
BoxPairing assign_boxes(std::span<const Point> detected, std::span<const Point> templates);

/// 1-nearest-neighbour dial lookup; ties go to the lowest index.
std::size_t nearest_dial(Point pinpoint, std::span<const Point> dial_centers);

}  // namespace vdn
