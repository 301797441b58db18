#include "vdn/assignment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace vdn {

namespace {

// Shortest augmenting path with potentials; requires n <= m. Returns column per row.
std::vector<int> solve_rows_le_cols(std::span<const double> cost, std::size_t n, std::size_t m) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto a = [&](std::size_t i, std::size_t j) { return cost[(i - 1) * m + (j - 1)]; };
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    return row_to_col;
}

}  // namespace

std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols) {
    if (cost.size() != rows * cols) throw std::invalid_argument("hungarian: cost size does not match rows x cols");
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
    if (rows <= cols) return solve_rows_le_cols(cost, rows, cols);
    std::vector<double> t(cost.size());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = cost[i * cols + j];
    const std::vector<int> col_to_row = solve_rows_le_cols(t, cols, rows);
    std::vector<int> out(rows, -1);
    for (std::size_t j = 0; j < cols; ++j)
        if (col_to_row[j] >= 0) out[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
    return out;
}

BoxPairing assign_boxes(std::span<const Point> detected, std::span<const Point> templates) {
    std::vector<double> cost(detected.size() * templates.size());
    for (std::size_t i = 0; i < detected.size(); ++i)
        for (std::size_t j = 0; j < templates.size(); ++j)
            cost[i * templates.size() + j] = distance(detected[i], templates[j]);
    const std::vector<int> match = hungarian(cost, detected.size(), templates.size());
    BoxPairing out;
    std::vector<char> template_used(templates.size(), 0);
    for (std::size_t i = 0; i < detected.size(); ++i) {
        if (match[i] < 0) {
            out.unassigned_detected.push_back(i);
            continue;
        }
        const auto j = static_cast<std::size_t>(match[i]);
        out.pairs.emplace_back(i, j);
        out.total_cost += cost[i * templates.size() + j];
        template_used[j] = 1;
    }
    for (std::size_t j = 0; j < templates.size(); ++j)
        if (!template_used[j]) out.unassigned_template.push_back(j);
    return out;
}

std::size_t nearest_dial(Point pinpoint, std::span<const Point> dial_centers) {
    if (dial_centers.empty()) throw std::invalid_argument("nearest_dial: no dials");
    std::size_t best = 0;
    double best_d = distance(pinpoint, dial_centers[0]);
    for (std::size_t i = 1; i < dial_centers.size(); ++i) {
        const double d = distance(pinpoint, dial_centers[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace vdn
