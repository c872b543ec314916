#pragma once

// Optimal two-cluster inertia by trying every bipartition.

#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

inline double best_two_partition_inertia(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size(), dim = pts.front().size();
    double best = std::numeric_limits<double>::infinity();
    // Point 0 always sits in group A, so each split is visited once.
    for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
        std::vector<int> group(n, 0);
        for (std::size_t i = 1; i < n; ++i) group[i] = (mask >> (i - 1)) & 1U;
        double cost = 0.0;
        bool empty = false;
        for (int g = 0; g < 2; ++g) {
            std::vector<double> c(dim, 0.0);
            double m = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (group[i] == g) {
                    for (std::size_t j = 0; j < dim; ++j) c[j] += pts[i][j];
                    m += 1;
                }
            if (m == 0) {
                empty = true;
                break;
            }
            for (auto& x : c) x /= m;
            for (std::size_t i = 0; i < n; ++i)
                if (group[i] == g)
                    for (std::size_t j = 0; j < dim; ++j) cost += (pts[i][j] - c[j]) * (pts[i][j] - c[j]);
        }
        if (!empty && cost < best) best = cost;
    }
    return best;
}

}  // namespace oracle
