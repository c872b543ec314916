#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace srcplan {

double mean(std::span<const double> xs);
// Unbiased sample variance (n - 1 denominator).
double sample_variance(std::span<const double> xs);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

// Unequal-variance two-sample t-test. Each sample needs at least two
// points (std::invalid_argument otherwise). When both samples have zero
// variance, p is 1 for equal means and 0 otherwise.
WelchResult welch_t_test(std::span<const double> xs, std::span<const double> ys);

struct BootstrapResult {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    // Two-sided share of replicates on the far side of the null value.
    double p_value = 1.0;
    std::vector<double> replicates;
};

using Statistic = std::function<double(std::span<const double>)>;

// Percentile bootstrap: `n` resamples with replacement, seeded.
BootstrapResult bootstrap_stat(std::span<const double> values, const Statistic& stat, std::size_t n,
                               std::uint64_t seed, double confidence = 0.95, double null_value = 0.0);

// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace srcplan
