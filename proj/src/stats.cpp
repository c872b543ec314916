#include "srcplan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "srcplan/rng.hpp"

namespace srcplan {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance needs at least two points");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

WelchResult welch_t_test(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() < 2 || ys.size() < 2)
        throw std::invalid_argument("welch_t_test: each sample needs at least two points");
    const double nx = static_cast<double>(xs.size());
    const double ny = static_cast<double>(ys.size());
    const double mx = mean(xs), my = mean(ys);
    const double vx = sample_variance(xs) / nx;
    const double vy = sample_variance(ys) / ny;
    const double se2 = vx + vy;

    WelchResult r;
    if (se2 == 0.0) {
        if (mx == my) return {0.0, nx + ny - 2.0, 1.0};
        r.t = mx > my ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.df = nx + ny - 2.0;
        r.p = 0.0;
        return r;
    }
    r.t = (mx - my) / std::sqrt(se2);
    r.df = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    boost::math::students_t dist(r.df);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    r.p = std::min(1.0, r.p);
    return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_stat(std::span<const double> values, const Statistic& stat, std::size_t n,
                               std::uint64_t seed, double confidence, double null_value) {
    if (values.empty()) throw std::invalid_argument("bootstrap_stat: empty sample");
    if (n == 0) throw std::invalid_argument("bootstrap_stat: zero resamples");
    BootstrapResult r;
    r.point = stat(values);
    Rng rng(seed);
    std::vector<double> resample(values.size());
    r.replicates.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
        for (auto& v : resample) v = values[uniform_index(rng, values.size())];
        r.replicates.push_back(stat(resample));
    }
    std::vector<double> sorted = r.replicates;
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - confidence) / 2.0;
    r.ci_low = quantile_sorted(sorted, tail);
    r.ci_high = quantile_sorted(sorted, 1.0 - tail);

    std::size_t below = 0, above = 0;
    for (double v : r.replicates) {
        if (v <= null_value) ++below;
        if (v >= null_value) ++above;
    }
    const double frac = static_cast<double>(std::min(below, above)) / static_cast<double>(n);
    r.p_value = std::min(1.0, 2.0 * frac);
    return r;
}

}  // namespace srcplan
