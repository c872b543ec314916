#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>

namespace srcplan {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent stream seed for a named sub-task, e.g. derive_seed(seed, doc.id).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return splitmix64(base ^ splitmix64(fnv1a(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

// Draw an index proportional to non-negative weights.
inline std::size_t sample_discrete(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    // Rounding fell off the end: return the last positive cell.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return weights.size() - 1;
}

// Draw an index from unnormalized log weights. `scratch` receives the
// exponentiated, max-shifted weights.
template <typename Vec>
std::size_t sample_log_weights(Rng& rng, std::span<const double> log_weights, Vec& scratch) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) mx = std::max(mx, lw);
    scratch.resize(log_weights.size());
    for (std::size_t i = 0; i < log_weights.size(); ++i) scratch[i] = std::exp(log_weights[i] - mx);
    return sample_discrete(rng, std::span<const double>(scratch.data(), scratch.size()));
}

}  // namespace srcplan
