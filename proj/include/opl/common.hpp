#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace opl {

/// Row-wise stable softmax. Scores are shifted by the row maximum before
/// exponentiation so saturated fits stay finite.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double m = scores.maxCoeff();
    Eigen::VectorXd e = (scores.array() - m).exp();
    return e / e.sum();
}

inline double log_sum_exp(const Eigen::VectorXd& scores) {
    const double m = scores.maxCoeff();
    return m + std::log((scores.array() - m).exp().sum());
}

/// Mixes a probability vector with the uniform distribution just enough to
/// lift its minimum entry to `floor`. Probabilities keep summing to one, and
/// vectors already above the floor are returned unchanged.
inline Eigen::VectorXd floor_distribution(const Eigen::VectorXd& probs, double floor) {
    const int k = static_cast<int>(probs.size());
    if (floor <= 0.0) return probs;
    const double uniform = 1.0 / static_cast<double>(k);
    if (floor >= uniform)
        throw std::invalid_argument("probability floor must be below 1/(number of arms)");
    const double lo = probs.minCoeff();
    if (lo >= floor) return probs;
    const double lambda = (floor - lo) / (uniform - lo);
    return (1.0 - lambda) * probs.array() + lambda * uniform;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline int argmax_lowest(const Eigen::VectorXd& values) {
    int best = 0;
    for (int j = 1; j < values.size(); ++j)
        if (values[j] > values[best]) best = j;
    return best;
}

/// Fisher-Yates permutation of {0,...,n-1}. Hand-rolled so the result is a
/// fixed function of the seed independent of the standard library.
inline std::vector<long> random_permutation(long n, std::uint64_t seed) {
    std::vector<long> perm(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    for (long i = n - 1; i > 0; --i) {
        const long j = static_cast<long>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

/// Unbiased sample variance (n-1 denominator); zero for fewer than two values.
inline double sample_variance(const Eigen::VectorXd& v) {
    const long n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(n - 1);
}

inline double sample_sd(const Eigen::VectorXd& v) { return std::sqrt(sample_variance(v)); }

/// Empirical quantile by linear interpolation on the sorted values.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty range");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

}  // namespace opl
