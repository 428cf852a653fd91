#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"
#include "opl/policy.hpp"
#include "opl/ridge.hpp"
#include "opl/synthetic.hpp"
#include "opl/value.hpp"

namespace opl {

enum class OverlapVerdict { strong, weak, failing };

inline const char* overlap_verdict_name(OverlapVerdict v) {
    switch (v) {
        case OverlapVerdict::strong: return "strong";
        case OverlapVerdict::weak: return "weak";
        case OverlapVerdict::failing: return "failing";
    }
    return "?";
}

/// Overlap diagnostics for a fitted propensity surface. The verdict is
/// strong when no unit-arm propensity falls below `p_min`, weak when the
/// offending fraction stays under `weak_threshold`, failing otherwise. The
/// diagnostic threshold is independent of any flooring used at fit time.
struct OverlapReport {
    Eigen::VectorXd min_propensity;   // per arm
    Eigen::VectorXd fraction_below;   // per arm, share of units under p_min
    Eigen::MatrixXd feature_min;      // arms x p, over units observed at that arm
    Eigen::MatrixXd feature_max;      // arms x p
    OverlapVerdict verdict = OverlapVerdict::strong;
    double p_min = 0.0;
    double weak_threshold = 0.05;
};

inline OverlapReport overlap_report(const Dataset& data, const NuisanceEstimates& nuisance, double p_min,
                                    double weak_threshold = 0.05) {
    if (nuisance.p_hat.rows() != data.n()) throw std::invalid_argument("nuisance does not match the dataset");
    const int arms = data.arms();
    OverlapReport report;
    report.p_min = p_min;
    report.weak_threshold = weak_threshold;
    report.min_propensity = nuisance.p_hat.colwise().minCoeff().transpose();
    report.fraction_below.resize(arms);
    for (int j = 0; j < arms; ++j)
        report.fraction_below[j] =
            (nuisance.p_hat.col(j).array() < p_min).cast<double>().mean();

    report.feature_min = Eigen::MatrixXd::Constant(arms, data.p(), std::numeric_limits<double>::quiet_NaN());
    report.feature_max = report.feature_min;
    for (long i = 0; i < data.n(); ++i) {
        const int j = data.actions[i];
        for (int c = 0; c < data.p(); ++c) {
            const double v = data.features(i, c);
            if (std::isnan(report.feature_min(j, c)) || v < report.feature_min(j, c)) report.feature_min(j, c) = v;
            if (std::isnan(report.feature_max(j, c)) || v > report.feature_max(j, c)) report.feature_max(j, c) = v;
        }
    }

    const double overall_fraction = report.fraction_below.mean();
    if (report.fraction_below.maxCoeff() == 0.0) report.verdict = OverlapVerdict::strong;
    else if (overall_fraction < weak_threshold) report.verdict = OverlapVerdict::weak;
    else report.verdict = OverlapVerdict::failing;
    return report;
}

/// Share of units on which two allocations coincide.
inline double match_rate(const Eigen::VectorXi& actual, const Eigen::VectorXi& optimal) {
    if (actual.size() != optimal.size()) throw std::invalid_argument("allocation length mismatch");
    if (actual.size() == 0) throw std::invalid_argument("empty allocations");
    long matches = 0;
    for (long i = 0; i < actual.size(); ++i)
        if (actual[i] == optimal[i]) ++matches;
    return static_cast<double>(matches) / static_cast<double>(actual.size());
}

/// Per-floor inversion frequencies of the weak-overlap experiment; the sparse
/// probe sits at the 1st percentile of the thin arm's observed support, the
/// covered probe at its 99th.
struct InversionPoint {
    double overlap_floor = 0.0;
    double sparse_probe_frequency = 0.0;
    double covered_probe_frequency = 0.0;
    double overall_frequency = 0.0;
};

/// Two-arm demonstration of preference inversion under weak overlap: arm 1 is
/// rarely observed on the left half of the support where its true mean is
/// curved, so the linear extrapolation of its right-half data flips the
/// preference at the sparse probe. The baseline arm pays a flat 0.05, arm 1
/// pays x^2 on the first feature.
inline std::vector<InversionPoint> inversion_experiment(const std::vector<double>& overlap_floors,
                                                        const std::vector<std::uint64_t>& seeds, long n) {
    constexpr double kBaselineReward = 0.02;
    constexpr double kAssignmentSteepness = 4.0;
    std::vector<InversionPoint> results;
    for (double floor : overlap_floors) {
        long sparse_inversions = 0, covered_inversions = 0;
        for (std::uint64_t seed : seeds) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> normal(0.0, 1.0);

            Eigen::MatrixXd features(n, 1);
            Eigen::VectorXi actions(n);
            Eigen::VectorXd rewards(n);
            std::vector<double> arm1_support;
            for (long i = 0; i < n; ++i) {
                const double x = unif(rng);
                Eigen::Vector2d probs;
                const double q = 1.0 / (1.0 + std::exp(-kAssignmentSteepness * x));
                probs << 1.0 - q, q;
                probs = floor_distribution(probs, floor);
                const int d = unit(rng) <= probs[0] ? 0 : 1;
                features(i, 0) = x;
                actions[i] = d;
                rewards[i] = (d == 0 ? kBaselineReward : x * x) + 0.1 * normal(rng);
                if (d == 1) arm1_support.push_back(x);
            }
            const Dataset data = make_dataset(std::move(features), std::move(actions), std::move(rewards), 2);
            const ConditionalMeanModel model = fit_conditional_means(data, 1e-8);

            const double probes[2] = {quantile(arm1_support, 0.01), quantile(arm1_support, 0.99)};
            for (int which = 0; which < 2; ++which) {
                Eigen::VectorXd x(1);
                x << probes[which];
                const int fitted = argmax_lowest(model.predict_all(x));
                const int truth = probes[which] * probes[which] > kBaselineReward ? 1 : 0;
                if (fitted != truth) (which == 0 ? sparse_inversions : covered_inversions) += 1;
            }
        }
        const double trials = static_cast<double>(seeds.size());
        results.push_back({floor, sparse_inversions / trials, covered_inversions / trials,
                           (sparse_inversions + covered_inversions) / (2.0 * trials)});
    }
    return results;
}

/// Bias of the estimated value of a learned policy at one confounding level.
struct ConfoundingPoint {
    double confounder_strength = 0.0;
    double mean_bias = 0.0;
    double median_abs_bias = 0.0;
    double se = 0.0;  // standard error of the mean bias across seeds
};

/// Sensitivity sweep for hidden confounding: a first-best policy is learned
/// on one half-sample, its value is estimated on an independent half-sample,
/// and both are compared with the exact deployment value. With
/// `include_confounder` the hidden scalar is restored to the feature set,
/// which removes the bias again.
inline std::vector<ConfoundingPoint> confounding_sweep(const std::vector<double>& confounder_strengths,
                                                       const std::vector<std::uint64_t>& seeds, long n,
                                                       bool include_confounder = false) {
    std::vector<ConfoundingPoint> results;
    for (double gamma : confounder_strengths) {
        std::vector<double> biases;
        for (std::uint64_t seed : seeds) {
            DgpSpec spec;
            spec.n = 2 * n;
            spec.p = 3;
            spec.arms = 3;
            spec.coef_seed = 7;
            spec.noise_sd = 0.5;
            spec.overlap_floor = 0.05;
            spec.quadratic_scale = 0.0;  // keeps the linear learner correctly specified
            spec.confounder_strength = gamma;
            const SyntheticData synthetic = generate_synthetic(spec, seed);

            auto half = [&](long offset) {
                Eigen::MatrixXd x = synthetic.data.features.middleRows(offset, n);
                Eigen::VectorXi d = synthetic.data.actions.segment(offset, n);
                Eigen::VectorXd y = synthetic.data.rewards.segment(offset, n);
                Dataset part = make_dataset(std::move(x), std::move(d), std::move(y), spec.arms,
                                            synthetic.data.feature_names);
                if (include_confounder)
                    part = append_feature(part, "u", synthetic.hidden_confounder.segment(offset, n));
                return part;
            };
            const Dataset learn_half = half(0);
            const Dataset eval_half = half(n);

            const ConditionalMeanModel policy_model = fit_conditional_means(learn_half, 1e-6);
            const Eigen::VectorXi assignment = first_best(policy_model.predict_matrix(eval_half.features));
            const ConditionalMeanModel eval_model = fit_conditional_means(eval_half, 1e-6);
            NuisanceEstimates nuisance;
            nuisance.mu_hat = eval_model.predict_matrix(eval_half.features);
            nuisance.p_hat = Eigen::MatrixXd::Constant(n, spec.arms, 1.0 / spec.arms);
            const double estimated = value_ra(assignment, nuisance).value;

            // Exact deployment value: the hidden confounder is independent of
            // a policy-chosen action, so it contributes nothing on average.
            std::mt19937_64 mc_rng(0xC0FFEE ^ seed);
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            const long draws = 100000;
            double truth = 0.0;
            Eigen::VectorXd x(include_confounder ? spec.p + 1 : spec.p);
            for (long t = 0; t < draws; ++t) {
                for (long c = 0; c < x.size(); ++c) x[c] = unif(mc_rng);
                const int arm = argmax_lowest(policy_model.predict_all(x));
                truth += synthetic.truth.mu(arm, x.head(spec.p));
            }
            truth /= static_cast<double>(draws);
            biases.push_back(estimated - truth);
        }
        ConfoundingPoint point;
        point.confounder_strength = gamma;
        Eigen::Map<Eigen::VectorXd> b(biases.data(), static_cast<long>(biases.size()));
        point.mean_bias = b.mean();
        point.se = sample_sd(b) / std::sqrt(static_cast<double>(biases.size()));
        std::vector<double> abs_biases;
        for (double v : biases) abs_biases.push_back(std::abs(v));
        point.median_abs_bias = quantile(abs_biases, 0.5);
        results.push_back(point);
    }
    return results;
}

}  // namespace opl
