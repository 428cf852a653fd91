#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"

namespace opl {

/// Reference data-generating process: features are independent uniform(-1,1),
/// per-arm means are linear plus one quadratic term in the first feature,
/// assignment is multinomial-logistic floored at `overlap_floor`, and an
/// optional hidden confounder enters both the assignment score and the
/// reward with weight `confounder_strength`.
struct DgpSpec {
    long n = 1000;
    int p = 3;
    int arms = 3;
    std::uint64_t coef_seed = 0;
    double noise_sd = 1.0;
    double overlap_floor = 0.05;
    double confounder_strength = 0.0;
    double quadratic_scale = 1.0;    // scales the per-arm quadratic coefficients
    double assignment_strength = 1.0;  // scales the assignment score slopes
};

struct McValue {
    double value = 0.0;
    double se = 0.0;
};

/// Ground truth of a generated sample: exact conditional means, propensities,
/// the optimal policy, and value evaluators for arbitrary policies.
struct SyntheticTruth {
    Eigen::VectorXd mu_intercept;     // per arm
    Eigen::MatrixXd mu_slopes;        // arms x p
    Eigen::VectorXd mu_quadratic;     // per arm, on the first feature squared
    Eigen::VectorXd score_intercept;  // per arm, arm 0 fixed at zero
    Eigen::MatrixXd score_slopes;     // arms x p
    double overlap_floor = 0.0;
    double confounder_strength = 0.0;

    int arms() const { return static_cast<int>(mu_intercept.size()); }
    int p() const { return static_cast<int>(mu_slopes.cols()); }

    double mu(int arm, const Eigen::VectorXd& x) const {
        return mu_intercept[arm] + mu_slopes.row(arm).dot(x) + mu_quadratic[arm] * x[0] * x[0];
    }

    Eigen::VectorXd mu_all(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(arms());
        for (int j = 0; j < arms(); ++j) out[j] = mu(j, x);
        return out;
    }

    Eigen::VectorXd assignment_scores(const Eigen::VectorXd& x, double u) const {
        Eigen::VectorXd s(arms());
        for (int j = 0; j < arms(); ++j)
            s[j] = score_intercept[j] + score_slopes.row(j).dot(x) + confounder_strength * u * j;
        return s;
    }

    Eigen::VectorXd propensity_given_confounder(const Eigen::VectorXd& x, double u) const {
        return floor_distribution(softmax(assignment_scores(x, u)), overlap_floor);
    }

    /// P(D = j | x): the assignment probabilities marginalized over the
    /// hidden confounder (Simpson quadrature over its uniform(-1,1) support).
    Eigen::VectorXd propensity(const Eigen::VectorXd& x) const {
        if (confounder_strength == 0.0) return propensity_given_confounder(x, 0.0);
        constexpr int kNodes = 33;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(arms());
        double weight_sum = 0.0;
        for (int t = 0; t < kNodes; ++t) {
            const double u = -1.0 + 2.0 * t / (kNodes - 1);
            const double w = (t == 0 || t == kNodes - 1) ? 1.0 : (t % 2 == 1 ? 4.0 : 2.0);
            acc += w * propensity_given_confounder(x, u);
            weight_sum += w;
        }
        return acc / weight_sum;
    }

    int optimal_arm(const Eigen::VectorXd& x) const { return argmax_lowest(mu_all(x)); }

    Eigen::MatrixXd mu_matrix(const Eigen::MatrixXd& features) const {
        Eigen::MatrixXd out(features.rows(), arms());
        for (long i = 0; i < features.rows(); ++i) out.row(i) = mu_all(features.row(i)).transpose();
        return out;
    }

    Eigen::MatrixXd propensity_matrix(const Eigen::MatrixXd& features) const {
        Eigen::MatrixXd out(features.rows(), arms());
        for (long i = 0; i < features.rows(); ++i) out.row(i) = propensity(features.row(i)).transpose();
        return out;
    }

    /// Exact value of a threshold rule on one feature: each arm's region is an
    /// interval of the uniform support, so the integral has a closed form.
    double threshold_policy_value(int feature_index, const std::vector<double>& knots) const {
        double total = 0.0;
        const int top_arm = static_cast<int>(knots.size());
        for (int arm = 0; arm <= top_arm; ++arm) {
            const double lo = std::max(arm == 0 ? -1.0 : knots[static_cast<std::size_t>(arm - 1)], -1.0);
            const double hi = std::min(arm == top_arm ? 1.0 : knots[static_cast<std::size_t>(arm)], 1.0);
            if (lo >= hi) continue;
            const double prob = (hi - lo) / 2.0;
            const double lin = (hi * hi - lo * lo) / 4.0;
            const double quad = feature_index == 0 ? (hi * hi * hi - lo * lo * lo) / 6.0 : prob / 3.0;
            total += mu_intercept[arm] * prob + mu_slopes(arm, feature_index) * lin + mu_quadratic[arm] * quad;
        }
        return total;
    }

    /// Monte Carlo value of an arbitrary policy over fresh uniform features.
    McValue policy_value_mc(const std::function<int(const Eigen::VectorXd&)>& policy,
                            long draws = 200000, std::uint64_t seed = 20240601) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Eigen::VectorXd x(p());
        double sum = 0.0, sum_sq = 0.0;
        for (long i = 0; i < draws; ++i) {
            for (int c = 0; c < p(); ++c) x[c] = unif(rng);
            const double v = mu(policy(x), x);
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / static_cast<double>(draws);
        const double var = sum_sq / static_cast<double>(draws) - mean * mean;
        return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(draws))};
    }

    McValue optimal_value(long draws = 200000, std::uint64_t seed = 20240601) const {
        return policy_value_mc([this](const Eigen::VectorXd& x) { return optimal_arm(x); }, draws, seed);
    }
};

struct SyntheticData {
    Dataset data;
    SyntheticTruth truth;
    Eigen::VectorXd hidden_confounder;  // the u draws, excluded from features
};

inline SyntheticData generate_synthetic(const DgpSpec& spec, std::uint64_t rng_seed) {
    if (spec.n < 1) throw std::invalid_argument("n must be at least 1");
    if (spec.arms < 2) throw std::invalid_argument("at least two arms required");
    if (spec.p < 1) throw std::invalid_argument("at least one feature required");
    if (spec.noise_sd < 0.0) throw std::invalid_argument("noise sd must be non-negative");
    if (spec.overlap_floor < 0.0 || spec.overlap_floor > 1.0 / spec.arms)
        throw std::invalid_argument("infeasible overlap floor: must lie in [0, 1/(J+1)]");

    SyntheticTruth truth;
    truth.overlap_floor = spec.overlap_floor;
    truth.confounder_strength = spec.confounder_strength;
    {
        std::mt19937_64 coef_rng(spec.coef_seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        truth.mu_intercept.resize(spec.arms);
        truth.mu_slopes.resize(spec.arms, spec.p);
        truth.mu_quadratic.resize(spec.arms);
        truth.score_intercept = Eigen::VectorXd::Zero(spec.arms);
        truth.score_slopes = Eigen::MatrixXd::Zero(spec.arms, spec.p);
        for (int j = 0; j < spec.arms; ++j) {
            truth.mu_intercept[j] = unif(coef_rng);
            for (int c = 0; c < spec.p; ++c) truth.mu_slopes(j, c) = unif(coef_rng);
            truth.mu_quadratic[j] = spec.quadratic_scale * unif(coef_rng);
        }
        for (int j = 1; j < spec.arms; ++j) {
            truth.score_intercept[j] = spec.assignment_strength * 0.5 * unif(coef_rng);
            for (int c = 0; c < spec.p; ++c)
                truth.score_slopes(j, c) = spec.assignment_strength * unif(coef_rng);
        }
    }

    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd features(spec.n, spec.p);
    Eigen::VectorXi actions(spec.n);
    Eigen::VectorXd rewards(spec.n);
    Eigen::VectorXd confounder(spec.n);

    for (long i = 0; i < spec.n; ++i) {
        Eigen::VectorXd x(spec.p);
        for (int c = 0; c < spec.p; ++c) x[c] = unif(rng);
        const double u = unif(rng);
        const Eigen::VectorXd probs = truth.propensity_given_confounder(x, u);
        const double pick = unit(rng);
        int d = spec.arms - 1;
        double cum = 0.0;
        for (int j = 0; j < spec.arms; ++j) {
            cum += probs[j];
            if (pick <= cum) {
                d = j;
                break;
            }
        }
        features.row(i) = x.transpose();
        actions[i] = d;
        confounder[i] = u;
        rewards[i] = truth.mu(d, x) + spec.confounder_strength * u + spec.noise_sd * normal(rng);
    }

    SyntheticData out;
    out.data = make_dataset(std::move(features), std::move(actions), std::move(rewards), spec.arms);
    out.truth = std::move(truth);
    out.hidden_confounder = std::move(confounder);
    return out;
}

/// Appends the squared first feature as an extra column, mirroring the
/// squared-earnings columns of prepared application data. Fitting on the
/// augmented set makes the linear learner correctly specified for the
/// reference process; fitting on the raw set drops the quadratic term.
inline Dataset augment_quadratic(const Dataset& d) {
    Eigen::MatrixXd features(d.n(), d.p() + 1);
    features.leftCols(d.p()) = d.features;
    features.col(d.p()) = d.features.col(0).array().square();
    std::vector<std::string> names = d.feature_names;
    names.push_back(d.feature_names[0] + "_sq");
    return make_dataset(std::move(features), d.actions, d.rewards, d.arm_count, std::move(names));
}

inline Dataset append_feature(const Dataset& d, const std::string& name, const Eigen::VectorXd& values) {
    if (values.size() != d.n()) throw std::invalid_argument("feature length mismatch");
    Eigen::MatrixXd features(d.n(), d.p() + 1);
    features.leftCols(d.p()) = d.features;
    features.col(d.p()) = values;
    std::vector<std::string> names = d.feature_names;
    names.push_back(name);
    return make_dataset(std::move(features), d.actions, d.rewards, d.arm_count, std::move(names));
}

/// Nuisance estimates filled from the generating truth rather than a fit.
inline NuisanceEstimates oracle_nuisance(const Dataset& data, const SyntheticTruth& truth) {
    NuisanceEstimates est{truth.mu_matrix(data.features), truth.propensity_matrix(data.features),
                          Provenance::batch, 0, 0.0};
    est.p_min = est.p_hat.minCoeff();
    est.validate();
    return est;
}

}  // namespace opl
