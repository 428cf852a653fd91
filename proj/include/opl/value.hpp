#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"

namespace opl {

enum class Estimator { ra, ipw, dr };

inline const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::ra: return "ra";
        case Estimator::ipw: return "ipw";
        case Estimator::dr: return "dr";
    }
    return "?";
}

inline Estimator estimator_from_name(const std::string& name) {
    if (name == "ra") return Estimator::ra;
    if (name == "ipw") return Estimator::ipw;
    if (name == "dr") return Estimator::dr;
    throw std::invalid_argument("unknown estimator '" + name + "'");
}

/// A value-function estimate. `n_effective` counts the units whose observed
/// action matches the policy (all units for the plug-in RA estimator).
struct ValueReport {
    Estimator estimator = Estimator::ra;
    double value = 0.0;
    long n_effective = 0;
};

namespace detail {

inline void check_assignments(const Eigen::VectorXi& assignments, int arms, long n) {
    if (assignments.size() != n) throw std::invalid_argument("assignment length mismatch");
    for (long i = 0; i < n; ++i)
        if (assignments[i] < 0 || assignments[i] >= arms)
            throw std::invalid_argument("assignment out of range at unit " + std::to_string(i));
}

}  // namespace detail

/// Direct method: the average plug-in prediction at the policy's action.
inline ValueReport value_ra(const Eigen::VectorXi& assignments, const NuisanceEstimates& nuisance) {
    const long n = nuisance.mu_hat.rows();
    detail::check_assignments(assignments, static_cast<int>(nuisance.mu_hat.cols()), n);
    double sum = 0.0;
    for (long i = 0; i < n; ++i) sum += nuisance.mu_hat(i, assignments[i]);
    return {Estimator::ra, sum / static_cast<double>(n), n};
}

/// Inverse probability weighting: observed rewards of policy-matching units,
/// reweighted by the inverse estimated propensity of the observed action.
inline ValueReport value_ipw(const Dataset& data, const Eigen::VectorXi& assignments,
                             const NuisanceEstimates& nuisance) {
    detail::check_assignments(assignments, data.arms(), data.n());
    double sum = 0.0;
    long matches = 0;
    for (long i = 0; i < data.n(); ++i) {
        if (data.actions[i] != assignments[i]) continue;
        sum += data.rewards[i] / nuisance.p_hat(i, data.actions[i]);
        ++matches;
    }
    return {Estimator::ipw, sum / static_cast<double>(data.n()), matches};
}

/// Doubly robust: plug-in prediction plus the propensity-weighted residual of
/// matching units.
inline ValueReport value_dr(const Dataset& data, const Eigen::VectorXi& assignments,
                            const NuisanceEstimates& nuisance) {
    detail::check_assignments(assignments, data.arms(), data.n());
    double sum = 0.0;
    long matches = 0;
    for (long i = 0; i < data.n(); ++i) {
        sum += nuisance.mu_hat(i, assignments[i]);
        if (data.actions[i] != assignments[i]) continue;
        sum += (data.rewards[i] - nuisance.mu_hat(i, data.actions[i])) / nuisance.p_hat(i, data.actions[i]);
        ++matches;
    }
    return {Estimator::dr, sum / static_cast<double>(data.n()), matches};
}

inline ValueReport value_estimate(Estimator kind, const Dataset& data, const Eigen::VectorXi& assignments,
                                  const NuisanceEstimates& nuisance) {
    switch (kind) {
        case Estimator::ra: return value_ra(assignments, nuisance);
        case Estimator::ipw: return value_ipw(data, assignments, nuisance);
        case Estimator::dr: return value_dr(data, assignments, nuisance);
    }
    throw std::invalid_argument("unknown estimator");
}

/// Welfare loss of a policy against an optimum, measured with one estimator.
inline double regret(const ValueReport& report_opt, const ValueReport& report_pi) {
    if (report_opt.estimator != report_pi.estimator)
        throw std::invalid_argument("regret must compare reports from the same estimator");
    return report_opt.value - report_pi.value;
}

/// Per-unit nuisance deviations: delta is the conditional-mean error at the
/// policy action, prop_dev is 1 - p/p_hat at the observed action, and
/// eps_sq_mean is the sample mean of the squared matched residual term.
struct DeviationProfile {
    Eigen::VectorXd delta;     // mu_hat_pi - mu_pi
    Eigen::VectorXd prop_dev;  // 1 - p_D / p_hat_D
    double eps_sq_mean = 0.0;
};

inline DeviationProfile deviation_profile(const Dataset& data, const Eigen::VectorXi& assignments,
                                          const NuisanceEstimates& nuisance, const Eigen::VectorXd& true_mu_pi,
                                          const Eigen::VectorXd& true_p_obs) {
    const long n = data.n();
    detail::check_assignments(assignments, data.arms(), n);
    DeviationProfile profile;
    profile.delta.resize(n);
    profile.prop_dev.resize(n);
    double eps_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        profile.delta[i] = nuisance.mu_hat(i, assignments[i]) - true_mu_pi[i];
        profile.prop_dev[i] = 1.0 - true_p_obs[i] / nuisance.p_hat(i, data.actions[i]);
        if (data.actions[i] == assignments[i]) {
            const double eps = (data.rewards[i] - true_mu_pi[i]) / nuisance.p_hat(i, assignments[i]);
            eps_sq += eps * eps;
        }
    }
    profile.eps_sq_mean = eps_sq / static_cast<double>(n);
    return profile;
}

struct BiasTriple {
    double ra = 0.0, ipw = 0.0, dr = 0.0;
};

/// Sample analogues of the estimator bias magnitudes as functions of the
/// nuisance deviations.
inline BiasTriple bias_formulas(const DeviationProfile& profile, const Eigen::VectorXd& mu_pi) {
    BiasTriple bias;
    bias.ra = std::abs(profile.delta.mean());
    bias.ipw = std::abs((mu_pi.array() * profile.prop_dev.array()).mean());
    bias.dr = std::abs((profile.delta.array() * profile.prop_dev.array()).mean());
    return bias;
}

struct VarianceTriple {
    double ra = 0.0, ipw = 0.0, dr = 0.0;
};

/// Sample analogues of the estimator variances. The squared-residual term is
/// taken as the sample mean of eps^2 (its subscripted form is left undefined
/// in the source derivation); p_pi is the true propensity of the policy's
/// action per unit.
inline VarianceTriple variance_formulas(const DeviationProfile& profile, const Eigen::VectorXd& mu_pi,
                                        const Eigen::VectorXd& p_pi, long n) {
    if ((p_pi.array() <= 0.0).any()) throw std::domain_error("policy propensities must be positive");
    if (n < 1) throw std::invalid_argument("n must be positive");
    const double nd = static_cast<double>(n);
    VarianceTriple var;

    var.ra = sample_variance(mu_pi + profile.delta) / nd;

    const Eigen::ArrayXd one_minus_dev = 1.0 - profile.prop_dev.array();
    const Eigen::ArrayXd weight = (1.0 - p_pi.array()) / p_pi.array();
    {
        const Eigen::VectorXd center = (mu_pi.array() - mu_pi.array() * profile.prop_dev.array()).matrix();
        const double penalty = (weight * mu_pi.array().square() * one_minus_dev.square()).mean();
        var.ipw = (profile.eps_sq_mean + sample_variance(center) + penalty) / nd;
    }
    {
        const Eigen::VectorXd center = (mu_pi.array() + profile.delta.array() * profile.prop_dev.array()).matrix();
        const double penalty = (weight * profile.delta.array().square() * one_minus_dev.square()).mean();
        var.dr = (profile.eps_sq_mean + sample_variance(center) + penalty) / nd;
    }
    return var;
}

}  // namespace opl
