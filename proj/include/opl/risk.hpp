#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"
#include "opl/policy.hpp"
#include "opl/ridge.hpp"
#include "opl/value.hpp"

namespace opl {

enum class RiskRegime { neutral, linear, quadratic, mean_variance };

inline const char* risk_regime_name(RiskRegime r) {
    switch (r) {
        case RiskRegime::neutral: return "neutral";
        case RiskRegime::linear: return "linear";
        case RiskRegime::quadratic: return "quadratic";
        case RiskRegime::mean_variance: return "mean_variance";
    }
    return "?";
}

/// Decision-maker preferences over the (conditional mean, conditional
/// standard deviation) pair. `rho` is the absolute risk tolerance of the
/// mean-variance criterion; `sigma_floor` guards the ratio utilities against
/// a vanishing dispersion estimate.
struct RiskProfile {
    RiskRegime regime = RiskRegime::neutral;
    double rho = 0.0;
    double sigma_floor = 1e-6;

    static RiskProfile neutral() { return {}; }
    static RiskProfile linear() { return {RiskRegime::linear, 0.0, 1e-6}; }
    static RiskProfile quadratic() { return {RiskRegime::quadratic, 0.0, 1e-6}; }
    static RiskProfile mean_variance(double rho) {
        if (rho < 0.0) throw std::invalid_argument("risk tolerance must be non-negative");
        return {RiskRegime::mean_variance, rho, 1e-6};
    }
};

/// Preference score of one (mean, dispersion) pair; higher is better in
/// every regime. The mean-variance criterion is negated so the minimizing
/// convention of that objective maps onto the common argmax.
inline double utility(double mu, double sigma, const RiskProfile& profile) {
    if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
    const double s = std::max(sigma, profile.sigma_floor);
    switch (profile.regime) {
        case RiskRegime::neutral: return mu;
        case RiskRegime::linear: return mu / s;
        case RiskRegime::quadratic: return mu / (s * s);
        case RiskRegime::mean_variance: return -(sigma * sigma - profile.rho * mu);
    }
    return mu;
}

/// Conditional variance per unit and arm as a difference of two fitted
/// conditional means (targets Y^2 and Y), clamped below at zero.
inline Eigen::MatrixXd conditional_variance(const Dataset& data, double ridge) {
    const ConditionalMeanModel mean_model = detail::fit_means_to(data, data.rewards, ridge);
    const Eigen::VectorXd squared = data.rewards.array().square();
    const ConditionalMeanModel second_moment = detail::fit_means_to(data, squared, ridge);
    Eigen::MatrixXd variance =
        second_moment.predict_matrix(data.features) - mean_model.predict_matrix(data.features).array().square().matrix();
    return variance.cwiseMax(0.0);
}

/// Per-unit argmax of utility over arms; ties go to the lowest arm.
inline Eigen::VectorXi risk_adjusted_first_best(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma,
                                                const RiskProfile& profile) {
    if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols())
        throw std::invalid_argument("mu and sigma matrices must be congruent");
    Eigen::VectorXi arms(mu.rows());
    for (long i = 0; i < mu.rows(); ++i) {
        Eigen::VectorXd scores(mu.cols());
        for (long j = 0; j < mu.cols(); ++j) scores[j] = utility(mu(i, j), sigma(i, j), profile);
        arms[i] = argmax_lowest(scores);
    }
    return arms;
}

struct RiskAdjustedScores {
    Eigen::MatrixXd mu, sigma, utility;  // N x arms
    Eigen::VectorXi chosen;
};

inline RiskAdjustedScores risk_scores(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma,
                                      const RiskProfile& profile) {
    RiskAdjustedScores scores{mu, sigma, Eigen::MatrixXd(mu.rows(), mu.cols()), Eigen::VectorXi(mu.rows())};
    for (long i = 0; i < mu.rows(); ++i)
        for (long j = 0; j < mu.cols(); ++j) scores.utility(i, j) = utility(mu(i, j), sigma(i, j), profile);
    scores.chosen = risk_adjusted_first_best(mu, sigma, profile);
    return scores;
}

inline void save_risk_scores_csv(const RiskAdjustedScores& scores, std::ostream& out) {
    out << "unit,arm,mu,sigma,utility,chosen\n";
    for (long i = 0; i < scores.mu.rows(); ++i)
        for (long j = 0; j < scores.mu.cols(); ++j)
            out << i << ',' << j << ',' << detail::format_double(scores.mu(i, j)) << ','
                << detail::format_double(scores.sigma(i, j)) << ','
                << detail::format_double(scores.utility(i, j)) << ',' << (scores.chosen[i] == j ? 1 : 0)
                << '\n';
}

/// Closed-form one-threshold setting: reward alpha(c)*1[X < c] + noise. The
/// optima below are grid argmaxes of the exact average reward and of its
/// risk-adjusted ratio.
struct ClosedFormExample {
    std::function<double(double)> alpha;
    std::function<double(double)> cdf;
    double noise_var = 0.0;
    std::vector<double> c_grid;
};

struct GridOptimum {
    double c = 0.0;
    double value = 0.0;
};

inline GridOptimum example1_optimum(const ClosedFormExample& ex) {
    if (ex.c_grid.empty()) throw std::invalid_argument("grid must be non-empty");
    GridOptimum best{ex.c_grid.front(), ex.alpha(ex.c_grid.front()) * ex.cdf(ex.c_grid.front())};
    for (double c : ex.c_grid) {
        const double v = ex.alpha(c) * ex.cdf(c);
        if (v > best.value) best = {c, v};
    }
    return best;
}

inline GridOptimum example2_optimum(const ClosedFormExample& ex) {
    if (ex.c_grid.empty()) throw std::invalid_argument("grid must be non-empty");
    bool first = true;
    GridOptimum best;
    for (double c : ex.c_grid) {
        const double a = ex.alpha(c);
        const double f = ex.cdf(c);
        const double denom = a * a * f * (1.0 - f) + ex.noise_var;
        if (denom <= 0.0)
            throw std::domain_error("risk-adjusted reward undefined: zero variance at c=" + std::to_string(c));
        const double gamma = a * f / denom;
        if (first || gamma > best.value) best = {c, gamma};
        first = false;
    }
    return best;
}

/// One row of the risk-preference sweep: the optimal allocation, its match
/// rate against the observed actions, and the regret of the observed policy
/// under each estimator.
struct RiskSweepRow {
    RiskRegime regime = RiskRegime::neutral;
    double match_rate = 0.0;
    double regret_ra = 0.0;
    double regret_ipw = 0.0;
    double regret_dr = 0.0;
    Eigen::VectorXi optimal;
};

/// Runs the risk-adjusted first-best allocation for each requested regime on
/// one dataset, with batch-fitted nuisances shared across regimes.
inline std::vector<RiskSweepRow> risk_sweep(const Dataset& data, double ridge, double p_min,
                                            const std::vector<RiskProfile>& profiles) {
    const NuisanceEstimates nuisance = batch_nuisance(data, ridge, p_min);
    const Eigen::MatrixXd sigma = conditional_variance(data, ridge).cwiseSqrt();

    std::vector<RiskSweepRow> rows;
    rows.reserve(profiles.size());
    for (const RiskProfile& profile : profiles) {
        RiskSweepRow row;
        row.regime = profile.regime;
        row.optimal = risk_adjusted_first_best(nuisance.mu_hat, sigma, profile);
        long matches = 0;
        for (long i = 0; i < data.n(); ++i)
            if (row.optimal[i] == data.actions[i]) ++matches;
        row.match_rate = static_cast<double>(matches) / static_cast<double>(data.n());
        row.regret_ra = regret(value_ra(row.optimal, nuisance), value_ra(data.actions, nuisance));
        row.regret_ipw = regret(value_ipw(data, row.optimal, nuisance), value_ipw(data, data.actions, nuisance));
        row.regret_dr = regret(value_dr(data, row.optimal, nuisance), value_dr(data, data.actions, nuisance));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace opl
