#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "opl/common.hpp"
#include "opl/dataset.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Multinomial logistic propensity model, reference-coded on arm 0.
/// Predicted probabilities are floored at `p_min` by mixing with the uniform
/// distribution, so they stay positive and keep summing to one.
class PropensityModel {
public:
    PropensityModel() = default;
    PropensityModel(int arms, int p, double p_min)
        : p_min_(p_min), coef_(Eigen::MatrixXd::Zero(arms - 1, p + 1)), arms_(arms) {}

    int arms() const { return arms_; }
    int p() const { return static_cast<int>(coef_.cols()) - 1; }
    double p_min() const { return p_min_; }
    const Eigen::MatrixXd& coefficients() const { return coef_; }
    Eigen::MatrixXd& coefficients() { return coef_; }

    Eigen::VectorXd predict(const Eigen::VectorXd& x) const {
        Eigen::VectorXd scores(arms_);
        scores[0] = 0.0;
        for (int j = 1; j < arms_; ++j)
            scores[j] = coef_(j - 1, 0) + coef_.row(j - 1).tail(coef_.cols() - 1).dot(x);
        return floor_distribution(softmax(scores), p_min_);
    }

    Eigen::MatrixXd predict_matrix(const Eigen::MatrixXd& features) const {
        Eigen::MatrixXd out(features.rows(), arms_);
        for (long i = 0; i < features.rows(); ++i) out.row(i) = predict(features.row(i)).transpose();
        return out;
    }

    void save(std::ostream& out) const {
        out << "propensity_model\n";
        out << "arms " << arms_ << "\nfeatures " << p() << "\npmin " << detail::format_double(p_min_) << '\n';
        for (int j = 1; j < arms_; ++j) {
            out << "arm " << j;
            for (long k = 0; k < coef_.cols(); ++k) out << ' ' << detail::format_double(coef_(j - 1, k));
            out << '\n';
        }
    }

    static PropensityModel load(std::istream& in) {
        std::string tag;
        in >> tag;
        if (tag != "propensity_model") throw std::runtime_error("not a propensity model file");
        int arms = 0, p = 0;
        double p_min = 0.0;
        in >> tag >> arms >> tag >> p >> tag >> p_min;
        PropensityModel m(arms, p, p_min);
        for (int j = 1; j < arms; ++j) {
            int arm = 0;
            in >> tag >> arm;
            for (int k = 0; k <= p; ++k) in >> m.coef_(arm - 1, k);
        }
        if (!in) throw std::runtime_error("truncated propensity model file");
        return m;
    }

private:
    double p_min_ = 0.01;
    Eigen::MatrixXd coef_;  // (arms-1) x (p+1), raw feature units
    int arms_ = 0;
};

namespace detail {

// Mean log-likelihood of reference-coded scores (arm 0 score is zero).
inline double multinomial_loglik(const Eigen::MatrixXd& scores, const Eigen::VectorXi& actions) {
    double total = 0.0;
    for (long i = 0; i < scores.rows(); ++i) {
        double m = 0.0;
        for (long j = 0; j < scores.cols(); ++j) m = std::max(m, scores(i, j));
        double sum = std::exp(-m);
        for (long j = 0; j < scores.cols(); ++j) sum += std::exp(scores(i, j) - m);
        const double lse = m + std::log(sum);
        const double own = actions[i] == 0 ? 0.0 : scores(i, actions[i] - 1);
        total += own - lse;
    }
    return total / static_cast<double>(scores.rows());
}

}  // namespace detail

/// Full-batch gradient ascent on the mean log-likelihood. The trial step
/// doubles after every accepted iteration and backtracks by halving until the
/// Armijo condition holds; convergence when the gradient max-norm drops below
/// 1e-6, iteration cap 10000.
inline PropensityModel fit_propensity(const Dataset& data, double p_min) {
    if (data.arms() < 2) throw std::invalid_argument("propensity fit needs at least two arms");
    if (p_min <= 0.0 || p_min >= 1.0 / data.arms())
        throw std::invalid_argument("p_min must lie in (0, 1/(J+1))");
    const auto counts = arm_counts(data);
    for (int j = 0; j < data.arms(); ++j)
        if (counts[static_cast<std::size_t>(j)] == 0) throw MissingArmError(j, "propensity fit");

    const long n = data.n();
    const int p = data.p();
    const int k = data.arms() - 1;

    // Standardize for the ascent; coefficients are mapped back afterwards.
    Eigen::VectorXd mean = data.features.colwise().mean();
    Eigen::VectorXd scale(p);
    for (int c = 0; c < p; ++c) {
        const double var = (data.features.col(c).array() - mean[c]).square().sum() / static_cast<double>(n);
        scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (int c = 0; c < p; ++c) design.col(c + 1) = (data.features.col(c).array() - mean[c]) / scale[c];

    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
    for (long i = 0; i < n; ++i)
        if (data.actions[i] > 0) onehot(i, data.actions[i] - 1) = 1.0;

    constexpr double kTolerance = 1e-6;
    // A stalled ascent (no representable improvement left) is accepted when
    // the gradient is already small; collinear features can leave the
    // maximizer at the edge of double precision.
    constexpr double kStallTolerance = 1e-4;
    constexpr long kMaxIterations = 10000;
    constexpr double kArmijo = 1e-4;

    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(k, p + 1);
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, k);
    double loglik = detail::multinomial_loglik(scores, data.actions);
    Eigen::MatrixXd prev_weights, prev_grad;
    double grad_norm = 0.0;
    bool converged = false;
    long stalled_iterations = 0;

    for (long iter = 0; iter < kMaxIterations; ++iter) {
        Eigen::MatrixXd probs(n, k);
        for (long i = 0; i < n; ++i) {
            double m = 0.0;
            for (int j = 0; j < k; ++j) m = std::max(m, scores(i, j));
            double denom = std::exp(-m);
            for (int j = 0; j < k; ++j) denom += std::exp(scores(i, j) - m);
            for (int j = 0; j < k; ++j) probs(i, j) = std::exp(scores(i, j) - m) / denom;
        }
        Eigen::MatrixXd grad = ((onehot - probs).transpose() * design) / static_cast<double>(n);
        grad_norm = grad.cwiseAbs().maxCoeff();
        if (grad_norm < kTolerance) {
            converged = true;
            break;
        }

        // Barzilai-Borwein spectral trial step, safeguarded by Armijo halving.
        double trial = 1.0;
        if (iter > 0) {
            const Eigen::MatrixXd dw = weights - prev_weights;
            const Eigen::MatrixXd dg = grad - prev_grad;
            const double denom = dg.squaredNorm();
            if (denom > 0.0) trial = std::clamp(std::abs(dw.cwiseProduct(dg).sum()) / denom, 1e-12, 1e12);
        }
        prev_weights = weights;
        prev_grad = grad;

        const double gsq = grad.squaredNorm();
        const double before = loglik;
        while (true) {
            Eigen::MatrixXd candidate = weights + trial * grad;
            Eigen::MatrixXd cand_scores = design * candidate.transpose();
            const double cand_loglik = detail::multinomial_loglik(cand_scores, data.actions);
            if (cand_loglik >= loglik + kArmijo * trial * gsq) {
                weights = std::move(candidate);
                scores = std::move(cand_scores);
                loglik = cand_loglik;
                break;
            }
            trial /= 2.0;
            if (trial < 1e-18) break;  // no improving step representable
        }
        if (trial < 1e-18) {
            converged = grad_norm < kStallTolerance;
            break;
        }
        stalled_iterations = loglik - before < 1e-13 * (1.0 + std::abs(loglik)) ? stalled_iterations + 1 : 0;
        if (stalled_iterations >= 200) {
            converged = grad_norm < kStallTolerance;
            break;
        }
    }
    if (!converged) throw ConvergenceError(grad_norm, kMaxIterations);

    PropensityModel model(data.arms(), p, p_min);
    for (int j = 0; j < k; ++j) {
        Eigen::VectorXd raw(p + 1);
        for (int c = 0; c < p; ++c) raw[c + 1] = weights(j, c + 1) / scale[c];
        raw[0] = weights(j, 0) - raw.tail(p).dot(mean);
        model.coefficients().row(j) = raw.transpose();
    }
    return model;
}

}  // namespace opl
