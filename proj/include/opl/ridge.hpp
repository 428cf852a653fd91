#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "opl/dataset.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Per-arm linear model of the conditional reward mean, fitted by closed-form
/// ridge with an unpenalized intercept. Features are standardized internally
/// for the fit (the penalty applies to standardized slopes); stored
/// coefficients are in raw feature units.
class ConditionalMeanModel {
public:
    ConditionalMeanModel() = default;

    ConditionalMeanModel(int arms, int p, double ridge)
        : ridge_(ridge), coef_(static_cast<std::size_t>(arms), Eigen::VectorXd::Zero(p + 1)),
          count_(static_cast<std::size_t>(arms), 0) {}

    int arms() const { return static_cast<int>(coef_.size()); }
    int p() const { return coef_.empty() ? 0 : static_cast<int>(coef_[0].size()) - 1; }
    double ridge() const { return ridge_; }
    long training_count(int arm) const { return count_[static_cast<std::size_t>(arm)]; }
    const Eigen::VectorXd& coefficients(int arm) const { return coef_[static_cast<std::size_t>(arm)]; }
    Eigen::VectorXd& coefficients(int arm) { return coef_[static_cast<std::size_t>(arm)]; }
    void set_training_count(int arm, long c) { count_[static_cast<std::size_t>(arm)] = c; }

    double predict(int arm, const Eigen::VectorXd& x) const {
        const Eigen::VectorXd& b = coef_[static_cast<std::size_t>(arm)];
        return b[0] + b.tail(b.size() - 1).dot(x);
    }

    Eigen::VectorXd predict_all(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(arms());
        for (int j = 0; j < arms(); ++j) out[j] = predict(j, x);
        return out;
    }

    Eigen::MatrixXd predict_matrix(const Eigen::MatrixXd& features) const {
        Eigen::MatrixXd out(features.rows(), arms());
        for (int j = 0; j < arms(); ++j) {
            const Eigen::VectorXd& b = coef_[static_cast<std::size_t>(j)];
            out.col(j) = (features * b.tail(b.size() - 1)).array() + b[0];
        }
        return out;
    }

    /// One gradient step on the half-squared error of a single observation.
    /// Only the observation's arm changes. A non-finite candidate leaves the
    /// model untouched.
    void sgd_update(const Eigen::VectorXd& x, int arm, double y, double step) {
        if (step <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (arm < 0 || arm >= arms()) throw std::invalid_argument("invalid arm " + std::to_string(arm));
        Eigen::VectorXd& b = coef_[static_cast<std::size_t>(arm)];
        const double residual = y - (b[0] + b.tail(b.size() - 1).dot(x));
        Eigen::VectorXd candidate = b;
        candidate[0] += step * residual;
        candidate.tail(b.size() - 1) += step * residual * x;
        if (!candidate.allFinite())
            throw std::runtime_error("incremental update rejected: non-finite gradient (residual " +
                                     std::to_string(residual) + ", step " + std::to_string(step) + ")");
        b = candidate;
        ++count_[static_cast<std::size_t>(arm)];
    }

    void save(std::ostream& out) const {
        out << "conditional_mean_model\n";
        out << "arms " << arms() << "\nfeatures " << p() << "\nridge " << detail::format_double(ridge_) << '\n';
        for (int j = 0; j < arms(); ++j) {
            out << "arm " << j << " count " << count_[static_cast<std::size_t>(j)];
            for (long k = 0; k < coef_[static_cast<std::size_t>(j)].size(); ++k)
                out << ' ' << detail::format_double(coef_[static_cast<std::size_t>(j)][k]);
            out << '\n';
        }
    }

    static ConditionalMeanModel load(std::istream& in) {
        std::string tag;
        in >> tag;
        if (tag != "conditional_mean_model") throw std::runtime_error("not a conditional mean model file");
        int arms = 0, p = 0;
        double ridge = 0.0;
        in >> tag >> arms >> tag >> p >> tag >> ridge;
        ConditionalMeanModel m(arms, p, ridge);
        for (int j = 0; j < arms; ++j) {
            int arm = 0;
            long count = 0;
            in >> tag >> arm >> tag >> count;
            m.count_[static_cast<std::size_t>(arm)] = count;
            for (int k = 0; k <= p; ++k) in >> m.coef_[static_cast<std::size_t>(arm)][k];
        }
        if (!in) throw std::runtime_error("truncated conditional mean model file");
        return m;
    }

private:
    double ridge_ = 0.0;
    std::vector<Eigen::VectorXd> coef_;  // per arm: [intercept, slopes...]
    std::vector<long> count_;
};

namespace detail {

/// Ridge solve for one arm on standardized features; returns raw-space
/// coefficients [intercept, slopes...].
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& rows, const Eigen::VectorXd& targets, double ridge) {
    const long n = rows.rows();
    const long p = rows.cols();
    Eigen::VectorXd mean = rows.colwise().mean();
    Eigen::VectorXd scale(p);
    for (long k = 0; k < p; ++k) {
        const double var = (rows.col(k).array() - mean[k]).square().sum() / static_cast<double>(n);
        scale[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (long k = 0; k < p; ++k) design.col(k + 1) = (rows.col(k).array() - mean[k]) / scale[k];

    Eigen::VectorXd beta(p + 1);
    if (ridge > 0.0) {
        Eigen::MatrixXd gram = design.transpose() * design;
        for (long k = 1; k <= p; ++k) gram(k, k) += ridge;
        beta = gram.ldlt().solve(design.transpose() * targets);
    } else {
        beta = design.completeOrthogonalDecomposition().solve(targets);
    }

    Eigen::VectorXd raw(p + 1);
    raw.tail(p) = beta.tail(p).array() / scale.array();
    raw[0] = beta[0] - raw.tail(p).dot(mean);
    return raw;
}

inline ConditionalMeanModel fit_means_to(const Dataset& data, const Eigen::VectorXd& targets, double ridge) {
    if (ridge < 0.0) throw std::invalid_argument("ridge penalty must be non-negative");
    const auto counts = arm_counts(data);
    for (int j = 0; j < data.arms(); ++j) {
        if (counts[static_cast<std::size_t>(j)] == 0) throw MissingArmError(j, "conditional mean fit");
        if (ridge == 0.0 && counts[static_cast<std::size_t>(j)] < data.p() + 2)
            throw std::invalid_argument("arm " + std::to_string(j) + " has fewer than p+2 observations; use ridge > 0");
    }
    ConditionalMeanModel model(data.arms(), data.p(), ridge);
    for (int j = 0; j < data.arms(); ++j) {
        const long nj = counts[static_cast<std::size_t>(j)];
        Eigen::MatrixXd rows(nj, data.p());
        Eigen::VectorXd y(nj);
        long r = 0;
        for (long i = 0; i < data.n(); ++i) {
            if (data.actions[i] != j) continue;
            rows.row(r) = data.features.row(i);
            y[r] = targets[i];
            ++r;
        }
        model.coefficients(j) = ridge_solve(rows, y, ridge);
        model.set_training_count(j, nj);
    }
    return model;
}

}  // namespace detail

inline ConditionalMeanModel fit_conditional_means(const Dataset& data, double ridge) {
    return detail::fit_means_to(data, data.rewards, ridge);
}

inline void update_incremental(ConditionalMeanModel& model, const Eigen::VectorXd& x, int arm, double y,
                               double step) {
    model.sgd_update(x, arm, y, step);
}

}  // namespace opl
