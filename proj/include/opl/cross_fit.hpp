#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "opl/common.hpp"
#include "opl/dataset.hpp"
#include "opl/errors.hpp"
#include "opl/propensity.hpp"
#include "opl/ridge.hpp"

namespace opl {

/// Seeded fold assignment: shuffle the unit indices, then cut into contiguous
/// blocks, so fold sizes differ by at most one and the labels are a fixed
/// function of (n, k, seed).
struct FoldPlan {
    int k = 0;
    std::vector<int> labels;  // per unit, in {0,...,k-1}

    static FoldPlan make(long n, int k, std::uint64_t seed) {
        if (k < 2) throw std::invalid_argument("fold count must be at least 2");
        if (k > n) throw std::invalid_argument("fold count exceeds the number of observations");
        FoldPlan plan;
        plan.k = k;
        plan.labels.assign(static_cast<std::size_t>(n), 0);
        const std::vector<long> perm = random_permutation(n, seed);
        for (long pos = 0; pos < n; ++pos) {
            const int fold = static_cast<int>((pos * static_cast<long>(k)) / n);
            plan.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = fold;
        }
        return plan;
    }

    std::vector<long> fold_sizes() const {
        std::vector<long> sizes(static_cast<std::size_t>(k), 0);
        for (int label : labels) ++sizes[static_cast<std::size_t>(label)];
        return sizes;
    }
};

enum class Provenance { batch, cross_fit };

/// Per-unit, per-arm nuisance predictions. Each p_hat row sums to one within
/// 1e-9 and every entry is at least p_min.
struct NuisanceEstimates {
    Eigen::MatrixXd mu_hat;  // N x arms
    Eigen::MatrixXd p_hat;   // N x arms
    Provenance provenance = Provenance::batch;
    int folds = 0;
    double p_min = 0.0;

    void validate() const {
        if (mu_hat.rows() != p_hat.rows() || mu_hat.cols() != p_hat.cols())
            throw std::invalid_argument("mu_hat and p_hat must have matching shapes");
        if (!mu_hat.allFinite()) throw std::invalid_argument("mu_hat contains non-finite values");
        for (long i = 0; i < p_hat.rows(); ++i) {
            if (std::abs(p_hat.row(i).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("p_hat row " + std::to_string(i) + " does not sum to 1");
            if (p_hat.row(i).minCoeff() < p_min - 1e-12)
                throw std::invalid_argument("p_hat row " + std::to_string(i) + " breaches the floor");
        }
    }
};

/// Fits both nuisances on the full sample and predicts in-sample.
inline NuisanceEstimates batch_nuisance(const Dataset& data, double ridge, double p_min) {
    const ConditionalMeanModel mu = fit_conditional_means(data, ridge);
    const PropensityModel ps = fit_propensity(data, p_min);
    NuisanceEstimates est{mu.predict_matrix(data.features), ps.predict_matrix(data.features),
                          Provenance::batch, 0, p_min};
    est.validate();
    return est;
}

/// Cross-fitted nuisances: units in fold k are predicted by models fitted on
/// the other k-1 folds.
inline NuisanceEstimates cross_fit(const Dataset& data, const FoldPlan& plan, double ridge, double p_min) {
    if (static_cast<long>(plan.labels.size()) != data.n())
        throw std::invalid_argument("fold plan does not match the dataset");
    const long n = data.n();
    NuisanceEstimates est;
    est.mu_hat.resize(n, data.arms());
    est.p_hat.resize(n, data.arms());
    est.provenance = Provenance::cross_fit;
    est.folds = plan.k;
    est.p_min = p_min;

    for (int fold = 0; fold < plan.k; ++fold) {
        std::vector<long> train_rows, held_rows;
        for (long i = 0; i < n; ++i)
            (plan.labels[static_cast<std::size_t>(i)] == fold ? held_rows : train_rows).push_back(i);

        std::vector<long> train_arm_counts(static_cast<std::size_t>(data.arms()), 0);
        for (long i : train_rows) ++train_arm_counts[static_cast<std::size_t>(data.actions[i])];
        for (int j = 0; j < data.arms(); ++j)
            if (train_arm_counts[static_cast<std::size_t>(j)] == 0) throw FoldCoverageError(j, fold);

        Eigen::MatrixXd train_x(static_cast<long>(train_rows.size()), data.p());
        Eigen::VectorXi train_d(static_cast<long>(train_rows.size()));
        Eigen::VectorXd train_y(static_cast<long>(train_rows.size()));
        for (std::size_t r = 0; r < train_rows.size(); ++r) {
            train_x.row(static_cast<long>(r)) = data.features.row(train_rows[r]);
            train_d[static_cast<long>(r)] = data.actions[train_rows[r]];
            train_y[static_cast<long>(r)] = data.rewards[train_rows[r]];
        }
        const Dataset train = make_dataset(std::move(train_x), std::move(train_d), std::move(train_y),
                                           data.arms(), data.feature_names);
        const ConditionalMeanModel mu = fit_conditional_means(train, ridge);
        const PropensityModel ps = fit_propensity(train, p_min);
        for (long i : held_rows) {
            est.mu_hat.row(i) = mu.predict_all(data.features.row(i)).transpose();
            est.p_hat.row(i) = ps.predict(data.features.row(i)).transpose();
        }
    }
    est.validate();
    return est;
}

inline NuisanceEstimates cross_fit(const Dataset& data, int k, std::uint64_t seed, double ridge, double p_min) {
    return cross_fit(data, FoldPlan::make(data.n(), k, seed), ridge, p_min);
}

}  // namespace opl
