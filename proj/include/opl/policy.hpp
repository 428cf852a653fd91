#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"
#include "opl/ridge.hpp"
#include "opl/value.hpp"

namespace opl {

/// Per-unit argmax of predicted means; ties go to the lowest arm.
inline Eigen::VectorXi first_best(const Eigen::MatrixXd& mu) {
    if (!mu.allFinite()) throw std::invalid_argument("predictions must be finite");
    Eigen::VectorXi arms(mu.rows());
    for (long i = 0; i < mu.rows(); ++i) arms[i] = argmax_lowest(mu.row(i).transpose());
    return arms;
}

/// A deterministic mapping from features to an arm: a fixed per-unit
/// assignment, the first-best rule of a fitted conditional-mean model, or a
/// step rule with ascending knots on one feature (a value on a knot takes the
/// lower arm).
class PolicySpec {
public:
    struct Fixed {
        Eigen::VectorXi arms;
    };
    struct FirstBest {
        ConditionalMeanModel model;
    };
    struct Threshold {
        int feature_index = 0;
        std::vector<double> knots;
    };

    static PolicySpec fixed(Eigen::VectorXi arms) {
        for (long i = 0; i < arms.size(); ++i)
            if (arms[i] < 0) throw std::invalid_argument("fixed assignment must be non-negative");
        return PolicySpec(Fixed{std::move(arms)});
    }

    static PolicySpec first_best_of(ConditionalMeanModel model) { return PolicySpec(FirstBest{std::move(model)}); }

    static PolicySpec threshold(int feature_index, std::vector<double> knots) {
        if (feature_index < 0) throw std::invalid_argument("feature index must be non-negative");
        if (knots.empty()) throw std::invalid_argument("at least one knot required");
        for (std::size_t k = 1; k < knots.size(); ++k)
            if (knots[k] <= knots[k - 1]) throw std::invalid_argument("knots must be strictly ascending");
        return PolicySpec(Threshold{feature_index, std::move(knots)});
    }

    Eigen::VectorXi evaluate(const Eigen::MatrixXd& features) const {
        if (const auto* fixed = std::get_if<Fixed>(&kind_)) {
            if (fixed->arms.size() != features.rows())
                throw std::invalid_argument("fixed assignment does not match the number of units");
            return fixed->arms;
        }
        if (const auto* fb = std::get_if<FirstBest>(&kind_)) return first_best(fb->model.predict_matrix(features));
        const auto& th = std::get<Threshold>(kind_);
        if (th.feature_index >= features.cols()) throw std::invalid_argument("threshold feature out of range");
        Eigen::VectorXi arms(features.rows());
        for (long i = 0; i < features.rows(); ++i) {
            int arm = 0;
            for (double c : th.knots) arm += features(i, th.feature_index) > c ? 1 : 0;
            arms[i] = arm;
        }
        return arms;
    }

    bool is_threshold() const { return std::holds_alternative<Threshold>(kind_); }
    const Threshold& threshold_rule() const { return std::get<Threshold>(kind_); }

    void save(std::ostream& out) const {
        if (const auto* fixed = std::get_if<Fixed>(&kind_)) {
            out << "kind fixed_assignment\nunits " << fixed->arms.size() << '\n';
            for (long i = 0; i < fixed->arms.size(); ++i) out << fixed->arms[i] << '\n';
        } else if (const auto* fb = std::get_if<FirstBest>(&kind_)) {
            out << "kind first_best\n";
            fb->model.save(out);
        } else {
            const auto& th = std::get<Threshold>(kind_);
            out << "kind threshold\nfeature " << th.feature_index << "\nknots " << th.knots.size();
            for (double c : th.knots) out << ' ' << detail::format_double(c);
            out << '\n';
        }
    }

    static PolicySpec load(std::istream& in) {
        std::string tag, kind;
        in >> tag >> kind;
        if (tag != "kind") throw std::runtime_error("not a policy file");
        if (kind == "fixed_assignment") {
            long n = 0;
            in >> tag >> n;
            Eigen::VectorXi arms(n);
            for (long i = 0; i < n; ++i) in >> arms[i];
            if (!in) throw std::runtime_error("truncated policy file");
            return fixed(std::move(arms));
        }
        if (kind == "first_best") return first_best_of(ConditionalMeanModel::load(in));
        if (kind == "threshold") {
            int feature = 0;
            std::size_t count = 0;
            in >> tag >> feature >> tag >> count;
            std::vector<double> knots(count);
            for (auto& c : knots) in >> c;
            if (!in) throw std::runtime_error("truncated policy file");
            return threshold(feature, std::move(knots));
        }
        throw std::runtime_error("unknown policy kind '" + kind + "'");
    }

private:
    using Kind = std::variant<Fixed, FirstBest, Threshold>;
    explicit PolicySpec(Kind kind) : kind_(std::move(kind)) {}
    Kind kind_;
};

inline Eigen::VectorXi evaluate_policy(const PolicySpec& policy, const Eigen::MatrixXd& features) {
    return policy.evaluate(features);
}

struct PolicySearchResult {
    PolicySpec best_policy;
    double best_value = 0.0;
    std::vector<std::pair<std::vector<double>, double>> value_surface;  // (knots, value)
};

namespace detail {

// Ascending knot tuples drawn from the grid, visited in lexicographic order.
inline void enumerate_knot_tuples(const std::vector<double>& grid, int knot_count,
                                  const std::function<void(const std::vector<double>&)>& visit) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(knot_count));
    std::vector<double> knots(static_cast<std::size_t>(knot_count));
    std::function<void(int, std::size_t)> recurse = [&](int depth, std::size_t start) {
        if (depth == knot_count) {
            visit(knots);
            return;
        }
        for (std::size_t g = start; g < grid.size(); ++g) {
            knots[static_cast<std::size_t>(depth)] = grid[g];
            recurse(depth + 1, g + 1);
        }
    };
    recurse(0, 0);
}

}  // namespace detail

/// Exhaustive threshold search: every ascending knot tuple from the grid is
/// scored with the chosen estimator and the argmax is returned, ties broken
/// by the lexicographically smallest tuple.
inline PolicySearchResult procedure1_grid_search(const Dataset& data, const NuisanceEstimates& nuisance,
                                                 int feature_index, const std::vector<double>& grid,
                                                 Estimator estimator) {
    if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (grid[g] <= grid[g - 1]) throw std::invalid_argument("grid must be strictly ascending");
    const int knot_count = data.arms() - 1;
    if (static_cast<int>(grid.size()) < knot_count)
        throw std::invalid_argument("no feasible knot tuple: grid smaller than the number of knots");

    std::optional<PolicySearchResult> best;
    std::vector<std::pair<std::vector<double>, double>> surface;
    detail::enumerate_knot_tuples(grid, knot_count, [&](const std::vector<double>& knots) {
        const PolicySpec policy = PolicySpec::threshold(feature_index, knots);
        const Eigen::VectorXi assignments = policy.evaluate(data.features);
        const double value = value_estimate(estimator, data, assignments, nuisance).value;
        surface.emplace_back(knots, value);
        if (!best || value > best->best_value) best = PolicySearchResult{policy, value, {}};
    });
    best->value_surface = std::move(surface);
    return std::move(*best);
}

struct CaipwlConfig {
    int k_folds = 5;
    std::uint64_t seed = 0;
    double ridge = 1e-6;
    double p_min = 0.01;
    // Testing hook: when set, step 3's cross-fitted estimates are replaced.
    std::optional<NuisanceEstimates> nuisance_override;
};

/// Cross-fitted augmented IPW learning over the threshold class: build
/// out-of-fold nuisances, score every candidate with the doubly robust value
/// (the augmented score reduces to it), and maximize.
inline PolicySearchResult caipwl(const Dataset& data, int feature_index, const std::vector<double>& grid,
                                 const CaipwlConfig& config) {
    const NuisanceEstimates nuisance =
        config.nuisance_override ? *config.nuisance_override
                                 : cross_fit(data, config.k_folds, config.seed, config.ridge, config.p_min);
    return procedure1_grid_search(data, nuisance, feature_index, grid, Estimator::dr);
}

}  // namespace opl
