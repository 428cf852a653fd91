#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "opl/common.hpp"
#include "opl/dataset.hpp"
#include "opl/ridge.hpp"
#include "opl/risk.hpp"

namespace opl {

enum class UpdateMode { incremental, refit_each_round, refit_every_m };

inline const char* update_mode_name(UpdateMode m) {
    switch (m) {
        case UpdateMode::incremental: return "incremental";
        case UpdateMode::refit_each_round: return "refit_each_round";
        case UpdateMode::refit_every_m: return "refit_every_m";
    }
    return "?";
}

struct OnlineConfig {
    UpdateMode mode = UpdateMode::refit_each_round;
    int refit_every = 1;  // cadence for refit_every_m
    double ridge = 1e-6;
    // Incremental-mode schedule: step = step0 * decay / (decay + k) at the
    // arm's k-th update; passes > 1 additionally sweeps the arm's history.
    double sgd_step0 = 0.5;
    double sgd_decay = 50.0;
    int sgd_passes = 1;
};

/// Sequential decision state: per-arm mean and second-moment models trained
/// on the growing history. Strictly single-owner; steps are sequential.
class OnlineState {
public:
    static OnlineState warm_start(const Dataset& initial, const OnlineConfig& config) {
        OnlineState state;
        state.config_ = config;
        state.arms_ = initial.arms();
        state.p_ = initial.p();
        state.mean_model_ = fit_conditional_means(initial, config.ridge);
        state.second_moment_ = detail::fit_means_to(initial, initial.rewards.array().square(), config.ridge);
        state.xs_.reserve(static_cast<std::size_t>(initial.n()));
        for (long i = 0; i < initial.n(); ++i) {
            state.xs_.push_back(initial.features.row(i).transpose());
            state.ds_.push_back(initial.actions[i]);
            state.ys_.push_back(initial.rewards[i]);
        }
        state.round_ = initial.n();
        return state;
    }

    struct StepResult {
        int chosen_arm = 0;
        double realized_reward = 0.0;
        double predicted_reward = 0.0;
    };

    Eigen::VectorXd predicted_means(const Eigen::VectorXd& x) const { return mean_model_.predict_all(x); }

    Eigen::VectorXd predicted_sigmas(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd mu = mean_model_.predict_all(x);
        const Eigen::VectorXd m2 = second_moment_.predict_all(x);
        return (m2 - mu.cwiseProduct(mu)).cwiseMax(0.0).cwiseSqrt();
    }

    /// Predict, choose the utility-maximizing arm, query the reward oracle
    /// once, append the new triplet, and update the models. If the oracle
    /// throws, the state is unchanged. When the recorded arm of a replayed
    /// observation is supplied, the plug-in regret of that recorded action
    /// accumulates into the running estimate.
    StepResult step(const Eigen::VectorXd& x, const RiskProfile& profile,
                    const std::function<double(int)>& reward_oracle,
                    std::optional<int> recorded_arm = std::nullopt) {
        const Eigen::VectorXd mu = predicted_means(x);
        Eigen::VectorXd scores = mu;
        if (profile.regime != RiskRegime::neutral) {
            const Eigen::VectorXd sigma = predicted_sigmas(x);
            for (int j = 0; j < arms_; ++j) scores[j] = utility(mu[j], sigma[j], profile);
        }
        const int chosen = argmax_lowest(scores);
        const double reward = reward_oracle(chosen);

        xs_.push_back(x);
        ds_.push_back(chosen);
        ys_.push_back(reward);
        ++round_;
        if (recorded_arm) cumulative_regret_ += mu[chosen] - mu[*recorded_arm];
        update_models(x, chosen, reward);
        return {chosen, reward, mu[chosen]};
    }

    long round() const { return round_; }
    long history_size() const { return static_cast<long>(xs_.size()); }
    double cumulative_regret_estimate() const { return cumulative_regret_; }
    const ConditionalMeanModel& mean_model() const { return mean_model_; }
    const ConditionalMeanModel& second_moment_model() const { return second_moment_; }

    Dataset history() const {
        const long n = history_size();
        Eigen::MatrixXd features(n, p_);
        Eigen::VectorXi actions(n);
        Eigen::VectorXd rewards(n);
        for (long i = 0; i < n; ++i) {
            features.row(i) = xs_[static_cast<std::size_t>(i)].transpose();
            actions[i] = ds_[static_cast<std::size_t>(i)];
            rewards[i] = ys_[static_cast<std::size_t>(i)];
        }
        return make_dataset(std::move(features), std::move(actions), std::move(rewards), arms_);
    }

private:
    void update_models(const Eigen::VectorXd& x, int arm, double reward) {
        ++rounds_since_warm_;
        switch (config_.mode) {
            case UpdateMode::refit_each_round:
                refit();
                return;
            case UpdateMode::refit_every_m:
                if (config_.refit_every > 0 && rounds_since_warm_ % config_.refit_every == 0) refit();
                return;
            case UpdateMode::incremental: {
                sgd_step(x, arm, reward);
                for (int pass = 1; pass < config_.sgd_passes; ++pass)
                    for (std::size_t i = 0; i < xs_.size(); ++i)
                        if (ds_[i] == arm) sgd_step(xs_[i], arm, ys_[i]);
                return;
            }
        }
    }

    void sgd_step(const Eigen::VectorXd& x, int arm, double reward) {
        const double k = static_cast<double>(mean_model_.training_count(arm));
        const double step = config_.sgd_step0 * config_.sgd_decay / (config_.sgd_decay + k);
        mean_model_.sgd_update(x, arm, reward, step);
        second_moment_.sgd_update(x, arm, reward * reward, step);
    }

    void refit() {
        const Dataset h = history();
        mean_model_ = fit_conditional_means(h, config_.ridge);
        second_moment_ = detail::fit_means_to(h, h.rewards.array().square(), config_.ridge);
    }

    OnlineConfig config_;
    ConditionalMeanModel mean_model_, second_moment_;
    std::vector<Eigen::VectorXd> xs_;
    std::vector<int> ds_;
    std::vector<double> ys_;
    int arms_ = 0, p_ = 0;
    long round_ = 0, rounds_since_warm_ = 0;
    double cumulative_regret_ = 0.0;
};

struct TrajectoryRow {
    long round = 0;
    std::uint64_t x_hash = 0;
    int chosen_arm = 0;
    int recorded_arm = 0;
    bool match = false;
    double predicted_reward = 0.0;
    double reward = 0.0;
    bool imputed = false;
};

struct ReplayReport {
    std::vector<TrajectoryRow> rows;
    double match_rate = 0.0;
    double regret_ra = 0.0;  // average plug-in regret of the recorded actions
};

namespace detail {

inline std::uint64_t fnv1a_hash(const Eigen::VectorXd& x) {
    std::uint64_t h = 1469598103934665603ULL;
    for (long i = 0; i < x.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &x[i], sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace detail

/// Deterministic replay of a recorded dataset: the first `warm_count` rows
/// train the initial models, the rest arrive one at a time. The reward of a
/// matching choice is the recorded one; a counterfactual choice receives the
/// model's own plug-in prediction, flagged as imputed.
inline ReplayReport replay(const Dataset& data, long warm_count, const RiskProfile& profile,
                           const OnlineConfig& config) {
    if (warm_count < 1 || warm_count > data.n())
        throw std::invalid_argument("warm count must lie in [1, n]");
    Eigen::MatrixXd warm_x = data.features.topRows(warm_count);
    Eigen::VectorXi warm_d = data.actions.head(warm_count);
    Eigen::VectorXd warm_y = data.rewards.head(warm_count);
    const Dataset warm = make_dataset(std::move(warm_x), std::move(warm_d), std::move(warm_y), data.arms(),
                                      data.feature_names);
    OnlineState state = OnlineState::warm_start(warm, config);

    ReplayReport report;
    long matches = 0;
    for (long i = warm_count; i < data.n(); ++i) {
        const Eigen::VectorXd x = data.features.row(i).transpose();
        const int recorded = data.actions[i];
        const Eigen::VectorXd mu = state.predicted_means(x);
        bool imputed = false;
        const auto oracle = [&](int arm) {
            if (arm == recorded) return data.rewards[i];
            imputed = true;
            return mu[arm];
        };
        const OnlineState::StepResult result = state.step(x, profile, oracle, recorded);
        TrajectoryRow row;
        row.round = i - warm_count + 1;
        row.x_hash = detail::fnv1a_hash(x);
        row.chosen_arm = result.chosen_arm;
        row.recorded_arm = recorded;
        row.match = result.chosen_arm == recorded;
        row.predicted_reward = result.predicted_reward;
        row.reward = result.realized_reward;
        row.imputed = imputed;
        if (row.match) ++matches;
        report.rows.push_back(row);
    }
    const long rounds = data.n() - warm_count;
    report.match_rate = rounds > 0 ? static_cast<double>(matches) / static_cast<double>(rounds) : 0.0;
    report.regret_ra = rounds > 0 ? state.cumulative_regret_estimate() / static_cast<double>(rounds) : 0.0;
    return report;
}

inline void save_trajectory_csv(const ReplayReport& report, std::ostream& out) {
    out << "round,x_hash,chosen_arm,recorded_arm,match,predicted_reward,reward,imputed\n";
    for (const TrajectoryRow& row : report.rows)
        out << row.round << ',' << row.x_hash << ',' << row.chosen_arm << ',' << row.recorded_arm << ','
            << (row.match ? 1 : 0) << ',' << detail::format_double(row.predicted_reward) << ','
            << detail::format_double(row.reward) << ',' << (row.imputed ? 1 : 0) << '\n';
}

}  // namespace opl
