#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "opl/common.hpp"
#include "opl/errors.hpp"

namespace opl {

/// Immutable collection of (features, action, reward) triplets.
/// Invariants: all containers share length N >= 1, actions lie in
/// {0,...,arm_count-1}, and features/rewards are finite.
struct Dataset {
    Eigen::MatrixXd features;  // N x p
    Eigen::VectorXi actions;   // N, values in {0,...,J}
    Eigen::VectorXd rewards;   // N
    int arm_count = 0;         // J + 1
    std::vector<std::string> feature_names;

    long n() const { return features.rows(); }
    int p() const { return static_cast<int>(features.cols()); }
    int arms() const { return arm_count; }
};

namespace detail {

inline void check_dataset(const Dataset& d) {
    if (d.n() < 1) throw std::invalid_argument("dataset must contain at least one observation");
    if (d.actions.size() != d.n() || d.rewards.size() != d.n())
        throw std::invalid_argument("features, actions and rewards must share the same length");
    if (d.arm_count < 1) throw std::invalid_argument("arm count must be positive");
    if (static_cast<int>(d.feature_names.size()) != d.p())
        throw std::invalid_argument("one name per feature column required");
    for (long i = 0; i < d.n(); ++i) {
        if (d.actions[i] < 0 || d.actions[i] >= d.arm_count)
            throw std::invalid_argument("action out of range at row " + std::to_string(i));
        if (!std::isfinite(d.rewards[i]))
            throw std::invalid_argument("non-finite reward at row " + std::to_string(i));
    }
    if (!d.features.allFinite()) throw std::invalid_argument("features contain non-finite values");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline Dataset make_dataset(Eigen::MatrixXd features, Eigen::VectorXi actions, Eigen::VectorXd rewards,
                            int arm_count, std::vector<std::string> feature_names = {}) {
    if (feature_names.empty())
        for (int j = 0; j < features.cols(); ++j) feature_names.push_back("x" + std::to_string(j));
    Dataset d{std::move(features), std::move(actions), std::move(rewards), arm_count, std::move(feature_names)};
    detail::check_dataset(d);
    return d;
}

inline std::vector<long> arm_counts(const Dataset& d) {
    std::vector<long> counts(static_cast<std::size_t>(d.arm_count), 0);
    for (long i = 0; i < d.n(); ++i) ++counts[static_cast<std::size_t>(d.actions[i])];
    return counts;
}

/// Maps a raw value to the number of cut points it strictly exceeds, so a
/// value equal to a cut stays in the lower arm.
inline Eigen::VectorXi discretize_action(const Eigen::VectorXd& raw, const std::vector<double>& cut_points) {
    if (cut_points.empty()) throw std::invalid_argument("at least one cut point required");
    for (std::size_t k = 1; k < cut_points.size(); ++k)
        if (cut_points[k] <= cut_points[k - 1])
            throw std::invalid_argument("cut points must be strictly ascending");
    Eigen::VectorXi arms(raw.size());
    for (long i = 0; i < raw.size(); ++i) {
        int arm = 0;
        for (double c : cut_points) arm += raw[i] > c ? 1 : 0;
        arms[i] = arm;
    }
    return arms;
}

/// Seeded subsample without replacement that contains every arm; the seed is
/// perturbed deterministically until coverage holds.
inline Dataset subsample_with_all_arms(const Dataset& data, long count, std::uint64_t seed) {
    if (count < 1 || count > data.n()) throw std::invalid_argument("subsample size out of range");
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        const std::vector<long> perm = random_permutation(data.n(), seed + attempt);
        Eigen::MatrixXd x(count, data.p());
        Eigen::VectorXi d(count);
        Eigen::VectorXd y(count);
        std::vector<bool> seen(static_cast<std::size_t>(data.arms()), false);
        for (long i = 0; i < count; ++i) {
            const long row = perm[static_cast<std::size_t>(i)];
            x.row(i) = data.features.row(row);
            d[i] = data.actions[row];
            y[i] = data.rewards[row];
            seen[static_cast<std::size_t>(d[i])] = true;
        }
        bool all = true;
        for (bool s : seen) all = all && s;
        if (all) return make_dataset(std::move(x), std::move(d), std::move(y), data.arms(), data.feature_names);
    }
    throw std::runtime_error("could not draw a subsample containing every arm");
}

/// Reads a header CSV. Columns other than the named action and reward
/// columns become features, in file order. The arm count is one plus the
/// largest observed action.
inline Dataset load_csv(const std::string& path, const std::string& action_column,
                        const std::string& reward_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 0, "-");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = detail::split_csv_line(line);
    long action_idx = -1, reward_idx = -1;
    std::vector<std::string> feature_names;
    std::vector<long> feature_idx;
    for (long c = 0; c < static_cast<long>(header.size()); ++c) {
        if (header[static_cast<std::size_t>(c)] == action_column) action_idx = c;
        else if (header[static_cast<std::size_t>(c)] == reward_column) reward_idx = c;
        else {
            feature_names.push_back(header[static_cast<std::size_t>(c)]);
            feature_idx.push_back(c);
        }
    }
    if (action_idx < 0) throw ParseError("action column '" + action_column + "' not found", 0, action_column);
    if (reward_idx < 0) throw ParseError("reward column '" + reward_column + "' not found", 0, reward_column);

    std::vector<std::vector<double>> feature_rows;
    std::vector<int> actions;
    std::vector<double> rewards;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()), row, "-");
        auto parse = [&](long c) {
            const std::string& cell = cells[static_cast<std::size_t>(c)];
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
                return v;
            } catch (const std::exception&) {
                throw ParseError("cannot parse '" + cell + "' as a number", row, header[static_cast<std::size_t>(c)]);
            }
        };
        const double a = parse(action_idx);
        if (a < 0 || std::abs(a - std::round(a)) > 1e-9)
            throw ParseError("action must be a non-negative integer", row, action_column);
        actions.push_back(static_cast<int>(std::lround(a)));
        rewards.push_back(parse(reward_idx));
        std::vector<double> feats;
        feats.reserve(feature_idx.size());
        for (long c : feature_idx) feats.push_back(parse(c));
        feature_rows.push_back(std::move(feats));
    }
    if (feature_rows.empty()) throw ParseError("no data rows", 0, "-");

    const long n = static_cast<long>(feature_rows.size());
    const long p = static_cast<long>(feature_names.size());
    Eigen::MatrixXd features(n, p);
    Eigen::VectorXi action_vec(n);
    Eigen::VectorXd reward_vec(n);
    int max_action = 0;
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < p; ++j)
            features(i, j) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        action_vec[i] = actions[static_cast<std::size_t>(i)];
        reward_vec[i] = rewards[static_cast<std::size_t>(i)];
        max_action = std::max(max_action, action_vec[i]);
    }
    return make_dataset(std::move(features), std::move(action_vec), std::move(reward_vec), max_action + 1,
                        std::move(feature_names));
}

/// Writes the dataset with full double precision so a reload reproduces the
/// values exactly.
inline void save_csv(const Dataset& d, const std::string& path, const std::string& action_column = "action",
                     const std::string& reward_column = "reward") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& name : d.feature_names) out << name << ',';
    out << action_column << ',' << reward_column << '\n';
    for (long i = 0; i < d.n(); ++i) {
        for (int j = 0; j < d.p(); ++j) out << detail::format_double(d.features(i, j)) << ',';
        out << d.actions[i] << ',' << detail::format_double(d.rewards[i]) << '\n';
    }
}

}  // namespace opl
