#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "opl/dataset.hpp"
#include "opl/diagnostics.hpp"
#include "opl/online.hpp"
#include "opl/policy.hpp"
#include "opl/risk.hpp"
#include "opl/synthetic.hpp"
#include "opl/value.hpp"

namespace opl::cli {

namespace detail {

/// "lo:step:hi" or a comma list of values, strictly ascending either way.
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        double lo = 0, step = 0, hi = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ss(text);
        if (!(ss >> lo >> c1 >> step >> c2 >> hi) || c1 != ':' || c2 != ':' || step <= 0)
            throw std::invalid_argument("grid must be lo:step:hi with step > 0");
        for (double v = lo; v <= hi + 1e-12; v += step) grid.push_back(v);
    } else {
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) grid.push_back(std::stod(cell));
    }
    if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
    return grid;
}

inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (values.empty()) throw std::invalid_argument("empty list");
    return values;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& subcommand, CLI::App* cmd) {
    std::ofstream out(dir / "manifest.txt");
    out << "# opl run manifest; replay with: opl " << subcommand << " --config manifest.txt\n";
    out << '[' << subcommand << "]\n" << cmd->config_to_str(true, false);
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
    std::filesystem::path path(dir);
    std::filesystem::create_directories(path);
    return path;
}

inline NuisanceEstimates make_nuisance(const Dataset& data, int k_folds, std::uint64_t seed, double ridge,
                                       double p_min) {
    if (k_folds > 0) return cross_fit(data, k_folds, seed, ridge, p_min);
    return batch_nuisance(data, ridge, p_min);
}

inline RiskProfile profile_from_name(const std::string& name, double rho) {
    if (name == "neutral") return RiskProfile::neutral();
    if (name == "linear") return RiskProfile::linear();
    if (name == "quadratic") return RiskProfile::quadratic();
    if (name == "mv") return RiskProfile::mean_variance(rho < 0 ? 0.0 : rho);
    throw std::invalid_argument("unknown risk profile '" + name + "'");
}

}  // namespace detail

/// Command-line entry point. Returns 0 on success, 2 on usage errors, 1 on
/// runtime failures.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"opl: offline and online optimal policy learning toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.fallthrough();
    app.set_config("--config", "", "plain-text key=value config; command-line flags override it");

    // ---- simulate ----------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset with known truth");
    std::string sim_output = "out";
    long sim_n = 1000;
    int sim_p = 3, sim_arms = 3;
    std::uint64_t sim_seed = 1, sim_coef_seed = 7;
    double sim_noise = 1.0, sim_floor = 0.05, sim_conf = 0.0, sim_quad = 1.0, sim_assign = 1.0;
    bool sim_augment = false;
    simulate->add_option("--output-dir", sim_output);
    simulate->add_option("--n", sim_n);
    simulate->add_option("--p", sim_p);
    simulate->add_option("--arms", sim_arms);
    simulate->add_option("--seed", sim_seed);
    simulate->add_option("--coef-seed", sim_coef_seed);
    simulate->add_option("--noise-sd", sim_noise);
    simulate->add_option("--overlap-floor", sim_floor);
    simulate->add_option("--confounding", sim_conf);
    simulate->add_option("--quadratic-scale", sim_quad);
    simulate->add_option("--assignment-strength", sim_assign);
    simulate->add_flag("--augment-quadratic", sim_augment, "append the squared first feature");

    // ---- fit ----------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit conditional-mean and propensity models");
    std::string fit_input, fit_output = "out", fit_action = "action", fit_reward = "reward";
    double fit_ridge = 1e-3, fit_pmin = 0.01;
    int fit_k = 0;
    std::uint64_t fit_seed = 1;
    fit->add_option("--input", fit_input)->required();
    fit->add_option("--output-dir", fit_output);
    fit->add_option("--action-col", fit_action);
    fit->add_option("--reward-col", fit_reward);
    fit->add_option("--ridge", fit_ridge);
    fit->add_option("--pmin", fit_pmin);
    fit->add_option("--k-folds", fit_k, "0 = batch fit, >=2 = cross-fit");
    fit->add_option("--seed", fit_seed);

    // ---- evaluate -------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "estimate the value of a policy");
    std::string eval_input, eval_output = "out", eval_action = "action", eval_reward = "reward";
    std::string eval_policy, eval_estimator = "all";
    double eval_ridge = 1e-3, eval_pmin = 0.01;
    int eval_k = 0;
    std::uint64_t eval_seed = 1;
    evaluate->add_option("--input", eval_input)->required();
    evaluate->add_option("--output-dir", eval_output);
    evaluate->add_option("--action-col", eval_action);
    evaluate->add_option("--reward-col", eval_reward);
    evaluate->add_option("--policy", eval_policy, "policy file; omit to evaluate the observed actions");
    evaluate->add_option("--estimator", eval_estimator)->check(CLI::IsMember({"ra", "ipw", "dr", "all"}));
    evaluate->add_option("--ridge", eval_ridge);
    evaluate->add_option("--pmin", eval_pmin);
    evaluate->add_option("--k-folds", eval_k);
    evaluate->add_option("--seed", eval_seed);

    // ---- search -------------------------------------------------------
    auto* search = app.add_subcommand("search", "threshold policy search over a knot grid");
    std::string search_input, search_output = "out", search_action = "action", search_reward = "reward";
    std::string search_grid = "-0.9:0.1:0.9", search_estimator = "dr", search_method = "grid";
    int search_feature = 0, search_k = 5;
    double search_ridge = 1e-3, search_pmin = 0.01;
    std::uint64_t search_seed = 1;
    search->add_option("--input", search_input)->required();
    search->add_option("--output-dir", search_output);
    search->add_option("--action-col", search_action);
    search->add_option("--reward-col", search_reward);
    search->add_option("--grid", search_grid, "lo:step:hi or comma list");
    search->add_option("--feature", search_feature);
    search->add_option("--estimator", search_estimator)->check(CLI::IsMember({"ra", "ipw", "dr"}));
    search->add_option("--method", search_method)->check(CLI::IsMember({"grid", "caipwl"}));
    search->add_option("--k-folds", search_k);
    search->add_option("--ridge", search_ridge);
    search->add_option("--pmin", search_pmin);
    search->add_option("--seed", search_seed);

    // ---- risk-sweep -----------------------------------------------------
    auto* risk_cmd = app.add_subcommand("risk-sweep", "match rates and regrets across risk preferences");
    std::string risk_input, risk_output = "out", risk_action = "action", risk_reward = "reward";
    double risk_ridge = 1e-3, risk_pmin = 0.01, risk_rho = -1.0;
    long risk_subsample = 0;
    std::uint64_t risk_seed = 1;
    risk_cmd->add_option("--input", risk_input)->required();
    risk_cmd->add_option("--output-dir", risk_output);
    risk_cmd->add_option("--action-col", risk_action);
    risk_cmd->add_option("--reward-col", risk_reward);
    risk_cmd->add_option("--ridge", risk_ridge);
    risk_cmd->add_option("--pmin", risk_pmin);
    risk_cmd->add_option("--rho", risk_rho, "also run the mean-variance criterion with this tolerance");
    risk_cmd->add_option("--subsample", risk_subsample, "evaluate on a random subsample of this size");
    risk_cmd->add_option("--seed", risk_seed);

    // ---- online ---------------------------------------------------------
    auto* online_cmd = app.add_subcommand("online", "sequential replay of a recorded dataset");
    std::string online_input, online_output = "out", online_action = "action", online_reward = "reward";
    std::string online_risk = "neutral", online_mode = "refit";
    long online_warm = 0;
    int online_refit_every = 10;
    double online_ridge = 1e-3, online_rho = -1.0;
    online_cmd->add_option("--input", online_input)->required();
    online_cmd->add_option("--output-dir", online_output);
    online_cmd->add_option("--action-col", online_action);
    online_cmd->add_option("--reward-col", online_reward);
    online_cmd->add_option("--warm-count", online_warm)->required();
    online_cmd->add_option("--risk", online_risk)->check(CLI::IsMember({"neutral", "linear", "quadratic", "mv"}));
    online_cmd->add_option("--rho", online_rho);
    online_cmd->add_option("--update-mode", online_mode)
        ->check(CLI::IsMember({"incremental", "refit", "refit-every"}));
    online_cmd->add_option("--refit-every", online_refit_every);
    online_cmd->add_option("--ridge", online_ridge);

    // ---- diagnose ---------------------------------------------------------
    auto* diagnose = app.add_subcommand("diagnose", "overlap report and failure-mode experiments");
    std::string diag_input, diag_output = "out", diag_action = "action", diag_reward = "reward";
    std::string diag_experiment = "overlap", diag_floors = "0.2,0.005", diag_gammas = "0,0.5,1,2";
    double diag_ridge = 1e-3, diag_pmin = 0.01, diag_weak = 0.05;
    long diag_n = 4000;
    int diag_seeds = 50, diag_k = 0;
    std::uint64_t diag_seed = 1;
    bool diag_include_conf = false;
    diagnose->add_option("--experiment", diag_experiment)
        ->check(CLI::IsMember({"overlap", "inversion", "confounding"}));
    diagnose->add_option("--input", diag_input, "dataset for the overlap report");
    diagnose->add_option("--output-dir", diag_output);
    diagnose->add_option("--action-col", diag_action);
    diagnose->add_option("--reward-col", diag_reward);
    diagnose->add_option("--ridge", diag_ridge);
    diagnose->add_option("--pmin", diag_pmin);
    diagnose->add_option("--weak-threshold", diag_weak);
    diagnose->add_option("--k-folds", diag_k);
    diagnose->add_option("--floors", diag_floors);
    diagnose->add_option("--gammas", diag_gammas);
    diagnose->add_option("--n", diag_n);
    diagnose->add_option("--seeds", diag_seeds);
    diagnose->add_option("--seed", diag_seed);
    diagnose->add_flag("--include-confounder", diag_include_conf);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            const auto dir = detail::prepare_output_dir(sim_output);
            DgpSpec spec;
            spec.n = sim_n;
            spec.p = sim_p;
            spec.arms = sim_arms;
            spec.coef_seed = sim_coef_seed;
            spec.noise_sd = sim_noise;
            spec.overlap_floor = sim_floor;
            spec.confounder_strength = sim_conf;
            spec.quadratic_scale = sim_quad;
            spec.assignment_strength = sim_assign;
            SyntheticData synthetic = generate_synthetic(spec, sim_seed);
            const Dataset& out = sim_augment ? (synthetic.data = augment_quadratic(synthetic.data)) : synthetic.data;
            save_csv(out, (dir / "dataset.csv").string());
            detail::write_manifest(dir, "simulate", simulate);
            std::cout << "wrote " << (dir / "dataset.csv").string() << " (n=" << out.n()
                      << ", arms=" << out.arms() << ")\n";
        } else if (fit->parsed()) {
            const auto dir = detail::prepare_output_dir(fit_output);
            const Dataset data = load_csv(fit_input, fit_action, fit_reward);
            const ConditionalMeanModel mu = fit_conditional_means(data, fit_ridge);
            const PropensityModel ps = fit_propensity(data, fit_pmin);
            {
                std::ofstream out(dir / "mean_model.txt");
                mu.save(out);
            }
            {
                std::ofstream out(dir / "propensity_model.txt");
                ps.save(out);
            }
            const NuisanceEstimates est = detail::make_nuisance(data, fit_k, fit_seed, fit_ridge, fit_pmin);
            {
                std::ofstream out(dir / "nuisance.csv");
                out << "unit";
                for (int j = 0; j < data.arms(); ++j) out << ",mu_" << j;
                for (int j = 0; j < data.arms(); ++j) out << ",p_" << j;
                out << '\n';
                for (long i = 0; i < data.n(); ++i) {
                    out << i;
                    for (int j = 0; j < data.arms(); ++j)
                        out << ',' << opl::detail::format_double(est.mu_hat(i, j));
                    for (int j = 0; j < data.arms(); ++j)
                        out << ',' << opl::detail::format_double(est.p_hat(i, j));
                    out << '\n';
                }
            }
            detail::write_manifest(dir, "fit", fit);
            std::cout << "fitted models on " << data.n() << " observations\n";
        } else if (evaluate->parsed()) {
            const auto dir = detail::prepare_output_dir(eval_output);
            const Dataset data = load_csv(eval_input, eval_action, eval_reward);
            Eigen::VectorXi assignments = data.actions;
            if (!eval_policy.empty()) {
                std::ifstream in(eval_policy);
                if (!in) throw std::runtime_error("cannot open policy file " + eval_policy);
                assignments = PolicySpec::load(in).evaluate(data.features);
            }
            const NuisanceEstimates est = detail::make_nuisance(data, eval_k, eval_seed, eval_ridge, eval_pmin);
            std::vector<ValueReport> reports;
            if (eval_estimator == "all" || eval_estimator == "ra") reports.push_back(value_ra(assignments, est));
            if (eval_estimator == "all" || eval_estimator == "ipw")
                reports.push_back(value_ipw(data, assignments, est));
            if (eval_estimator == "all" || eval_estimator == "dr") reports.push_back(value_dr(data, assignments, est));
            std::ofstream out(dir / "values.csv");
            out << "estimator,value,n_effective\n";
            for (const ValueReport& r : reports)
                out << estimator_name(r.estimator) << ',' << opl::detail::format_double(r.value) << ','
                    << r.n_effective << '\n';
            detail::write_manifest(dir, "evaluate", evaluate);
            for (const ValueReport& r : reports)
                std::cout << estimator_name(r.estimator) << " value = " << r.value << '\n';
        } else if (search->parsed()) {
            const auto dir = detail::prepare_output_dir(search_output);
            const Dataset data = load_csv(search_input, search_action, search_reward);
            const std::vector<double> grid = detail::parse_grid(search_grid);
            PolicySearchResult result = [&] {
                if (search_method == "caipwl") {
                    CaipwlConfig config;
                    config.k_folds = search_k;
                    config.seed = search_seed;
                    config.ridge = search_ridge;
                    config.p_min = search_pmin;
                    return caipwl(data, search_feature, grid, config);
                }
                const NuisanceEstimates est = detail::make_nuisance(data, 0, search_seed, search_ridge, search_pmin);
                return procedure1_grid_search(data, est, search_feature, grid,
                                              estimator_from_name(search_estimator));
            }();
            {
                std::ofstream out(dir / "policy.txt");
                result.best_policy.save(out);
            }
            {
                std::ofstream out(dir / "value_surface.csv");
                const std::size_t knot_count = result.value_surface.front().first.size();
                for (std::size_t k = 0; k < knot_count; ++k) out << "knot_" << (k + 1) << ',';
                out << "value\n";
                for (const auto& [knots, value] : result.value_surface) {
                    for (double c : knots) out << opl::detail::format_double(c) << ',';
                    out << opl::detail::format_double(value) << '\n';
                }
            }
            detail::write_manifest(dir, "search", search);
            std::cout << "best value " << result.best_value << " at knots";
            for (double c : result.best_policy.threshold_rule().knots) std::cout << ' ' << c;
            std::cout << '\n';
        } else if (risk_cmd->parsed()) {
            const auto dir = detail::prepare_output_dir(risk_output);
            Dataset data = load_csv(risk_input, risk_action, risk_reward);
            if (risk_subsample > 0) data = subsample_with_all_arms(data, risk_subsample, risk_seed);
            std::vector<RiskProfile> profiles{RiskProfile::neutral(), RiskProfile::linear(),
                                              RiskProfile::quadratic()};
            if (risk_rho >= 0.0) profiles.push_back(RiskProfile::mean_variance(risk_rho));
            const std::vector<RiskSweepRow> rows = risk_sweep(data, risk_ridge, risk_pmin, profiles);
            std::ofstream out(dir / "risk_sweep.csv");
            out << "regime,match_rate,regret_ra,regret_ipw,regret_dr\n";
            for (const RiskSweepRow& row : rows) {
                out << risk_regime_name(row.regime) << ',' << opl::detail::format_double(row.match_rate) << ','
                    << opl::detail::format_double(row.regret_ra) << ','
                    << opl::detail::format_double(row.regret_ipw) << ','
                    << opl::detail::format_double(row.regret_dr) << '\n';
                std::cout << risk_regime_name(row.regime) << ": match " << row.match_rate << ", regret RA = "
                          << row.regret_ra << ", regret IPW = " << row.regret_ipw << ", regret DR = "
                          << row.regret_dr << '\n';
            }
            detail::write_manifest(dir, "risk-sweep", risk_cmd);
        } else if (online_cmd->parsed()) {
            const auto dir = detail::prepare_output_dir(online_output);
            const Dataset data = load_csv(online_input, online_action, online_reward);
            OnlineConfig config;
            config.ridge = online_ridge;
            config.refit_every = online_refit_every;
            config.mode = online_mode == "incremental" ? UpdateMode::incremental
                          : online_mode == "refit"     ? UpdateMode::refit_each_round
                                                       : UpdateMode::refit_every_m;
            const RiskProfile profile = detail::profile_from_name(online_risk, online_rho);
            const ReplayReport report = replay(data, online_warm, profile, config);
            {
                std::ofstream out(dir / "trajectory.csv");
                save_trajectory_csv(report, out);
            }
            {
                std::ofstream out(dir / "online_summary.txt");
                out << "rounds=" << report.rows.size() << "\nmatch_rate=" << report.match_rate
                    << "\nregret_ra=" << report.regret_ra << '\n';
            }
            detail::write_manifest(dir, "online", online_cmd);
            std::cout << "replayed " << report.rows.size() << " rounds: match rate " << report.match_rate
                      << ", regret RA = " << report.regret_ra << '\n';
        } else if (diagnose->parsed()) {
            const auto dir = detail::prepare_output_dir(diag_output);
            if (diag_experiment == "overlap") {
                if (diag_input.empty()) throw std::runtime_error("--input required for the overlap report");
                const Dataset data = load_csv(diag_input, diag_action, diag_reward);
                const double fit_floor = std::min(diag_pmin / 10.0, 0.5 / data.arms());
                const NuisanceEstimates est =
                    detail::make_nuisance(data, diag_k, diag_seed, diag_ridge, fit_floor);
                const OverlapReport report = overlap_report(data, est, diag_pmin, diag_weak);
                std::ofstream out(dir / "overlap.csv");
                out << "arm,min_propensity,fraction_below\n";
                for (int j = 0; j < data.arms(); ++j)
                    out << j << ',' << opl::detail::format_double(report.min_propensity[j]) << ','
                        << opl::detail::format_double(report.fraction_below[j]) << '\n';
                std::ofstream cov(dir / "coverage.csv");
                cov << "arm,feature,min,max\n";
                for (int j = 0; j < data.arms(); ++j)
                    for (int c = 0; c < data.p(); ++c)
                        cov << j << ',' << data.feature_names[static_cast<std::size_t>(c)] << ','
                            << opl::detail::format_double(report.feature_min(j, c)) << ','
                            << opl::detail::format_double(report.feature_max(j, c)) << '\n';
                std::cout << "overlap verdict: " << overlap_verdict_name(report.verdict) << '\n';
            } else if (diag_experiment == "inversion") {
                std::vector<std::uint64_t> seeds;
                for (int s = 0; s < diag_seeds; ++s) seeds.push_back(diag_seed + static_cast<std::uint64_t>(s));
                const auto points = inversion_experiment(detail::parse_list(diag_floors), seeds, diag_n);
                std::ofstream out(dir / "inversion.csv");
                out << "overlap_floor,sparse_probe_frequency,covered_probe_frequency,overall_frequency\n";
                for (const InversionPoint& pt : points) {
                    out << opl::detail::format_double(pt.overlap_floor) << ','
                        << opl::detail::format_double(pt.sparse_probe_frequency) << ','
                        << opl::detail::format_double(pt.covered_probe_frequency) << ','
                        << opl::detail::format_double(pt.overall_frequency) << '\n';
                    std::cout << "floor " << pt.overlap_floor << ": sparse-probe inversion frequency "
                              << pt.sparse_probe_frequency << '\n';
                }
            } else {
                std::vector<std::uint64_t> seeds;
                for (int s = 0; s < diag_seeds; ++s) seeds.push_back(diag_seed + static_cast<std::uint64_t>(s));
                const auto points =
                    confounding_sweep(detail::parse_list(diag_gammas), seeds, diag_n, diag_include_conf);
                std::ofstream out(dir / "confounding.csv");
                out << "confounder_strength,mean_bias,median_abs_bias,se\n";
                for (const ConfoundingPoint& pt : points) {
                    out << opl::detail::format_double(pt.confounder_strength) << ','
                        << opl::detail::format_double(pt.mean_bias) << ','
                        << opl::detail::format_double(pt.median_abs_bias) << ','
                        << opl::detail::format_double(pt.se) << '\n';
                    std::cout << "gamma " << pt.confounder_strength << ": mean bias " << pt.mean_bias
                              << " (se " << pt.se << ")\n";
                }
            }
            detail::write_manifest(dir, "diagnose", diagnose);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("opl");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace opl::cli
