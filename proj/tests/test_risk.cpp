#include <catch2/catch_amalgamated.hpp>

#include "opl/dataset.hpp"
#include "opl/risk.hpp"
#include "test_util.hpp"

#include <random>

using namespace opl;

TEST_CASE("utility closed forms", "[risk]") {
    REQUIRE(utility(10.0, 2.0, RiskProfile::linear()) == Catch::Approx(5.0));
    REQUIRE(utility(10.0, 2.0, RiskProfile::quadratic()) == Catch::Approx(2.5));
    REQUIRE(utility(10.0, 2.0, RiskProfile::neutral()) == 10.0);
    // mean-variance: arms (mu, sigma^2) of (1,4) and (2,5) at rho=2 score -2 and -1
    REQUIRE(utility(1.0, 2.0, RiskProfile::mean_variance(2.0)) == Catch::Approx(-2.0));
    REQUIRE(utility(2.0, std::sqrt(5.0), RiskProfile::mean_variance(2.0)) == Catch::Approx(-1.0));
    REQUIRE_THROWS_AS(utility(1.0, -0.5, RiskProfile::neutral()), std::invalid_argument);
    REQUIRE_THROWS_AS(RiskProfile::mean_variance(-1.0), std::invalid_argument);
}

TEST_CASE("risk preferences can reorder two actions", "[risk]") {
    // A = (8, 2), B = (2, 1): linear prefers A (4 > 2), quadratic is
    // indifferent (2 = 2) and the tie resolves to A.
    Eigen::MatrixXd mu(1, 2), sigma(1, 2);
    mu << 8.0, 2.0;
    sigma << 2.0, 1.0;
    REQUIRE(utility(8.0, 2.0, RiskProfile::linear()) > utility(2.0, 1.0, RiskProfile::linear()));
    REQUIRE(utility(8.0, 2.0, RiskProfile::quadratic()) == utility(2.0, 1.0, RiskProfile::quadratic()));
    REQUIRE(risk_adjusted_first_best(mu, sigma, RiskProfile::linear())[0] == 0);
    REQUIRE(risk_adjusted_first_best(mu, sigma, RiskProfile::quadratic())[0] == 0);

    // mean-variance with rho=2 prefers the second arm from the example above
    Eigen::MatrixXd mv_mu(1, 2), mv_sigma(1, 2);
    mv_mu << 1.0, 2.0;
    mv_sigma << 2.0, std::sqrt(5.0);
    REQUIRE(risk_adjusted_first_best(mv_mu, mv_sigma, RiskProfile::mean_variance(2.0))[0] == 1);
}

TEST_CASE("risk-adjusted selection limits", "[risk]") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(0.5, 3.0);
    Eigen::MatrixXd mu(40, 3), sigma(40, 3);
    for (long i = 0; i < mu.rows(); ++i)
        for (long j = 0; j < mu.cols(); ++j) {
            mu(i, j) = unif(rng);
            sigma(i, j) = unif(rng);
        }

    SECTION("neutral matches first best on the means") {
        REQUIRE(risk_adjusted_first_best(mu, sigma, RiskProfile::neutral()) == first_best(mu));
    }

    SECTION("zero tolerance minimizes the variance") {
        const Eigen::VectorXi picked = risk_adjusted_first_best(mu, sigma, RiskProfile::mean_variance(0.0));
        for (long i = 0; i < mu.rows(); ++i) {
            for (long j = 0; j < mu.cols(); ++j)
                REQUIRE(sigma(i, picked[i]) * sigma(i, picked[i]) <= sigma(i, j) * sigma(i, j) + 1e-12);
        }
    }

    SECTION("a large tolerance recovers the mean argmax") {
        // rho beyond (max variance spread) / (min positive mean gap) makes the
        // mean term dominate every pairwise comparison.
        double max_spread = 0.0, min_gap = std::numeric_limits<double>::infinity();
        for (long i = 0; i < mu.rows(); ++i)
            for (long j = 0; j < mu.cols(); ++j)
                for (long l = 0; l < mu.cols(); ++l) {
                    max_spread = std::max(max_spread, std::abs(sigma(i, j) * sigma(i, j) - sigma(i, l) * sigma(i, l)));
                    const double gap = std::abs(mu(i, j) - mu(i, l));
                    if (gap > 1e-9) min_gap = std::min(min_gap, gap);
                }
        const double rho = 2.0 * max_spread / min_gap;
        REQUIRE(risk_adjusted_first_best(mu, sigma, RiskProfile::mean_variance(rho)) == first_best(mu));
    }

    SECTION("scaling the means leaves ratio-utility choices unchanged") {
        for (const RiskProfile& profile :
             {RiskProfile::neutral(), RiskProfile::linear(), RiskProfile::quadratic()}) {
            const Eigen::VectorXi base = risk_adjusted_first_best(mu, sigma, profile);
            REQUIRE(risk_adjusted_first_best(3.5 * mu, sigma, profile) == base);
        }
    }

    SECTION("congruence is required") {
        REQUIRE_THROWS_AS(risk_adjusted_first_best(mu, sigma.topRows(10), RiskProfile::neutral()),
                          std::invalid_argument);
    }
}

TEST_CASE("risk aversion orders the two ratio utilities", "[risk]") {
    const double mu = 4.0;
    for (double s1 : {0.5, 1.0, 2.0})
        for (double s2 : {2.5, 4.0, 8.0}) {
            REQUIRE(utility(mu, s2, RiskProfile::linear()) <= utility(mu, s1, RiskProfile::linear()));
            const double linear_drop = utility(mu, s2, RiskProfile::linear()) / utility(mu, s1, RiskProfile::linear());
            const double quad_drop =
                utility(mu, s2, RiskProfile::quadratic()) / utility(mu, s1, RiskProfile::quadratic());
            REQUIRE(quad_drop <= linear_drop + 1e-12);
        }
}

TEST_CASE("conditional variance of constant rewards is zero", "[risk]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const long n = 24;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXi d(n);
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) {
        x(i, 0) = unif(rng);
        d[i] = static_cast<int>(i % 2);
        y[i] = d[i] == 0 ? 2.0 : -3.0;
    }
    const Eigen::MatrixXd variance = conditional_variance(make_dataset(x, d, y, 2), 0.0);
    REQUIRE(variance.maxCoeff() < 1e-10);
    REQUIRE(variance.minCoeff() >= 0.0);
}

TEST_CASE("negative raw differences clamp to zero", "[risk]") {
    // Arm 0 learns y = x^2 from three points; extrapolating to x=4 makes
    // E[Y]^2 grow faster than the fitted E[Y^2], so the raw difference there
    // is negative and must clamp.
    Eigen::MatrixXd x(6, 1);
    x << 0.0, 1.0, 2.0, 4.0, 5.0, 6.0;
    Eigen::VectorXi d(6);
    d << 0, 0, 0, 1, 1, 1;
    Eigen::VectorXd y(6);
    y << 0.0, 1.0, 4.0, 1.0, 1.0, 1.0;
    const Eigen::MatrixXd variance = conditional_variance(make_dataset(x, d, y, 2), 0.0);
    REQUIRE(variance.minCoeff() >= 0.0);
    REQUIRE(variance(3, 0) == 0.0);  // the extrapolated unit at x=4, arm 0
}

TEST_CASE("heteroskedastic variance is recovered", "[risk]") {
    // Constant per-arm means with Var(Y|x) = 1 + x^2; the feature set carries
    // (x, x^2) so both moment regressions are correctly specified.
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const long n = 10000;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXi d(n);
    Eigen::VectorXd y(n);
    const double means[2] = {1.0, -2.0};
    for (long i = 0; i < n; ++i) {
        const double v = unif(rng);
        x(i, 0) = v;
        x(i, 1) = v * v;
        d[i] = static_cast<int>(i % 2);
        y[i] = means[d[i]] + std::sqrt(1.0 + v * v) * normal(rng);
    }
    const Eigen::MatrixXd variance = conditional_variance(make_dataset(x, d, y, 2), 1e-8);
    double abs_err = 0.0;
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) abs_err += std::abs(variance(i, j) - (1.0 + x(i, 0) * x(i, 0)));
    abs_err /= static_cast<double>(2 * n);
    REQUIRE(abs_err <= 0.1);
}

TEST_CASE("example 1 optimum maximizes the product, not the net benefit", "[risk]") {
    SECTION("constant net benefit picks the largest grid point") {
        ClosedFormExample ex;
        ex.alpha = [](double) { return 1.0; };
        ex.cdf = [](double c) { return std::min(std::max(c / 2.0, 0.0), 1.0); };  // X ~ U(0,2)
        ex.c_grid = {0.25, 0.5, 1.0, 1.75};
        REQUIRE(example1_optimum(ex).c == 1.75);
    }

    SECTION("dense grid against the analytic optimum") {
        // alpha(c) = 1 - (c-1)^2 with X ~ U(0,2): the product c^2 - c^3/2
        // peaks at c = 4/3, away from argmax alpha = 1.
        ClosedFormExample ex;
        ex.alpha = [](double c) { return 1.0 - (c - 1.0) * (c - 1.0); };
        ex.cdf = [](double c) { return std::min(std::max(c / 2.0, 0.0), 1.0); };
        for (double c = 0.0; c <= 2.0; c += 1e-4) ex.c_grid.push_back(c);
        const GridOptimum best = example1_optimum(ex);
        REQUIRE(best.c == Catch::Approx(4.0 / 3.0).margin(1e-3));
        REQUIRE(std::abs(best.c - 1.0) > 0.2);
    }

    SECTION("a step distribution pushes the optimum past the step") {
        ClosedFormExample ex;
        ex.alpha = [](double) { return 2.0; };
        ex.cdf = [](double c) { return c >= 0.7 ? 1.0 : 0.0; };
        ex.c_grid = {0.1, 0.4, 0.69, 0.7, 0.9};
        REQUIRE(example1_optimum(ex).c >= 0.7);
    }
}

TEST_CASE("example 2 risk-adjusted optimum", "[risk]") {
    ClosedFormExample ex;
    ex.alpha = [](double c) { return 1.0 - (c - 1.0) * (c - 1.0); };
    ex.cdf = [](double c) { return std::min(std::max(c / 2.0, 0.0), 1.0); };
    for (double c = 0.0; c <= 2.0; c += 1e-3) ex.c_grid.push_back(c);

    SECTION("a huge noise variance recovers the example 1 optimum") {
        ex.noise_var = 1e9;
        REQUIRE(example2_optimum(ex).c == Catch::Approx(example1_optimum(ex).c).margin(2e-3));
    }

    SECTION("constant net benefit with increasing ratio picks the top of the grid") {
        // With alpha = 2 and noise 0.5 the ratio 2F/(4F(1-F)+0.5) increases
        // in F, so the optimum sits at the largest grid point.
        ClosedFormExample flat;
        flat.alpha = [](double) { return 2.0; };
        flat.cdf = [](double c) { return std::min(std::max(c, 0.0), 1.0); };
        flat.noise_var = 0.5;
        for (double c = 0.05; c <= 1.0; c += 1e-3) flat.c_grid.push_back(c);
        REQUIRE(example2_optimum(flat).c == Catch::Approx(flat.c_grid.back()));
    }

    SECTION("zero mass below the grid gives gamma = 0 and the smallest point") {
        ClosedFormExample zero;
        zero.alpha = [](double) { return 1.0; };
        zero.cdf = [](double) { return 0.0; };
        zero.noise_var = 0.25;
        zero.c_grid = {0.2, 0.4, 0.6};
        const GridOptimum best = example2_optimum(zero);
        REQUIRE(best.c == 0.2);
        REQUIRE(best.value == 0.0);
    }

    SECTION("zero noise with saturated cdf is rejected") {
        ClosedFormExample degenerate;
        degenerate.alpha = [](double) { return 1.0; };
        degenerate.cdf = [](double) { return 1.0; };
        degenerate.noise_var = 0.0;
        degenerate.c_grid = {0.5};
        REQUIRE_THROWS_AS(example2_optimum(degenerate), std::domain_error);
    }
}

TEST_CASE("risk sweep runs the three preference settings", "[risk]") {
    const Dataset d = load_csv(test_util::jtrain2_path(), "action", "re78");
    const std::vector<RiskSweepRow> rows = risk_sweep(
        d, 1e-2, 0.01, {RiskProfile::neutral(), RiskProfile::linear(), RiskProfile::quadratic()});
    REQUIRE(rows.size() == 3);
    for (const RiskSweepRow& row : rows) {
        REQUIRE(row.match_rate >= 0.0);
        REQUIRE(row.match_rate <= 1.0);
        REQUIRE(row.optimal.size() == d.n());
    }
    // the neutral allocation maximizes the plug-in value, so its RA regret
    // dominates the risk-averse ones
    REQUIRE(rows[0].regret_ra >= rows[1].regret_ra);
    REQUIRE(rows[0].regret_ra >= rows[2].regret_ra);
}
