#include <catch2/catch_amalgamated.hpp>

#include "opl/synthetic.hpp"

#include <random>

using namespace opl;

TEST_CASE("noiseless unconfounded rewards equal the true means", "[synthetic]") {
    DgpSpec spec;
    spec.n = 200;
    spec.noise_sd = 0.0;
    const SyntheticData s = generate_synthetic(spec, 11);
    for (long i = 0; i < s.data.n(); ++i)
        REQUIRE(s.data.rewards[i] == s.truth.mu(s.data.actions[i], s.data.features.row(i)));
}

TEST_CASE("generation is bit-identical under the same seed", "[synthetic]") {
    DgpSpec spec;
    spec.n = 300;
    const SyntheticData a = generate_synthetic(spec, 42);
    const SyntheticData b = generate_synthetic(spec, 42);
    REQUIRE(a.data.features == b.data.features);
    REQUIRE(a.data.actions == b.data.actions);
    REQUIRE(a.data.rewards == b.data.rewards);

    const SyntheticData c = generate_synthetic(spec, 43);
    REQUIRE(a.data.rewards != c.data.rewards);
}

TEST_CASE("true propensities respect the overlap floor", "[synthetic]") {
    for (double floor : {0.02, 0.1, 0.2}) {
        DgpSpec spec;
        spec.n = 400;
        spec.arms = 4;
        spec.overlap_floor = floor;
        spec.assignment_strength = 3.0;  // saturating scores so the floor binds
        const SyntheticData s = generate_synthetic(spec, 5);
        const Eigen::MatrixXd p = s.truth.propensity_matrix(s.data.features);
        REQUIRE(p.minCoeff() >= floor - 1e-12);
        for (long i = 0; i < p.rows(); ++i) REQUIRE(std::abs(p.row(i).sum() - 1.0) < 1e-9);
    }
}

TEST_CASE("infeasible overlap floor is rejected", "[synthetic]") {
    DgpSpec spec;
    spec.arms = 3;
    spec.overlap_floor = 0.4;  // above 1/3
    REQUIRE_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
}

TEST_CASE("hidden confounder is independent of the features when inactive", "[synthetic]") {
    DgpSpec spec;
    spec.n = 20000;
    spec.p = 3;
    spec.confounder_strength = 0.0;
    const SyntheticData s = generate_synthetic(spec, 9);
    const Eigen::VectorXd u = s.hidden_confounder.array() - s.hidden_confounder.mean();
    for (int c = 0; c < spec.p; ++c) {
        const Eigen::VectorXd x = s.data.features.col(c).array() - s.data.features.col(c).mean();
        const double corr = u.dot(x) / std::sqrt(u.squaredNorm() * x.squaredNorm());
        REQUIRE(std::abs(corr) < 0.03);
    }
}

TEST_CASE("per-arm reward means match the propensity-weighted truth", "[synthetic]") {
    DgpSpec spec;
    spec.n = 100000;
    spec.p = 3;
    spec.arms = 3;
    spec.noise_sd = 0.5;
    const SyntheticData s = generate_synthetic(spec, 77);

    // Truth moments E[mu_j p_j] / E[p_j] by independent Monte Carlo over x.
    std::mt19937_64 rng(123456);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const long draws = 200000;
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(spec.arms);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(spec.arms);
    Eigen::VectorXd x(spec.p);
    for (long t = 0; t < draws; ++t) {
        for (int c = 0; c < spec.p; ++c) x[c] = unif(rng);
        const Eigen::VectorXd p = s.truth.propensity(x);
        const Eigen::VectorXd mu = s.truth.mu_all(x);
        weighted += p.cwiseProduct(mu);
        mass += p;
    }

    for (int j = 0; j < spec.arms; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        long count = 0;
        for (long i = 0; i < s.data.n(); ++i) {
            if (s.data.actions[i] != j) continue;
            sum += s.data.rewards[i];
            sum_sq += s.data.rewards[i] * s.data.rewards[i];
            ++count;
        }
        const double mean = sum / count;
        const double sd = std::sqrt(sum_sq / count - mean * mean);
        const double se = sd / std::sqrt(static_cast<double>(count));
        const double expected = weighted[j] / mass[j];
        REQUIRE(std::abs(mean - expected) <= 3.0 * se + 0.01);
    }
}

TEST_CASE("closed-form threshold value agrees with Monte Carlo", "[synthetic]") {
    DgpSpec spec;
    spec.p = 4;
    spec.arms = 3;
    const SyntheticTruth truth = generate_synthetic(spec, 3).truth;
    for (int feature : {0, 2}) {
        const std::vector<double> knots{-0.4, 0.3};
        const double closed = truth.threshold_policy_value(feature, knots);
        const McValue mc = truth.policy_value_mc([&](const Eigen::VectorXd& x) {
            int arm = 0;
            for (double c : knots) arm += x[feature] > c ? 1 : 0;
            return arm;
        });
        REQUIRE(std::abs(closed - mc.value) <= 4.0 * mc.se);
    }
}

TEST_CASE("optimal arm is the argmax of the true means", "[synthetic]") {
    const SyntheticTruth truth = generate_synthetic(DgpSpec{}, 2).truth;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd x(truth.p());
    for (int t = 0; t < 50; ++t) {
        for (int c = 0; c < truth.p(); ++c) x[c] = unif(rng);
        const Eigen::VectorXd mu = truth.mu_all(x);
        int best = 0;
        for (int j = 1; j < truth.arms(); ++j)
            if (mu[j] > mu[best]) best = j;
        REQUIRE(truth.optimal_arm(x) == best);
    }
}

TEST_CASE("augment_quadratic appends the squared first feature", "[synthetic]") {
    const Dataset d = generate_synthetic(DgpSpec{}, 4).data;
    const Dataset augmented = augment_quadratic(d);
    REQUIRE(augmented.p() == d.p() + 1);
    REQUIRE(augmented.feature_names.back() == d.feature_names[0] + "_sq");
    for (long i = 0; i < d.n(); ++i)
        REQUIRE(augmented.features(i, d.p()) == d.features(i, 0) * d.features(i, 0));
}
