#include <catch2/catch_amalgamated.hpp>

#include "opl/cross_fit.hpp"
#include "opl/synthetic.hpp"

using namespace opl;

TEST_CASE("fold sizes differ by at most one and labels are seeded", "[cross_fit]") {
    for (long n : {10L, 47L, 100L}) {
        for (int k : {2, 3, 5}) {
            const FoldPlan plan = FoldPlan::make(n, k, 99);
            const std::vector<long> sizes = plan.fold_sizes();
            long lo = n, hi = 0;
            for (long s : sizes) {
                lo = std::min(lo, s);
                hi = std::max(hi, s);
            }
            REQUIRE(hi - lo <= 1);
            REQUIRE(FoldPlan::make(n, k, 99).labels == plan.labels);
            REQUIRE(FoldPlan::make(n, k, 100).labels != plan.labels);
        }
    }
    REQUIRE_THROWS_AS(FoldPlan::make(10, 1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(FoldPlan::make(10, 11, 0), std::invalid_argument);
}

TEST_CASE("leave-one-out predictions ignore the held-out reward", "[cross_fit]") {
    DgpSpec spec;
    spec.n = 12;
    spec.p = 1;
    spec.arms = 2;
    spec.assignment_strength = 0.0;
    Dataset d = generate_synthetic(spec, 63).data;
    // balanced arms so every leave-one-out complement keeps both
    for (long i = 0; i < d.n(); ++i) d.actions[i] = static_cast<int>(i % 2);

    const int k = static_cast<int>(d.n());
    const NuisanceEstimates base = cross_fit(d, k, 7, 0.05, 0.05);

    Dataset perturbed = d;
    perturbed.rewards[3] += 100.0;
    const NuisanceEstimates shifted = cross_fit(perturbed, k, 7, 0.05, 0.05);

    REQUIRE(base.mu_hat.row(3) == shifted.mu_hat.row(3));  // out-of-fold: own reward unused
    REQUIRE(base.mu_hat.row(4) != shifted.mu_hat.row(4));  // in-complement rows move
    REQUIRE(base.provenance == Provenance::cross_fit);
    REQUIRE(base.folds == k);
}

TEST_CASE("cross fitting is deterministic in its inputs", "[cross_fit]") {
    DgpSpec spec;
    spec.n = 300;
    const Dataset d = generate_synthetic(spec, 2).data;
    const NuisanceEstimates a = cross_fit(d, 5, 11, 0.01, 0.01);
    const NuisanceEstimates b = cross_fit(d, 5, 11, 0.01, 0.01);
    REQUIRE(a.mu_hat == b.mu_hat);
    REQUIRE(a.p_hat == b.p_hat);
}

TEST_CASE("cross-fit accuracy stays within 10% of the batch fit", "[cross_fit]") {
    DgpSpec spec;
    spec.n = 5000;
    spec.p = 3;
    spec.arms = 3;
    spec.noise_sd = 1.0;
    const SyntheticData s = generate_synthetic(spec, 19);
    const Eigen::MatrixXd truth = s.truth.mu_matrix(s.data.features);

    const NuisanceEstimates batch = batch_nuisance(s.data, 1e-6, 0.01);
    const NuisanceEstimates fitted = cross_fit(s.data, 5, 3, 1e-6, 0.01);
    const double mse_batch = (batch.mu_hat - truth).array().square().mean();
    const double mse_cv = (fitted.mu_hat - truth).array().square().mean();
    REQUIRE(std::abs(mse_cv - mse_batch) <= 0.10 * mse_batch);
}

TEST_CASE("a fold complement missing an arm is reported", "[cross_fit]") {
    Eigen::MatrixXd x(8, 1);
    Eigen::VectorXi d(8);
    Eigen::VectorXd y(8);
    for (long i = 0; i < 8; ++i) {
        x(i, 0) = static_cast<double>(i) / 4.0 - 1.0;
        d[i] = i == 0 ? 2 : static_cast<int>(i % 2);  // arm 2 appears once
        y[i] = static_cast<double>(i);
    }
    const Dataset data = make_dataset(x, d, y, 3);
    try {
        cross_fit(data, 4, 1, 0.1, 0.05);
        FAIL("expected FoldCoverageError");
    } catch (const FoldCoverageError& e) {
        REQUIRE(e.arm() == 2);
        REQUIRE(std::string(e.what()).find("smaller") != std::string::npos);
    }
}

TEST_CASE("nuisance validation catches malformed estimates", "[cross_fit]") {
    NuisanceEstimates est;
    est.mu_hat = Eigen::MatrixXd::Zero(2, 2);
    est.p_hat = Eigen::MatrixXd::Constant(2, 2, 0.4);  // rows sum to 0.8
    REQUIRE_THROWS_AS(est.validate(), std::invalid_argument);
    est.p_hat = Eigen::MatrixXd::Constant(2, 2, 0.5);
    REQUIRE_NOTHROW(est.validate());
}
