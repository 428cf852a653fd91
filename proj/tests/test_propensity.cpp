#include <catch2/catch_amalgamated.hpp>

#include "opl/propensity.hpp"
#include "opl/synthetic.hpp"

#include <random>
#include <sstream>

using namespace opl;

TEST_CASE("an uninformative feature yields the empirical arm shares", "[propensity]") {
    const long n = 60;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
    Eigen::VectorXi d(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (long i = 0; i < n; ++i) d[i] = i < 30 ? 0 : (i < 50 ? 1 : 2);
    const PropensityModel model = fit_propensity(make_dataset(x, d, y, 3), 0.001);
    const Eigen::VectorXd p = model.predict(Eigen::VectorXd::Zero(1));
    REQUIRE(p[0] == Catch::Approx(30.0 / 60.0).margin(1e-5));
    REQUIRE(p[1] == Catch::Approx(20.0 / 60.0).margin(1e-5));
    REQUIRE(p[2] == Catch::Approx(10.0 / 60.0).margin(1e-5));
}

TEST_CASE("uniform assignment is learned as uniform", "[propensity]") {
    DgpSpec spec;
    spec.n = 100000;
    spec.p = 1;
    spec.arms = 3;
    spec.assignment_strength = 0.0;
    const Dataset d = generate_synthetic(spec, 31).data;
    const PropensityModel model = fit_propensity(d, 0.001);
    const Eigen::MatrixXd p = model.predict_matrix(d.features);
    REQUIRE((p.array() - 1.0 / 3.0).abs().maxCoeff() < 0.02);
}

TEST_CASE("saturated scores floor at p_min and cap at 1 - J*p_min", "[propensity]") {
    PropensityModel model(3, 1, 0.01);
    model.coefficients() << 50.0, 100.0,  // arm 1 score
        25.0, 50.0;                       // arm 2 score
    Eigen::VectorXd x(1);
    x << 1.0;  // scores (0, 150, 75): arm 1 saturates
    const Eigen::VectorXd p = model.predict(x);
    REQUIRE(p.minCoeff() == Catch::Approx(0.01).margin(1e-12));
    REQUIRE(p.maxCoeff() == Catch::Approx(1.0 - 2 * 0.01).margin(1e-9));
    REQUIRE(p.sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("a perfectly separable fit saturates instead of reaching 0/1", "[propensity]") {
    const long n = 40;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXi d(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (long i = 0; i < n; ++i) {
        x(i, 0) = i < n / 2 ? -1.0 + 0.01 * i : 1.0 - 0.01 * (i - n / 2);
        d[i] = i < n / 2 ? 0 : 1;
    }
    const PropensityModel model = fit_propensity(make_dataset(x, d, y, 2), 0.02);
    Eigen::VectorXd left(1), right(1);
    left << -1.0;
    right << 1.0;
    REQUIRE(model.predict(left)[1] == Catch::Approx(0.02).margin(1e-9));
    REQUIRE(model.predict(left)[0] == Catch::Approx(0.98).margin(1e-9));
    REQUIRE(model.predict(right)[1] == Catch::Approx(0.98).margin(1e-9));
}

TEST_CASE("propensity preconditions are enforced", "[propensity]") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 2.0, 3.0;
    Eigen::VectorXi d(4);
    d << 0, 1, 0, 1;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    const Dataset data = make_dataset(x, d, y, 2);
    REQUIRE_THROWS_AS(fit_propensity(data, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_propensity(data, 0.6), std::invalid_argument);

    Eigen::VectorXi gap(4);
    gap << 0, 1, 0, 1;
    REQUIRE_THROWS_AS(fit_propensity(make_dataset(x, gap, y, 3), 0.01), MissingArmError);
}

TEST_CASE("predicted rows are proper floored distributions", "[propensity]") {
    for (std::uint64_t seed : {1ULL, 2ULL}) {
        DgpSpec spec;
        spec.n = 800;
        spec.arms = 4;
        spec.assignment_strength = 2.0;
        const Dataset d = generate_synthetic(spec, seed).data;
        const double p_min = 0.015;
        const PropensityModel model = fit_propensity(d, p_min);
        const Eigen::MatrixXd p = model.predict_matrix(d.features);
        for (long i = 0; i < p.rows(); ++i) {
            REQUIRE(std::abs(p.row(i).sum() - 1.0) < 1e-9);
            REQUIRE(p.row(i).minCoeff() >= p_min - 1e-12);
        }
    }
}

TEST_CASE("propensity model serialization round-trips", "[propensity]") {
    DgpSpec spec;
    spec.n = 400;
    const Dataset d = generate_synthetic(spec, 17).data;
    const PropensityModel model = fit_propensity(d, 0.01);
    std::stringstream buffer;
    model.save(buffer);
    const PropensityModel reloaded = PropensityModel::load(buffer);
    REQUIRE(reloaded.arms() == model.arms());
    REQUIRE(reloaded.p_min() == model.p_min());
    REQUIRE(reloaded.coefficients() == model.coefficients());
}
