#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "wle/simulate.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("clean scenario approximates the standard normal moments") {
    wle::Scenario sc;
    sc.n = 20000;
    sc.p = 3;
    sc.seed = 1;
    const MatrixXd x = wle::generate(sc);
    CHECK(x.colwise().mean().norm() < 0.05);
    const VectorXd mean = x.colwise().mean();
    MatrixXd c = x.rowwise() - mean.transpose();
    const MatrixXd cov = c.transpose() * c / (sc.n - 1.0);
    CHECK((cov - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("generation is deterministic in the seed") {
    wle::Scenario sc;
    sc.n = 50;
    sc.p = 4;
    sc.epsilon = 0.2;
    sc.k = 5.0;
    sc.seed = 42;
    const MatrixXd a = wle::generate(sc);
    const MatrixXd b = wle::generate(sc);
    CHECK((a - b).norm() == 0.0);
    sc.seed = 43;
    CHECK((a - wle::generate(sc)).norm() > 0.0);
}

TEST_CASE("contamination shifts the expected number of rows") {
    wle::Scenario sc;
    sc.n = 5000;
    sc.p = 4;
    sc.epsilon = 0.2;
    sc.k = 10.0;
    sc.seed = 7;
    const MatrixXd x = wle::generate(sc);
    int shifted = 0;
    for (int i = 0; i < sc.n; ++i) shifted += x(i, 0) > 5.0;
    // Binomial(5000, 0.2): well within five standard deviations of 1000.
    CHECK(std::abs(shifted - 1000) < 150);
}

TEST_CASE("contamination direction defaults") {
    wle::Scenario sc;
    sc.p = 8;
    auto a = sc.effective_direction();
    CHECK(std::count(a.begin(), a.end(), 1) == 8);
    sc.p = 50;
    a = sc.effective_direction();
    CHECK(std::count(a.begin(), a.end(), 1) == 5);
    for (int j = 0; j < 5; ++j) CHECK(a[j] == 1);
    sc.direction = {0, 1, 0};
    sc.p = 3;
    CHECK(sc.effective_direction() == std::vector<int>{0, 1, 0});
}

TEST_CASE("measures of an exact fit vanish") {
    wle::FitResult f;
    f.location = VectorXd::Zero(5);
    f.scatter = MatrixXd::Identity(5, 5);
    const wle::MetricsRow m = wle::measure(f, 0.1);
    CHECK(m.location_error == 0.0);
    CHECK(m.log_mean_trace == Catch::Approx(0.0).margin(1e-14));
    CHECK(m.log10_condition == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.max_diag_dev == 0.0);
    CHECK(m.max_offdiag == 0.0);
    CHECK(m.elapsed_seconds == 0.1);
}

TEST_CASE("measures hand example") {
    wle::FitResult f;
    f.location = VectorXd::Zero(3);
    f.scatter = MatrixXd::Identity(3, 3);
    f.scatter(0, 0) = 4.0;
    const wle::MetricsRow m = wle::measure(f, 0.0);
    CHECK(m.log10_condition == Catch::Approx(std::log10(4.0)).epsilon(1e-12));
    CHECK(m.max_diag_dev == Catch::Approx(3.0));
}

TEST_CASE("study runs and is reproducible") {
    wle::Scenario sc;
    sc.n = 60;
    sc.p = 3;
    std::vector<wle::NamedEstimator> est = {{"MLE", wle::fit_mle}};
    const auto a = wle::run_study({sc}, 3, est, 99);
    const auto b = wle::run_study({sc}, 3, est, 99);
    REQUIRE(a.size() == 1);
    CHECK(a[0].replicates == 3);
    CHECK(a[0].failures == 0);
    CHECK(a[0].mean.location_error == b[0].mean.location_error);
    CHECK(a[0].mean.location_error < 0.5);
    CHECK(a[0].mean.max_offdiag == b[0].mean.max_offdiag);
}

TEST_CASE("cell results are independent of estimator order") {
    wle::Scenario sc;
    sc.n = 80;
    sc.p = 3;
    sc.epsilon = 0.1;
    sc.k = 4.0;
    auto fit_wle = [](const MatrixXd& data) {
        wle::FitConfig cfg;
        return wle::fit(data, cfg);
    };
    std::vector<wle::NamedEstimator> ab = {{"MLE", wle::fit_mle}, {"WLE", fit_wle}};
    std::vector<wle::NamedEstimator> ba = {{"WLE", fit_wle}, {"MLE", wle::fit_mle}};
    const auto r1 = wle::run_study({sc}, 3, ab, 5);
    const auto r2 = wle::run_study({sc}, 3, ba, 5);
    for (const auto& c1 : r1)
        for (const auto& c2 : r2)
            if (c1.estimator == c2.estimator)
                CHECK(c1.mean.location_error == c2.mean.location_error);
}

TEST_CASE("failures are counted, not fatal") {
    wle::Scenario sc;
    sc.n = 30;
    sc.p = 2;
    std::vector<wle::NamedEstimator> est = {
        {"broken", [](const MatrixXd&) -> wle::FitResult {
             throw std::runtime_error("always fails");
         }}};
    const auto r = wle::run_study({sc}, 4, est, 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].failures == 4);
    CHECK(r[0].replicates == 0);
}

TEST_CASE("shipped estimator set") {
    const auto est = wle::study_estimators();
    REQUIRE(est.size() == 5);
    CHECK(est[0].name == "WLEa");
    CHECK(est[4].name == "MLE");
}

TEST_CASE("averaged measures shrink with the sample size on clean data") {
    std::vector<wle::Scenario> grid;
    for (int n : {100, 2000}) {
        wle::Scenario sc;
        sc.n = n;
        sc.p = 5;
        grid.push_back(sc);
    }
    std::vector<wle::NamedEstimator> est = {{"MLE", wle::fit_mle}};
    const auto r = wle::run_study(grid, 10, est, 17);
    REQUIRE(r.size() == 2);
    CHECK(r[1].mean.location_error < r[0].mean.location_error);
    CHECK(r[1].mean.max_offdiag < r[0].mean.max_offdiag);
}

TEST_CASE("scenario validation") {
    wle::Scenario sc;
    sc.epsilon = 0.6;
    CHECK_THROWS_AS(wle::generate(sc), std::invalid_argument);
    sc.epsilon = 0.0;
    sc.n = 0;
    CHECK_THROWS_AS(wle::generate(sc), std::invalid_argument);
    CHECK_THROWS_AS(wle::run_study({}, 0, {{"MLE", wle::fit_mle}}, 1), std::invalid_argument);
}
