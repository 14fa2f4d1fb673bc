#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "wle/dataset.hpp"
#include "wle/discriminant.hpp"
#include "wle/simulate.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using wle::DaKind;

namespace {

wle::Dataset diabetes() {
    return wle::ingest_csv(std::string(WLE_DATA_DIR) + "/diabetes.csv", {',', true, "class"});
}

// Two well-separated gaussian groups.
std::pair<MatrixXd, std::vector<std::string>> two_groups(int n_per, std::uint64_t seed) {
    wle::Scenario sc;
    sc.n = 2 * n_per;
    sc.p = 2;
    sc.seed = seed;
    MatrixXd x = wle::generate(sc);
    std::vector<std::string> labels;
    for (int i = 0; i < n_per; ++i) labels.push_back("a");
    for (int i = n_per; i < 2 * n_per; ++i) {
        x.row(i).array() += 8.0;
        labels.push_back("b");
    }
    return {x, labels};
}

}  // namespace

TEST_CASE("classification hand examples") {
    wle::DaModel m;
    m.kind = DaKind::LdaWleB;
    m.labels = {"lo", "hi"};
    m.priors = {0.5, 0.5};
    m.means = {VectorXd::Zero(1), VectorXd::Constant(1, 2.0)};
    m.scatters = {MatrixXd::Identity(1, 1)};
    SECTION("boundary at the midpoint") {
        CHECK(wle::classify(m, VectorXd::Constant(1, 0.99)) == "lo");
        CHECK(wle::classify(m, VectorXd::Constant(1, 1.01)) == "hi");
    }
    SECTION("group mean classifies to its own group") {
        CHECK(wle::classify(m, m.means[0]) == "lo");
        CHECK(wle::classify(m, m.means[1]) == "hi");
    }
    SECTION("equal means are decided by the prior") {
        wle::DaModel mp = m;
        mp.means[1] = mp.means[0];
        mp.priors = {0.2, 0.8};
        for (double y : {-3.0, 0.0, 4.0})
            CHECK(wle::classify(mp, VectorXd::Constant(1, y)) == "hi");
    }
}

TEST_CASE("perfectly separated groups classify without error") {
    const auto [x, labels] = two_groups(40, 3);
    wle::FitConfig cfg;
    for (DaKind kind : {DaKind::LdaWleA, DaKind::LdaWleB, DaKind::Qda}) {
        const wle::DaModel m = wle::fit_da(x, labels, kind, cfg);
        CHECK(wle::misclassification(m, x, labels) == 0.0);
    }
}

TEST_CASE("pooling two identical groups reproduces the group scatter") {
    wle::Scenario sc;
    sc.n = 60;
    sc.p = 2;
    sc.seed = 5;
    const MatrixXd half = wle::generate(sc);
    MatrixXd x(120, 2);
    x << half, half;
    std::vector<std::string> labels;
    for (int i = 0; i < 60; ++i) labels.push_back("a");
    for (int i = 0; i < 60; ++i) labels.push_back("b");
    wle::FitConfig cfg;
    const wle::DaModel pooled = wle::fit_da(x, labels, DaKind::LdaWleA, cfg);
    const wle::DaModel per_group = wle::fit_da(x, labels, DaKind::Qda, cfg);
    CHECK((pooled.scatters[0] - per_group.scatters[0]).norm() < 1e-8);
    CHECK((pooled.scatters[0] - per_group.scatters[1]).norm() < 1e-8);
}

TEST_CASE("unit weights reduce the pooled scatter to the classical estimate") {
    const auto [x, labels] = two_groups(30, 7);
    wle::FitConfig cfg;
    cfg.raf = wle::RafSpec::ml();
    const wle::DaModel m = wle::fit_da(x, labels, DaKind::LdaWleA, cfg);
    // gamma_j * omega_j = n_j - 1 when every weight is one
    for (double gw : {m.group_gammas[0] * m.group_weight_sums[0],
                      m.group_gammas[1] * m.group_weight_sums[1]}) {
        CHECK(gw == Catch::Approx(29.0).margin(1e-9));
    }
    // pooled scatter equals sum (n_j - 1) S_j / sum (n_j - 1)
    const wle::DaModel q = wle::fit_da(x, labels, DaKind::Qda, cfg);
    const MatrixXd expect = 0.5 * (q.scatters[0] + q.scatters[1]);
    CHECK((m.scatters[0] - expect).norm() < 1e-8);
}

TEST_CASE("pooled scatter is a convex combination of group scatters") {
    const auto [x, labels] = two_groups(50, 11);
    wle::FitConfig cfg;
    const wle::DaModel a = wle::fit_da(x, labels, DaKind::LdaWleA, cfg);
    const wle::DaModel q = wle::fit_da(x, labels, DaKind::Qda, cfg);
    double total = 0.0;
    std::vector<double> coef;
    for (std::size_t j = 0; j < 2; ++j) {
        const double gw = a.group_gammas[j] * a.group_weight_sums[j];
        CHECK(gw > 0.0);
        coef.push_back(gw);
        total += gw;
    }
    MatrixXd combo = MatrixXd::Zero(2, 2);
    for (std::size_t j = 0; j < 2; ++j) combo += (coef[j] / total) * q.scatters[j];
    CHECK(coef[0] / total + coef[1] / total == Catch::Approx(1.0).margin(1e-12));
    CHECK((a.scatters[0] - combo).norm() < 1e-10);
}

TEST_CASE("argmax is invariant to a constant shift of all scores") {
    // Doubling both priors' odds by the same factor leaves the rule unchanged:
    // classify depends on score differences only.
    wle::DaModel m;
    m.kind = DaKind::Qda;
    m.labels = {"a", "b"};
    m.priors = {0.3, 0.7};
    m.means = {VectorXd::Zero(2), VectorXd::Constant(2, 1.0)};
    m.scatters = {MatrixXd::Identity(2, 2), 2.0 * MatrixXd::Identity(2, 2)};
    wle::DaModel scaled = m;
    // same ratio, different normalization (classify never renormalizes)
    scaled.priors = {0.15, 0.35};
    for (double y1 : {-1.0, 0.0, 0.7, 2.0})
        for (double y2 : {-0.5, 0.5, 1.5}) {
            VectorXd y(2);
            y << y1, y2;
            CHECK(wle::classify(m, y) == wle::classify(scaled, y));
        }
}

TEST_CASE("diabetes fixture fits and orders the group means") {
    const wle::Dataset ds = diabetes();
    REQUIRE(ds.values.rows() == 145);
    REQUIRE(ds.values.cols() == 3);
    wle::FitConfig cfg;
    for (DaKind kind : {DaKind::LdaWleA, DaKind::LdaWleB, DaKind::Qda}) {
        const wle::DaModel m = wle::fit_da(ds.values, ds.labels, kind, cfg);
        CHECK(std::abs(m.priors[0] + m.priors[1] + m.priors[2] - 1.0) < 1e-12);
        double normal = 0.0, chemical = 0.0, overt = 0.0;
        for (std::size_t j = 0; j < m.labels.size(); ++j) {
            if (m.labels[j] == "Normal") normal = m.means[j][0];
            if (m.labels[j] == "Chemical") chemical = m.means[j][0];
            if (m.labels[j] == "Overt") overt = m.means[j][0];
        }
        CHECK(normal < chemical);
        CHECK(chemical < overt);
    }
}

TEST_CASE("centering mode option") {
    const wle::Dataset ds = diabetes();
    wle::FitConfig cfg;
    const wle::DaModel l1 =
        wle::fit_da(ds.values, ds.labels, DaKind::LdaWleB, cfg, wle::CenterMode::SpatialMedian);
    const wle::DaModel gw =
        wle::fit_da(ds.values, ds.labels, DaKind::LdaWleB, cfg, wle::CenterMode::GroupWle);
    // Both are sensible robust fits; they need not coincide but should agree
    // on nearly all classifications.
    const double r1 = wle::misclassification(l1, ds.values, ds.labels);
    const double r2 = wle::misclassification(gw, ds.values, ds.labels);
    CHECK(std::abs(r1 - r2) < 0.05);
}

TEST_CASE("leave-one-out cross validation on separated groups") {
    const auto [x, labels] = two_groups(25, 13);
    wle::FitConfig cfg;
    CHECK(wle::loo_cv(x, labels, DaKind::LdaWleB, cfg) == 0.0);
}

TEST_CASE("validation errors") {
    wle::FitConfig cfg;
    MatrixXd x(6, 2);
    x.setRandom();
    CHECK_THROWS_AS(wle::fit_da(x, {"a", "a", "a", "a", "a", "a"}, DaKind::Qda, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(wle::fit_da(x, {"a", "b"}, DaKind::Qda, cfg), std::invalid_argument);
    CHECK_THROWS_AS(wle::parse_da_kind("nope"), std::invalid_argument);
}
