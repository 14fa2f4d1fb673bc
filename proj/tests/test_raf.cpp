#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wle/raf.hpp"

using wle::RafSpec;

TEST_CASE("A(0) = 0 for every preset") {
    for (const RafSpec& s : {RafSpec::ml(), RafSpec::hellinger(), RafSpec::kullback_leibler(),
                             RafSpec::neyman_chisq(), RafSpec::power(4.0)}) {
        CHECK(wle::raf_value(s, 0.0) == Catch::Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("hand values of the adjustment function") {
    // tau = 2: A(1) = 2(sqrt(2) - 1)
    CHECK(wle::raf_value(RafSpec::hellinger(), 1.0) ==
          Catch::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-12));
    // tau = 1: identity
    CHECK(wle::raf_value(RafSpec::ml(), 0.7) == Catch::Approx(0.7));
    // infinite tau: log(delta + 1)
    CHECK(wle::raf_value(RafSpec::kullback_leibler(), std::exp(1.0) - 1.0) ==
          Catch::Approx(1.0).epsilon(1e-12));
    // tau = -1: A(delta) = -(1/(delta+1) - 1)
    CHECK(wle::raf_value(RafSpec::neyman_chisq(), 1.0) == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("maximum likelihood weights are identically one") {
    for (double d : {-0.999, -0.5, 0.0, 0.3, 5.0, 500.0})
        CHECK(wle::weight(RafSpec::ml(), d) == 1.0);
}

TEST_CASE("weights lie in [0, 1] across the residual range") {
    for (const RafSpec& s : {RafSpec::hellinger(), RafSpec::kullback_leibler(),
                             RafSpec::neyman_chisq(), RafSpec::power(3.0)}) {
        for (int i = 0; i <= 2000; ++i) {
            const double delta = -1.0 + i * 0.05;
            const double w = wle::weight(s, delta);
            CHECK(w >= 0.0);
            CHECK(w <= 1.0);
        }
    }
}

TEST_CASE("weight is unimodal with its peak at zero residual") {
    for (const RafSpec& s : {RafSpec::hellinger(), RafSpec::kullback_leibler(),
                             RafSpec::power(3.0)}) {
        CHECK(wle::weight(s, 0.0) == Catch::Approx(1.0));
        double prev = wle::weight(s, -0.999);
        for (double d = -0.95; d <= 0.0; d += 0.05) {
            const double w = wle::weight(s, d);
            CHECK(w >= prev - 1e-12);
            prev = w;
        }
        prev = wle::weight(s, 0.0);
        for (double d = 0.5; d <= 50.0; d += 0.5) {
            const double w = wle::weight(s, d);
            CHECK(w <= prev + 1e-12);
            prev = w;
        }
    }
}

TEST_CASE("boundary residual gives zero weight") {
    CHECK(wle::weight(RafSpec::hellinger(), -1.0) == 0.0);
    CHECK(wle::weight(RafSpec::kullback_leibler(), -1.0) == 0.0);
}

TEST_CASE("parsing and naming round-trip") {
    CHECK(RafSpec::parse("ml").tau == 1.0);
    CHECK(RafSpec::parse("hellinger").tau == 2.0);
    CHECK(RafSpec::parse("kl").infinite);
    CHECK(RafSpec::parse("ncs").tau == -1.0);
    CHECK(RafSpec::parse("power:4").tau == 4.0);
    CHECK(RafSpec::parse(RafSpec::hellinger().name()).tau == 2.0);
    CHECK_THROWS_AS(RafSpec::parse("power:0.5"), std::invalid_argument);
    CHECK_THROWS_AS(RafSpec::parse("wat"), std::invalid_argument);
}

TEST_CASE("residuals below -1 are rejected") {
    CHECK_THROWS_AS(wle::raf_value(RafSpec::hellinger(), -1.5), std::invalid_argument);
    CHECK_THROWS_AS(wle::weight(RafSpec::hellinger(), -1.5), std::invalid_argument);
}
