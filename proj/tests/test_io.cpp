#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "wle/dataset.hpp"
#include "wle/model_io.hpp"
#include "wle/simulate.hpp"

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/wle_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("well-formed csv") {
    TempFile f("ok.csv", "a,b\n1,2\n3,4\n5.5,-6\n");
    const wle::Dataset ds = wle::ingest_csv(f.path);
    CHECK(ds.columns == std::vector<std::string>{"a", "b"});
    REQUIRE(ds.values.rows() == 3);
    REQUIRE(ds.values.cols() == 2);
    CHECK(ds.values(2, 0) == 5.5);
    CHECK(ds.values(2, 1) == -6.0);
    CHECK(ds.rejected_rows.empty());
}

TEST_CASE("non-numeric cell names row and column") {
    TempFile f("bad.csv", "a,b\n1,2\n3,oops\n");
    try {
        wle::ingest_csv(f.path);
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("oops") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
}

TEST_CASE("missing cells reject the row with its index") {
    TempFile f("miss.csv", "a,b\n1,2\n3,\n5,6\n");
    const wle::Dataset ds = wle::ingest_csv(f.path);
    CHECK(ds.values.rows() == 2);
    REQUIRE(ds.rejected_rows.size() == 1);
    CHECK(ds.rejected_rows[0] == 2);
}

TEST_CASE("label column is split out") {
    TempFile f("lab.csv", "x,cls,y\n1,u,2\n3,v,4\n");
    const wle::Dataset ds = wle::ingest_csv(f.path, {',', true, "cls"});
    CHECK(ds.columns == std::vector<std::string>{"x", "y"});
    CHECK(ds.labels == std::vector<std::string>{"u", "v"});
    CHECK(ds.values.cols() == 2);
    CHECK_THROWS_AS(wle::ingest_csv(f.path, {',', true, "nope"}), std::runtime_error);
}

TEST_CASE("headerless mode and ragged rows") {
    TempFile f("nh.csv", "1,2\n3,4\n");
    const wle::Dataset ds = wle::ingest_csv(f.path, {',', false, ""});
    CHECK(ds.columns == std::vector<std::string>{"c1", "c2"});
    CHECK(ds.values.rows() == 2);
    TempFile g("rag.csv", "a,b\n1,2\n3,4,5\n");
    CHECK_THROWS_AS(wle::ingest_csv(g.path), std::runtime_error);
    CHECK_THROWS_AS(wle::ingest_csv("/nonexistent/file.csv"), std::runtime_error);
}

TEST_CASE("bundled fixtures load") {
    const wle::Dataset stars = wle::ingest_csv(std::string(WLE_DATA_DIR) + "/stars.csv");
    CHECK(stars.values.rows() == 47);
    CHECK(stars.values.cols() == 2);
    const wle::Dataset diab =
        wle::ingest_csv(std::string(WLE_DATA_DIR) + "/diabetes.csv", {',', true, "class"});
    CHECK(diab.values.rows() == 145);
    CHECK(diab.values.cols() == 3);
    CHECK(diab.labels.size() == 145);
}

TEST_CASE("model archive round-trips losslessly") {
    wle::Scenario sc;
    sc.n = 80;
    sc.p = 3;
    for (std::uint64_t seed : {1, 2, 3}) {
        sc.seed = seed;
        const Eigen::MatrixXd x = wle::generate(sc);
        wle::ModelArchive a;
        a.config.scheme.variant = wle::Kernel::GammaKernel;
        a.config.bandwidth_mode = {wle::BandwidthMode::Kind::ScaledDefault, 1.25};
        a.fit = wle::fit(x, a.config);
        const std::string path = "/tmp/wle_test_archive.json";
        wle::save_archive(a, path);
        const wle::ModelArchive b = wle::load_archive(path);
        std::remove(path.c_str());

        CHECK(b.config.scheme.variant == a.config.scheme.variant);
        CHECK(b.config.raf.tau == a.config.raf.tau);
        CHECK(b.config.bandwidth_mode.value == a.config.bandwidth_mode.value);
        // bit-exact numeric round-trip
        CHECK((b.fit.location - a.fit.location).cwiseAbs().maxCoeff() == 0.0);
        CHECK((b.fit.scatter - a.fit.scatter).cwiseAbs().maxCoeff() == 0.0);
        CHECK((b.fit.weights - a.fit.weights).cwiseAbs().maxCoeff() == 0.0);
        CHECK((b.fit.squared_distances - a.fit.squared_distances).cwiseAbs().maxCoeff() == 0.0);
        CHECK(b.fit.bandwidth == a.fit.bandwidth);
        CHECK(b.fit.gamma_factor == a.fit.gamma_factor);
        CHECK(b.fit.iterations == a.fit.iterations);
        CHECK(b.fit.converged == a.fit.converged);
    }
}

TEST_CASE("archives with unknown extra fields still load") {
    wle::Scenario sc;
    sc.n = 40;
    sc.p = 2;
    sc.seed = 9;
    wle::ModelArchive a;
    a.fit = wle::fit(wle::generate(sc), a.config);
    nlohmann::json j = wle::archive_to_json(a);
    j["future_field"] = {{"x", 1}};
    const wle::ModelArchive b = wle::archive_from_json(j);
    CHECK((b.fit.location - a.fit.location).cwiseAbs().maxCoeff() == 0.0);
    nlohmann::json bad;
    bad["kind"] = "something-else";
    CHECK_THROWS_AS(wle::archive_from_json(bad), std::runtime_error);
}
