#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wle/estimator.hpp"

namespace wle {

// On-disk fit archive: format version, config echo, and the fitted quantities.
// Doubles round-trip losslessly through the JSON layer (shortest-repr
// serialization).
struct ModelArchive {
    int version = 1;
    FitConfig config;
    FitResult fit;
};

namespace io {

using nlohmann::json;

inline json to_json(const VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline VectorXd vector_from(const json& a) {
    VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

inline MatrixXd matrix_from(const json& rows) {
    if (rows.empty()) return MatrixXd();
    MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j].get<double>();
    return m;
}

inline json config_to_json(const FitConfig& cfg) {
    json j;
    j["kernel"] = kernel_name(cfg.scheme.variant);
    j["bandwidth"] = cfg.scheme.h;
    j["raf"] = cfg.raf.name();
    j["raf_tau"] = cfg.raf.infinite ? 0.0 : cfg.raf.tau;
    j["raf_infinite"] = cfg.raf.infinite;
    j["max_iterations"] = cfg.max_iterations;
    j["convergence_tolerance"] = cfg.convergence_tolerance;
    j["init"] = (cfg.init.kind == InitSpec::Kind::Deterministic6) ? "det" : "sub";
    j["init_count"] = cfg.init.count;
    j["init_seed"] = cfg.init.seed;
    switch (cfg.bandwidth_mode.kind) {
        case BandwidthMode::Kind::Fixed: j["bandwidth_mode"] = "fixed"; break;
        case BandwidthMode::Kind::ScaledDefault: j["bandwidth_mode"] = "scaled"; break;
        case BandwidthMode::Kind::TargetDownweighting: j["bandwidth_mode"] = "target"; break;
    }
    j["bandwidth_value"] = cfg.bandwidth_mode.value;
    j["model_smoothing"] = cfg.model_smoothing;
    return j;
}

inline FitConfig config_from_json(const json& j) {
    FitConfig cfg;
    cfg.scheme.variant = parse_kernel(j.at("kernel").get<std::string>());
    cfg.scheme.h = j.at("bandwidth").get<double>();
    if (j.at("raf_infinite").get<bool>())
        cfg.raf = RafSpec::kullback_leibler();
    else
        cfg.raf = RafSpec::power(j.at("raf_tau").get<double>());
    cfg.max_iterations = j.at("max_iterations").get<int>();
    cfg.convergence_tolerance = j.at("convergence_tolerance").get<double>();
    cfg.init.kind = (j.at("init").get<std::string>() == "det") ? InitSpec::Kind::Deterministic6
                                                               : InitSpec::Kind::Subsampling;
    cfg.init.count = j.at("init_count").get<int>();
    cfg.init.seed = j.at("init_seed").get<std::uint64_t>();
    const std::string bm = j.at("bandwidth_mode").get<std::string>();
    cfg.bandwidth_mode.kind = (bm == "target")   ? BandwidthMode::Kind::TargetDownweighting
                              : (bm == "scaled") ? BandwidthMode::Kind::ScaledDefault
                                                 : BandwidthMode::Kind::Fixed;
    cfg.bandwidth_mode.value = j.at("bandwidth_value").get<double>();
    cfg.model_smoothing = j.at("model_smoothing").get<bool>();
    return cfg;
}

}  // namespace io

inline nlohmann::json archive_to_json(const ModelArchive& a) {
    nlohmann::json j;
    j["kind"] = "wle-fit";
    j["version"] = a.version;
    j["config"] = io::config_to_json(a.config);
    nlohmann::json f;
    f["location"] = io::to_json(a.fit.location);
    f["scatter"] = io::to_json(a.fit.scatter);
    f["weights"] = io::to_json(a.fit.weights);
    f["squared_distances"] = io::to_json(a.fit.squared_distances);
    f["iterations"] = a.fit.iterations;
    f["converged"] = a.fit.converged;
    f["empirical_downweighting"] = a.fit.empirical_downweighting;
    f["gamma_factor"] = a.fit.gamma_factor;
    f["bandwidth"] = a.fit.bandwidth;
    f["root_criterion"] = a.fit.root_criterion;
    j["fit"] = f;
    return j;
}

inline ModelArchive archive_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "wle-fit")
        throw std::runtime_error("model: not a fit archive");
    ModelArchive a;
    a.version = j.at("version").get<int>();
    a.config = io::config_from_json(j.at("config"));
    const nlohmann::json& f = j.at("fit");
    a.fit.location = io::vector_from(f.at("location"));
    a.fit.scatter = io::matrix_from(f.at("scatter"));
    a.fit.weights = io::vector_from(f.at("weights"));
    a.fit.squared_distances = io::vector_from(f.at("squared_distances"));
    a.fit.iterations = f.at("iterations").get<int>();
    a.fit.converged = f.at("converged").get<bool>();
    a.fit.empirical_downweighting = f.at("empirical_downweighting").get<double>();
    a.fit.gamma_factor = f.at("gamma_factor").get<double>();
    a.fit.bandwidth = f.at("bandwidth").get<double>();
    a.fit.root_criterion = f.at("root_criterion").get<double>();
    return a;
}

inline void save_archive(const ModelArchive& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("model: cannot write '" + path + "'");
    out << archive_to_json(a).dump(2) << "\n";
}

inline ModelArchive load_archive(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model: cannot read '" + path + "'");
    nlohmann::json j;
    in >> j;
    return archive_from_json(j);
}

}  // namespace wle
