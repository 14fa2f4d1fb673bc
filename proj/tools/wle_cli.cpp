// Command line front end: fit, outliers, pca, da, simulate.
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure (diagnostic JSON
// on stderr).

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "wle/dataset.hpp"
#include "wle/discriminant.hpp"
#include "wle/estimator.hpp"
#include "wle/model_io.hpp"
#include "wle/outlier.hpp"
#include "wle/pca.hpp"
#include "wle/simulate.hpp"

using nlohmann::json;

namespace {

// Fixed-precision numeric formatting so repeated runs are byte-identical.
std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct FitFlags {
    std::string kernel = "logback";
    std::string raf = "hellinger";
    std::string bandwidth = "auto";
    double bandwidth_scale = 0.0;
    double target = 0.0;
    std::string init = "det";
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kernel", kernel, "reflect|logback|gamma|logchisq");
        cmd->add_option("--raf", raf, "ml|hellinger|kl|ncs|power:<tau>");
        cmd->add_option("--bandwidth", bandwidth, "bandwidth value, or 'auto' for the default");
        cmd->add_option("--bandwidth-scale", bandwidth_scale,
                        "multiplier applied to the default bandwidth");
        cmd->add_option("--target-downweighting", target,
                        "choose the bandwidth to attain this downweighting level");
        cmd->add_option("--init", init, "det | sub:<count>");
        cmd->add_option("--seed", seed, "seed for subsampling initialization");
    }

    wle::FitConfig config() const {
        wle::FitConfig cfg;
        cfg.scheme.variant = wle::parse_kernel(kernel);
        cfg.raf = wle::RafSpec::parse(raf);
        if (init == "det") {
            cfg.init.kind = wle::InitSpec::Kind::Deterministic6;
        } else if (init.rfind("sub:", 0) == 0) {
            cfg.init.kind = wle::InitSpec::Kind::Subsampling;
            cfg.init.count = std::stoi(init.substr(4));
            cfg.init.seed = seed;
        } else {
            throw CLI::ValidationError("--init", "expected det or sub:<count>");
        }
        if (target > 0.0) {
            cfg.bandwidth_mode = {wle::BandwidthMode::Kind::TargetDownweighting, target};
        } else if (bandwidth_scale > 0.0) {
            cfg.bandwidth_mode = {wle::BandwidthMode::Kind::ScaledDefault, bandwidth_scale};
        } else if (bandwidth != "auto") {
            cfg.bandwidth_mode = {wle::BandwidthMode::Kind::Fixed, std::stod(bandwidth)};
        }
        return cfg;
    }
};

int numerical_failure(const std::string& where, const std::exception& e) {
    json diag;
    diag["error"] = "numerical";
    diag["command"] = where;
    diag["message"] = e.what();
    std::cerr << diag.dump(2) << std::endl;
    return 2;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

int cmd_fit(const std::string& input, const FitFlags& flags, const std::string& out_path) {
    wle::Dataset ds = wle::ingest_csv(input);
    if (ds.values.rows() <= ds.values.cols())
        throw CLI::ValidationError("--input", "need more rows than columns for a fit");
    wle::FitConfig cfg = flags.config();
    wle::ModelArchive archive;
    archive.config = cfg;
    try {
        archive.fit = wle::fit(ds.values, cfg);
    } catch (const wle::BandwidthSearchError& e) {
        json diag;
        diag["error"] = "numerical";
        diag["command"] = "fit";
        diag["message"] = e.what();
        json prof = json::array();
        for (const auto& [h, dw] : e.profile) prof.push_back({{"h", h}, {"downweighting", dw}});
        diag["profile"] = prof;
        std::cerr << diag.dump(2) << std::endl;
        return 2;
    }
    wle::save_archive(archive, out_path);
    std::cout << "wrote " << out_path << " (converged=" << archive.fit.converged
              << ", iterations=" << archive.fit.iterations
              << ", downweighting=" << fmt(archive.fit.empirical_downweighting) << ")\n";
    return 0;
}

int cmd_outliers(const std::string& model_path, const std::string& input, double alpha,
                 const std::string& reference, const std::string& out_path,
                 const std::string& qq_path, const std::string& dd_path) {
    wle::ModelArchive archive = wle::load_archive(model_path);
    const wle::Reference ref =
        (reference == "chisq") ? wle::Reference::ChiSq : wle::Reference::ScaledBeta;
    wle::OutlierReport rep = wle::detect(archive.fit, alpha, ref);
    std::ostringstream os;
    os << "index,d2,weight,flag_plain,flag_mult\n";
    for (std::size_t i = 0; i < rep.squared_distances.size(); ++i)
        os << (i + 1) << ',' << fmt(rep.squared_distances[i]) << ','
           << fmt(archive.fit.weights[static_cast<int>(i)]) << ',' << rep.flags_plain[i] << ','
           << rep.flags_multiplicity[i] << "\n";
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << " (cutoff_plain=" << fmt(rep.cutoff_plain)
              << ", cutoff_mult=" << fmt(rep.cutoff_multiplicity) << ")\n";

    if (!qq_path.empty() || !dd_path.empty()) {
        if (input.empty())
            throw CLI::ValidationError("--input", "diagnostic CSVs need the original data");
        wle::Dataset ds = wle::ingest_csv(input);
        const wle::FitResult mle = wle::fit_mle(ds.values);
        wle::Diagnostics diag = wle::diagnostics(archive.fit, mle, alpha);
        if (!qq_path.empty()) {
            std::ostringstream q;
            q << "theoretical,observed\n";
            for (const auto& [t, o] : diag.qq_pairs) q << fmt(t) << ',' << fmt(o) << "\n";
            write_file(qq_path, q.str());
            std::cout << "wrote " << qq_path << "\n";
        }
        if (!dd_path.empty()) {
            std::ostringstream d;
            d << "classical_d2,robust_d2,cutoff\n";
            for (const auto& [c, r] : diag.dd_pairs)
                d << fmt(c) << ',' << fmt(r) << ',' << fmt(diag.cutoff) << "\n";
            write_file(dd_path, d.str());
            std::cout << "wrote " << dd_path << "\n";
        }
    }
    return 0;
}

int cmd_pca(const std::string& model_path, const std::string& input, int k, double alpha,
            const std::string& out_path, const std::string& scores_path,
            const std::string& map_path) {
    wle::ModelArchive archive = wle::load_archive(model_path);
    wle::PcaModel model = wle::robust_pca(archive.fit, k);
    json j;
    j["kind"] = "wle-pca";
    j["k"] = model.k;
    j["explained_variance"] = model.explained_variance();
    j["total_variance"] = model.total_variance;
    j["center"] = wle::io::to_json(model.center);
    j["eigenvalues"] = wle::io::to_json(model.eigenvalues);
    j["loadings"] = wle::io::to_json(model.loadings);
    write_file(out_path, j.dump(2) + "\n");
    std::cout << "wrote " << out_path
              << " (explained=" << fmt(model.explained_variance()) << ")\n";

    if (!scores_path.empty() || !map_path.empty()) {
        if (input.empty())
            throw CLI::ValidationError("--input", "scores and the outlier map need the data");
        wle::Dataset ds = wle::ingest_csv(input);
        wle::Projection pr = wle::project(model, ds.values);
        if (!scores_path.empty()) {
            std::ostringstream s;
            s << "index";
            for (int j2 = 1; j2 <= model.k; ++j2) s << ",t" << j2;
            s << "\n";
            for (int i = 0; i < pr.scores.rows(); ++i) {
                s << (i + 1);
                for (int j2 = 0; j2 < model.k; ++j2) s << ',' << fmt(pr.scores(i, j2));
                s << "\n";
            }
            write_file(scores_path, s.str());
            std::cout << "wrote " << scores_path << "\n";
        }
        if (!map_path.empty()) {
            wle::OutlierMap map = wle::outlier_map(model, ds.values, alpha);
            std::ostringstream m;
            m << "index,score_distance,orthogonal_distance,sd_cutoff,od_cutoff\n";
            for (std::size_t i = 0; i < map.pairs.size(); ++i)
                m << (i + 1) << ',' << fmt(map.pairs[i].first) << ',' << fmt(map.pairs[i].second)
                  << ',' << fmt(map.sd_cutoff) << ',' << fmt(map.od_cutoff) << "\n";
            write_file(map_path, m.str());
            std::cout << "wrote " << map_path << "\n";
        }
    }
    return 0;
}

int cmd_da(const std::string& input, const std::string& label_col, const std::string& kind_name,
           const FitFlags& flags, bool cv, const std::string& center_name,
           const std::string& out_path, const std::string& confusion_path) {
    wle::Dataset ds = wle::ingest_csv(input, {',', true, label_col});
    const wle::DaKind kind = wle::parse_da_kind(kind_name);
    const wle::CenterMode center =
        (center_name == "wle") ? wle::CenterMode::GroupWle : wle::CenterMode::SpatialMedian;
    const wle::FitConfig cfg = flags.config();
    wle::DaModel model = wle::fit_da(ds.values, ds.labels, kind, cfg, center);
    const double all_rate = wle::misclassification(model, ds.values, ds.labels);
    json j;
    j["kind"] = "wle-da";
    j["rule"] = kind_name;
    j["labels"] = model.labels;
    j["priors"] = model.priors;
    j["misclassification_all"] = all_rate;
    if (cv) j["misclassification_cv"] = wle::loo_cv(ds.values, ds.labels, kind, cfg, center);
    write_file(out_path, j.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (all-data rate=" << fmt(all_rate) << ")\n";

    if (!confusion_path.empty()) {
        const int k = static_cast<int>(model.labels.size());
        std::vector<std::vector<int>> counts(k, std::vector<int>(k, 0));
        for (int i = 0; i < ds.values.rows(); ++i) {
            const int pred = wle::classify_index(model, ds.values.row(i).transpose());
            const auto it = std::find(model.labels.begin(), model.labels.end(), ds.labels[i]);
            counts[it - model.labels.begin()][pred]++;
        }
        std::ostringstream c;
        c << "truth";
        for (const auto& l : model.labels) c << ",pred_" << l;
        c << "\n";
        for (int a = 0; a < k; ++a) {
            c << model.labels[a];
            for (int b = 0; b < k; ++b) c << ',' << counts[a][b];
            c << "\n";
        }
        write_file(confusion_path, c.str());
        std::cout << "wrote " << confusion_path << "\n";
    }
    return 0;
}

int cmd_simulate(const std::string& grid_path, int reps, std::uint64_t seed,
                 const std::string& out_path) {
    std::ifstream in(grid_path);
    if (!in) throw std::runtime_error("cannot read '" + grid_path + "'");
    json jg;
    in >> jg;
    std::vector<wle::Scenario> grid;
    for (const auto& cell : jg.at("scenarios")) {
        wle::Scenario sc;
        sc.n = cell.at("n").get<int>();
        sc.p = cell.at("p").get<int>();
        sc.epsilon = cell.value("epsilon", 0.0);
        sc.k = cell.value("k", 0.0);
        sc.delta = cell.value("delta", 0.01);
        if (cell.contains("direction"))
            sc.direction = cell.at("direction").get<std::vector<int>>();
        grid.push_back(sc);
    }
    const auto cells = wle::run_study(grid, reps, wle::study_estimators(), seed);
    std::ostringstream os;
    os << "n,p,epsilon,k,estimator,location_error,log_mean_trace,log10_condition,"
          "max_diag_dev,max_offdiag,elapsed_seconds,failures\n";
    for (const auto& c : cells)
        os << c.scenario.n << ',' << c.scenario.p << ',' << fmt(c.scenario.epsilon) << ','
           << fmt(c.scenario.k) << ',' << c.estimator << ',' << fmt(c.mean.location_error) << ','
           << fmt(c.mean.log_mean_trace) << ',' << fmt(c.mean.log10_condition) << ','
           << fmt(c.mean.max_diag_dev) << ',' << fmt(c.mean.max_offdiag) << ','
           << fmt(c.mean.elapsed_seconds) << ',' << c.failures << "\n";
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << " (" << cells.size() << " cells)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("WLE_THREADS"))
        Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    CLI::App app{"Weighted likelihood estimation of multivariate location and scatter"};
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit the robust location/scatter model");
    std::string fit_input, fit_out = "model.json";
    FitFlags fit_flags;
    fit_cmd->add_option("--input", fit_input, "input CSV")->required();
    fit_flags.attach(fit_cmd);
    fit_cmd->add_option("--out", fit_out, "model JSON output path");

    // outliers
    auto* out_cmd = app.add_subcommand("outliers", "outlier report from a fitted model");
    std::string out_model, out_input, out_report = "outliers.csv", out_qq, out_dd;
    double out_alpha = 0.025;
    std::string out_ref = "beta";
    bool out_mult = false;
    out_cmd->add_option("--model", out_model, "fitted model JSON")->required();
    out_cmd->add_option("--input", out_input, "original data CSV (for qq/dd diagnostics)");
    out_cmd->add_option("--alpha", out_alpha, "test level");
    out_cmd->add_option("--reference", out_ref, "beta|chisq");
    out_cmd->add_flag("--multiplicity", out_mult, "accepted for compatibility; both cutoffs always emitted");
    out_cmd->add_option("--out", out_report, "report CSV path");
    out_cmd->add_option("--qq", out_qq, "QQ diagnostic CSV path");
    out_cmd->add_option("--dd", out_dd, "distance-distance diagnostic CSV path");

    // pca
    auto* pca_cmd = app.add_subcommand("pca", "principal components of the fitted scatter");
    std::string pca_model, pca_input, pca_out = "pca.json", pca_scores, pca_map;
    int pca_k = 2;
    double pca_alpha = 0.025;
    pca_cmd->add_option("--model", pca_model, "fitted model JSON")->required();
    pca_cmd->add_option("--input", pca_input, "data CSV (for scores and the outlier map)");
    pca_cmd->add_option("--k", pca_k, "number of components");
    pca_cmd->add_option("--alpha", pca_alpha, "outlier-map level");
    pca_cmd->add_option("--out", pca_out, "PCA JSON output path");
    pca_cmd->add_option("--scores", pca_scores, "scores CSV path");
    pca_cmd->add_option("--outliermap", pca_map, "outlier-map CSV path");

    // da
    auto* da_cmd = app.add_subcommand("da", "discriminant analysis");
    std::string da_input, da_label, da_kind = "lda-b", da_center = "l1";
    std::string da_out = "rates.json", da_confusion;
    bool da_cv = false;
    FitFlags da_flags;
    da_cmd->add_option("--input", da_input, "input CSV")->required();
    da_cmd->add_option("--label-col", da_label, "label column name")->required();
    da_cmd->add_option("--kind", da_kind, "lda-a|lda-b|qda");
    da_cmd->add_option("--center", da_center, "l1|wle (lda-b centering)");
    da_cmd->add_flag("--cv", da_cv, "also compute leave-one-out cross validation");
    da_flags.attach(da_cmd);
    da_cmd->add_option("--out", da_out, "rates JSON path");
    da_cmd->add_option("--confusion", da_confusion, "confusion matrix CSV path");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study over a scenario grid");
    std::string sim_grid, sim_out = "results.csv";
    int sim_reps = 100;
    std::uint64_t sim_seed = 1;
    sim_cmd->add_option("--grid", sim_grid, "grid JSON ({\"scenarios\": [...]})")->required();
    sim_cmd->add_option("--reps", sim_reps, "replicates per cell");
    sim_cmd->add_option("--seed", sim_seed, "master seed");
    sim_cmd->add_option("--out", sim_out, "results CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_input, fit_flags, fit_out);
        if (*out_cmd)
            return cmd_outliers(out_model, out_input, out_alpha, out_ref, out_report, out_qq, out_dd);
        if (*pca_cmd)
            return cmd_pca(pca_model, pca_input, pca_k, pca_alpha, pca_out, pca_scores, pca_map);
        if (*da_cmd)
            return cmd_da(da_input, da_label, da_kind, da_flags, da_cv, da_center, da_out,
                          da_confusion);
        if (*sim_cmd) return cmd_simulate(sim_grid, sim_reps, sim_seed, sim_out);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << std::endl;
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        return numerical_failure(argv[1] ? argv[1] : "?", e);
    }
    return 1;
}
