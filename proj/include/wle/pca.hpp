#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wle/estimator.hpp"

namespace wle {

struct PcaModel {
    VectorXd center;
    MatrixXd loadings;     // p x k, column-orthonormal
    VectorXd eigenvalues;  // k, nonincreasing
    double total_variance = 0.0;
    int k = 0;

    double explained_variance() const { return eigenvalues.sum() / total_variance; }
};

// Principal components of a fitted scatter: leading k eigenvectors with a
// deterministic sign convention (largest-magnitude entry of each column made
// positive).
inline PcaModel robust_pca(const FitResult& fit, int k) {
    const int p = static_cast<int>(fit.location.size());
    if (k < 1 || k > p) throw std::invalid_argument("pca: k out of range");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(fit.scatter);
    if (es.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");
    PcaModel model;
    model.center = fit.location;
    model.k = k;
    model.total_variance = fit.scatter.trace();
    model.loadings.resize(p, k);
    model.eigenvalues.resize(k);
    // SelfAdjointEigenSolver sorts ascending; take the top k in reverse.
    for (int j = 0; j < k; ++j) {
        model.eigenvalues[j] = es.eigenvalues()[p - 1 - j];
        VectorXd v = es.eigenvectors().col(p - 1 - j);
        int arg = 0;
        for (int i = 1; i < p; ++i)
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        if (v[arg] < 0.0) v = -v;
        model.loadings.col(j) = v;
    }
    return model;
}

struct Projection {
    MatrixXd scores;              // n x k
    VectorXd score_distance;      // within-subspace standardized distance
    VectorXd orthogonal_distance; // residual norm outside the subspace
};

inline Projection project(const PcaModel& model, const MatrixXd& data) {
    if (data.cols() != model.center.size())
        throw std::invalid_argument("pca: dimension mismatch");
    const auto n = data.rows();
    Projection pr;
    MatrixXd centered = data.rowwise() - model.center.transpose();
    pr.scores = centered * model.loadings;
    pr.score_distance.resize(n);
    pr.orthogonal_distance.resize(n);
    for (int i = 0; i < n; ++i) {
        double sd = 0.0;
        for (int j = 0; j < model.k; ++j)
            sd += pr.scores(i, j) * pr.scores(i, j) / model.eigenvalues[j];
        pr.score_distance[i] = std::sqrt(sd);
        VectorXd residual = centered.row(i).transpose() - model.loadings * pr.scores.row(i).transpose();
        pr.orthogonal_distance[i] = residual.norm();
    }
    return pr;
}

struct OutlierMap {
    std::vector<std::pair<double, double>> pairs;  // (SD_i, OD_i)
    double sd_cutoff = 0.0;
    double od_cutoff = 0.0;
};

// Score-distance cutoff from chi^2_k; orthogonal-distance cutoff from the
// Wilson-Hilferty normal approximation to OD^(2/3) with median/MAD location
// and scale.
inline OutlierMap outlier_map(const PcaModel& model, const MatrixXd& data, double alpha = 0.025) {
    Projection pr = project(model, data);
    OutlierMap map;
    const auto n = data.rows();
    map.pairs.reserve(n);
    for (int i = 0; i < n; ++i)
        map.pairs.emplace_back(pr.score_distance[i], pr.orthogonal_distance[i]);
    map.sd_cutoff = std::sqrt(chisq_quantile(1.0 - alpha, model.k));
    std::vector<double> od23(n);
    for (int i = 0; i < n; ++i) od23[i] = std::pow(pr.orthogonal_distance[i], 2.0 / 3.0);
    const double med = detail::median_of(od23);
    std::vector<double> dev(n);
    for (int i = 0; i < n; ++i) dev[i] = std::abs(od23[i] - med);
    const double mad = 1.4826 * detail::median_of(dev);
    if (mad <= 0.0) {
        map.od_cutoff = 0.0;  // all points in the span of the loadings
        return map;
    }
    boost::math::normal std_normal;
    const double z = boost::math::quantile(std_normal, 1.0 - alpha);
    map.od_cutoff = std::pow(med + mad * z, 1.5);
    return map;
}

}  // namespace wle
