#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wle/estimator.hpp"

namespace wle {

enum class DaKind { LdaWleA, LdaWleB, Qda };

inline DaKind parse_da_kind(const std::string& name) {
    if (name == "lda-a") return DaKind::LdaWleA;
    if (name == "lda-b") return DaKind::LdaWleB;
    if (name == "qda") return DaKind::Qda;
    throw std::invalid_argument("da: unknown kind '" + name + "'");
}

enum class CenterMode { SpatialMedian, GroupWle };

struct DaModel {
    DaKind kind = DaKind::LdaWleB;
    std::vector<std::string> labels;
    std::vector<double> priors;
    std::vector<VectorXd> means;
    std::vector<MatrixXd> scatters;  // one entry for LDA (pooled), one per group for QDA
    std::vector<double> group_weight_sums;   // omega_j, for diagnostics
    std::vector<double> group_gammas;        // gamma_j
};

namespace detail {

struct Groups {
    std::vector<std::string> labels;
    std::vector<std::vector<int>> rows;
};

inline Groups split_groups(const std::vector<std::string>& labels) {
    Groups g;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
        auto it = std::find(g.labels.begin(), g.labels.end(), labels[i]);
        if (it == g.labels.end()) {
            g.labels.push_back(labels[i]);
            g.rows.emplace_back();
            it = g.labels.end() - 1;
        }
        g.rows[it - g.labels.begin()].push_back(i);
    }
    return g;
}

inline MatrixXd take_rows(const MatrixXd& data, const std::vector<int>& rows) {
    MatrixXd out(rows.size(), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = data.row(rows[i]);
    return out;
}

}  // namespace detail

inline DaModel fit_da(const MatrixXd& data, const std::vector<std::string>& labels, DaKind kind,
                      const FitConfig& config, CenterMode center = CenterMode::SpatialMedian) {
    if (static_cast<int>(labels.size()) != data.rows())
        throw std::invalid_argument("da: labels do not align with rows");
    const detail::Groups groups = detail::split_groups(labels);
    const int k = static_cast<int>(groups.labels.size());
    if (k < 2) throw std::invalid_argument("da: need at least two groups");
    const int p = static_cast<int>(data.cols());
    DaModel model;
    model.kind = kind;
    model.labels = groups.labels;
    const double n_total = static_cast<double>(data.rows());
    for (int j = 0; j < k; ++j)
        model.priors.push_back(groups.rows[j].size() / n_total);

    if (kind == DaKind::LdaWleA || kind == DaKind::Qda) {
        MatrixXd pooled = MatrixXd::Zero(p, p);
        double pool_denom = 0.0;
        for (int j = 0; j < k; ++j) {
            if (static_cast<int>(groups.rows[j].size()) <= p)
                throw std::invalid_argument("da: group '" + groups.labels[j] + "' too small");
            const MatrixXd sub = detail::take_rows(data, groups.rows[j]);
            const FitResult f = fit(sub, config);
            model.means.push_back(f.location);
            model.group_weight_sums.push_back(f.weights.sum());
            model.group_gammas.push_back(f.gamma_factor);
            if (kind == DaKind::Qda) {
                model.scatters.push_back(f.scatter);
            } else {
                const double wj = f.gamma_factor * f.weights.sum();
                pooled += wj * f.scatter;
                pool_denom += wj;
            }
        }
        if (kind == DaKind::LdaWleA) model.scatters.push_back(pooled / pool_denom);
        return model;
    }

    // WLEB: robustly center each group, fit one WLE on the pooled centered
    // data, and shift the centers by the common location.
    std::vector<VectorXd> centers;
    for (int j = 0; j < k; ++j) {
        const MatrixXd sub = detail::take_rows(data, groups.rows[j]);
        if (center == CenterMode::SpatialMedian) {
            centers.push_back(spatial_median(sub));
        } else {
            centers.push_back(fit(sub, config).location);
        }
    }
    MatrixXd pooled(data.rows(), p);
    int row = 0;
    for (int j = 0; j < k; ++j)
        for (int i : groups.rows[j]) pooled.row(row++) = data.row(i) - centers[j].transpose();
    const FitResult f = fit(pooled, config);
    model.scatters.push_back(f.scatter);
    model.group_weight_sums.push_back(f.weights.sum());
    model.group_gammas.push_back(f.gamma_factor);
    for (int j = 0; j < k; ++j) model.means.push_back(centers[j] + f.location);
    return model;
}

// Score: log pi_j - d^2(y, mu_j, Sigma_j)/2, pooled Sigma for the LDA kinds.
inline int classify_index(const DaModel& model, const VectorXd& y) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(model.labels.size()); ++j) {
        const MatrixXd& s = (model.kind == DaKind::Qda) ? model.scatters[j] : model.scatters[0];
        const VectorXd d = y - model.means[j];
        Eigen::LLT<MatrixXd> llt(s);
        if (llt.info() != Eigen::Success) throw DegenerateFitError("da: singular scatter");
        const double d2 = llt.matrixL().solve(d).squaredNorm();
        const double score = std::log(model.priors[j]) - 0.5 * d2;
        if (score > best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

inline std::string classify(const DaModel& model, const VectorXd& y) {
    return model.labels[classify_index(model, y)];
}

inline double misclassification(const DaModel& model, const MatrixXd& data,
                                const std::vector<std::string>& labels) {
    if (static_cast<int>(labels.size()) != data.rows())
        throw std::invalid_argument("da: labels do not align with rows");
    int errors = 0;
    for (int i = 0; i < data.rows(); ++i)
        if (classify(model, data.row(i).transpose()) != labels[i]) ++errors;
    return static_cast<double>(errors) / data.rows();
}

inline double loo_cv(const MatrixXd& data, const std::vector<std::string>& labels, DaKind kind,
                     const FitConfig& config, CenterMode center = CenterMode::SpatialMedian) {
    const int n = static_cast<int>(data.rows());
    int errors = 0;
    for (int hold = 0; hold < n; ++hold) {
        MatrixXd rest(n - 1, data.cols());
        std::vector<std::string> rest_labels;
        rest_labels.reserve(n - 1);
        int row = 0;
        for (int i = 0; i < n; ++i) {
            if (i == hold) continue;
            rest.row(row++) = data.row(i);
            rest_labels.push_back(labels[i]);
        }
        DaModel model;
        try {
            model = fit_da(rest, rest_labels, kind, config, center);
        } catch (const std::exception& e) {
            throw std::runtime_error("da: leave-one-out split " + std::to_string(hold) +
                                     " failed: " + e.what());
        }
        if (classify(model, data.row(hold).transpose()) != labels[hold]) ++errors;
    }
    return static_cast<double>(errors) / n;
}

}  // namespace wle
