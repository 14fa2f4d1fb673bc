#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wle/kde.hpp"
#include "wle/raf.hpp"

namespace wle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct InitSpec {
    enum class Kind { Deterministic6, Subsampling } kind = Kind::Deterministic6;
    int count = 0;           // subsampling only
    std::uint64_t seed = 0;  // subsampling only
};

struct BandwidthMode {
    enum class Kind { Fixed, ScaledDefault, TargetDownweighting } kind = Kind::Fixed;
    // Fixed: h (<= 0 means scheme default); ScaledDefault: multiplier of the
    // model-reference default; Target: downweighting level in (0, 0.5).
    double value = 0.0;
};

struct FitConfig {
    KernelScheme scheme{Kernel::LogBackTransform, 0.0};
    RafSpec raf = RafSpec::hellinger();
    int max_iterations = 500;
    double convergence_tolerance = 1e-6;
    InitSpec init;
    BandwidthMode bandwidth_mode;
    bool model_smoothing = true;

    void validate() const {
        if (convergence_tolerance <= 0.0) throw std::invalid_argument("fit: tolerance must be > 0");
        if (max_iterations < 1) throw std::invalid_argument("fit: max_iterations must be >= 1");
        if (!raf.admissible()) throw std::invalid_argument("fit: inadmissible RAF");
        if (bandwidth_mode.kind == BandwidthMode::Kind::TargetDownweighting &&
            (bandwidth_mode.value <= 0.0 || bandwidth_mode.value >= 0.5))
            throw std::invalid_argument("fit: target downweighting must lie in (0, 0.5)");
        if (bandwidth_mode.kind == BandwidthMode::Kind::ScaledDefault && bandwidth_mode.value <= 0.0)
            throw std::invalid_argument("fit: bandwidth scale must be > 0");
    }
};

struct FitResult {
    VectorXd location;
    MatrixXd scatter;  // unbiased scatter Sigma_u
    VectorXd weights;
    VectorXd squared_distances;
    int iterations = 0;
    bool converged = false;
    double empirical_downweighting = 0.0;
    double gamma_factor = 0.0;
    double bandwidth = 0.0;
    double root_criterion = 0.0;  // Pr_model[delta < -0.95] used by root selection
};

struct NonConvergenceError : std::runtime_error {
    FitResult best;
    explicit NonConvergenceError(FitResult b)
        : std::runtime_error("fit: no start converged"), best(std::move(b)) {}
};

struct DegenerateFitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BandwidthSearchError : std::runtime_error {
    std::vector<std::pair<double, double>> profile;  // (h, downweighting) pairs visited
    BandwidthSearchError(const std::string& msg, std::vector<std::pair<double, double>> prof)
        : std::runtime_error(msg), profile(std::move(prof)) {}
};

// Squared Mahalanobis distances through a Cholesky factorization.
inline VectorXd mahalanobis_sq(const MatrixXd& data, const VectorXd& location,
                               const MatrixXd& scatter) {
    Eigen::LLT<MatrixXd> llt(scatter);
    if (llt.info() != Eigen::Success)
        throw DegenerateFitError("mahalanobis: scatter is not positive-definite");
    MatrixXd centered = data.rowwise() - location.transpose();
    MatrixXd z = llt.matrixL().solve(centered.transpose());
    return z.colwise().squaredNorm().transpose();
}

struct WeightedMoments {
    VectorXd location;
    MatrixXd scatter;
    double gamma = 0.0;
};

// Weighted mean and unbiased weighted scatter:
//   Sigma_u = sum_i w_i (y_i - mu)(y_i - mu)^T / (gamma * sum_i w_i),
//   gamma   = 1 - sum w_i^2 / (sum w_i)^2.
// With unit weights this is the sample mean and the (n-1)-denominator covariance.
inline WeightedMoments weighted_location_scatter(const MatrixXd& data, const VectorXd& w) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n <= p) throw std::invalid_argument("weighted moments: need n > p");
    if (w.size() != n) throw std::invalid_argument("weighted moments: weight length mismatch");
    const double sw = w.sum();
    if (sw <= 0.0) throw DegenerateFitError("weighted moments: nonpositive weight sum");
    const double sw2 = w.squaredNorm();
    const double ess = sw * sw / sw2;
    if (ess <= static_cast<double>(p))
        throw DegenerateFitError("weighted moments: effective sample size <= p");
    WeightedMoments m;
    m.location = (data.transpose() * w) / sw;
    MatrixXd centered = data.rowwise() - m.location.transpose();
    m.gamma = 1.0 - sw2 / (sw * sw);
    m.scatter = (centered.transpose() * w.asDiagonal() * centered) / (m.gamma * sw);
    m.scatter = 0.5 * (m.scatter + m.scatter.transpose());
    return m;
}

namespace detail {

inline MatrixXd spd_fix(const MatrixXd& s) {
    MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    VectorXd ev = es.eigenvalues();
    const double floor = 1e-8 * std::max(ev.maxCoeff(), 1e-12);
    for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

inline VectorXd column_medians(const MatrixXd& x) {
    VectorXd med(x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
        med[j] = median_of(std::move(col));
    }
    return med;
}

inline VectorXd column_mads(const MatrixXd& x, const VectorXd& med) {
    VectorXd mad(x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        std::vector<double> dev(x.rows());
        for (int i = 0; i < x.rows(); ++i) dev[i] = std::abs(x(i, j) - med[j]);
        mad[j] = 1.4826 * median_of(std::move(dev));
    }
    return mad;
}

inline MatrixXd correlation_of(const MatrixXd& y) {
    MatrixXd centered = y.rowwise() - y.colwise().mean();
    MatrixXd cov = centered.transpose() * centered / static_cast<double>(y.rows() - 1);
    VectorXd sd = cov.diagonal().cwiseSqrt();
    MatrixXd corr = cov;
    for (int a = 0; a < cov.rows(); ++a)
        for (int b = 0; b < cov.cols(); ++b) corr(a, b) = cov(a, b) / (sd[a] * sd[b]);
    return corr;
}

inline MatrixXd column_ranks(const MatrixXd& x) {
    MatrixXd r(x.rows(), x.cols());
    std::vector<int> idx(x.rows());
    for (int j = 0; j < x.cols(); ++j) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return x(a, j) < x(b, j); });
        int i = 0;
        while (i < x.rows()) {
            int e = i;
            while (e + 1 < x.rows() && x(idx[e + 1], j) == x(idx[i], j)) ++e;
            const double avg = 0.5 * (i + e) + 1.0;  // average rank, 1-based
            for (int t = i; t <= e; ++t) r(idx[t], j) = avg;
            i = e + 1;
        }
    }
    return r;
}

}  // namespace detail

// Weiszfeld iteration for the spatial (L1) median with data-point anchoring.
inline VectorXd spatial_median(const MatrixXd& data, double tol = 1e-10, int max_iter = 500) {
    if (data.rows() < 1) throw std::invalid_argument("spatial median: empty data");
    VectorXd m = detail::column_medians(data);
    for (int it = 0; it < max_iter; ++it) {
        VectorXd num = VectorXd::Zero(data.cols());
        double denom = 0.0;
        for (int i = 0; i < data.rows(); ++i) {
            double d = (data.row(i).transpose() - m).norm();
            d = std::max(d, 1e-12);
            num += data.row(i).transpose() / d;
            denom += 1.0 / d;
        }
        VectorXd next = num / denom;
        if ((next - m).norm() < tol) return next;
        m = next;
    }
    return m;
}

// The six deterministic starting pairs. Starts relying on coordinatewise MADs
// are skipped (with a note) when a coordinate has zero MAD.
inline std::vector<std::pair<VectorXd, MatrixXd>> init_deterministic(
    const MatrixXd& data, std::vector<std::string>* warnings = nullptr) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n <= p) throw std::invalid_argument("init: need n > p");
    std::vector<std::pair<VectorXd, MatrixXd>> starts;
    const VectorXd med = detail::column_medians(data);
    const VectorXd mad = detail::column_mads(data, med);
    const bool mad_ok = (mad.array() > 0.0).all();
    if (!mad_ok) {
        if (warnings) warnings->push_back("init: zero MAD coordinate; MAD-based starts skipped");
    } else {
        MatrixXd z = (data.rowwise() - med.transpose()).array().rowwise() /
                     mad.transpose().array();
        MatrixXd dscale = mad.asDiagonal();

        // 1. coordinatewise median + diagonal squared MADs
        starts.emplace_back(med, detail::spd_fix(MatrixXd(mad.array().square().matrix().asDiagonal())));

        // 2. tanh-transform correlation, rescaled by MADs
        MatrixXd y = z.array().tanh().matrix();
        starts.emplace_back(med, detail::spd_fix(dscale * detail::correlation_of(y) * dscale));

        // 3. Spearman rank correlation, rescaled by MADs
        MatrixXd ranks = detail::column_ranks(data);
        starts.emplace_back(med, detail::spd_fix(dscale * detail::correlation_of(ranks) * dscale));

        // 4. normal-scores correlation, rescaled by MADs
        boost::math::normal std_normal;
        MatrixXd ns(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                ns(i, j) = boost::math::quantile(std_normal,
                                                 (ranks(i, j) - 1.0 / 3.0) / (n + 1.0 / 3.0));
        starts.emplace_back(med, detail::spd_fix(dscale * detail::correlation_of(ns) * dscale));

        // 5. spatial median + isotropic average squared MAD
        starts.emplace_back(spatial_median(data),
                            detail::spd_fix(MatrixXd::Identity(p, p) * mad.array().square().mean()));

        // 6. covariance of the half of the points with smallest standardized norm
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        VectorXd norms = z.rowwise().squaredNorm();
        std::sort(order.begin(), order.end(), [&](int a, int b) { return norms[a] < norms[b]; });
        const int hsize = static_cast<int>((n + 1) / 2);
        MatrixXd half(hsize, p);
        for (int i = 0; i < hsize; ++i) half.row(i) = data.row(order[i]);
        VectorXd hmean = half.colwise().mean();
        MatrixXd hc = half.rowwise() - hmean.transpose();
        starts.emplace_back(hmean, detail::spd_fix(hc.transpose() * hc / std::max(1, hsize - 1)));
    }
    if (starts.empty()) throw std::invalid_argument("init: all deterministic starts degenerate");
    return starts;
}

// Random (p+1)-subset starts.
inline std::vector<std::pair<VectorXd, MatrixXd>> init_subsampling(const MatrixXd& data, int count,
                                                                   std::uint64_t seed) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n < p + 1) throw std::invalid_argument("init: need n >= p+1");
    if (count < 1) throw std::invalid_argument("init: subsample count must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::pair<VectorXd, MatrixXd>> starts;
    const int retry_cap = 100 * count;
    int attempts = 0;
    std::vector<int> idx(n);
    while (static_cast<int>(starts.size()) < count) {
        if (++attempts > retry_cap)
            throw std::runtime_error("init: subsampling retry cap exhausted");
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < p + 1; ++i) {
            std::uniform_int_distribution<int> pick(i, static_cast<int>(n) - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        MatrixXd sub(p + 1, p);
        for (int i = 0; i < p + 1; ++i) sub.row(i) = data.row(idx[i]);
        VectorXd mean = sub.colwise().mean();
        MatrixXd c = sub.rowwise() - mean.transpose();
        MatrixXd cov = c.transpose() * c / static_cast<double>(p);
        Eigen::LLT<MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) continue;  // singular subset: redraw
        starts.emplace_back(mean, cov);
    }
    return starts;
}

namespace detail {

// Concentration refinement of an initial pair: iterate the mean/covariance of
// the half-sample with smallest distances until the subset stabilizes. This
// moves every start into the basin of the majority of the data before the
// weighted iteration begins.
inline std::pair<VectorXd, MatrixXd> concentrate(const MatrixXd& data, VectorXd mu, MatrixXd s,
                                                 int steps = 20) {
    const auto n = data.rows();
    const auto p = data.cols();
    const int hsize = static_cast<int>((n + p + 1) / 2);
    std::vector<int> prev;
    for (int step = 0; step < steps; ++step) {
        VectorXd d2;
        try {
            d2 = mahalanobis_sq(data, mu, s);
        } catch (const DegenerateFitError&) {
            break;
        }
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return d2[a] < d2[b]; });
        order.resize(hsize);
        std::sort(order.begin(), order.end());
        if (order == prev) break;
        prev = order;
        MatrixXd half(hsize, p);
        for (int i = 0; i < hsize; ++i) half.row(i) = data.row(order[i]);
        mu = half.colwise().mean();
        MatrixXd c = half.rowwise() - mu.transpose();
        s = spd_fix(c.transpose() * c / std::max(1, hsize - 1));
    }
    return {std::move(mu), std::move(s)};
}

// Model-side probability of the low-residual region: mass of the reference
// density over the grid points where the Pearson residual of the fitted
// distance sample drops below -0.95.
inline double fitted_prob_low_residual(const SmoothedModel& model,
                                       const std::vector<double>& d2) {
    const KernelScheme& scheme = model.scheme();
    const std::vector<double>& grid = model.grid();
    KernelScheme eval_scheme = scheme;
    // On the log-scale grid both log variants compare normal kdes of log d^2;
    // on the raw grid the scheme's own kernel is used directly.
    if (scheme.variant == Kernel::LogBackTransform) eval_scheme.variant = Kernel::LogChiSq;
    const std::vector<double> mhat = kernel_density(eval_scheme, d2, grid);
    const int p = model.p();
    double mass = 0.0;
    double prev_x = grid.front(), prev_f = 0.0;
    bool have_prev = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double mstar = std::max(model.values()[i], SmoothedModel::kFloor);
        const double delta = mhat[i] / mstar - 1.0;
        const double ref = log_scale(scheme.variant) ? log_chisq_pdf(grid[i], p)
                                                     : chisq_pdf(grid[i], p);
        const double f = (delta < -0.95) ? ref : 0.0;
        if (have_prev) mass += 0.5 * (f + prev_f) * (grid[i] - prev_x);
        prev_x = grid[i];
        prev_f = f;
        have_prev = true;
    }
    return mass;
}

}  // namespace detail

// Lowest fitted probability Pr[delta < -0.95] wins; candidates within a small
// tolerance of the minimum are treated as tied and resolved by the smaller
// det(Sigma_u).
inline FitResult select_root(std::vector<FitResult> candidates) {
    if (candidates.empty()) throw std::invalid_argument("select_root: no candidates");
    constexpr double tie_tolerance = 0.01;
    double cmin = candidates.front().root_criterion;
    for (const auto& c : candidates) cmin = std::min(cmin, c.root_criterion);
    int best = -1;
    double best_det = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].root_criterion > cmin + tie_tolerance) continue;
        const double det = candidates[i].scatter.determinant();
        if (best < 0 || det < best_det) {
            best = static_cast<int>(i);
            best_det = det;
        }
    }
    return candidates[best];
}

namespace detail {

struct IterationOutcome {
    FitResult result;
    bool converged = false;
};

inline IterationOutcome iterate_from(const MatrixXd& data, VectorXd mu, MatrixXd s,
                                     const SmoothedModel& model, const FitConfig& cfg) {
    const auto p = data.cols();
    IterationOutcome out;
    VectorXd w = VectorXd::Ones(data.rows());
    double gamma = 0.0;
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        VectorXd d2;
        try {
            d2 = mahalanobis_sq(data, mu, s);
        } catch (const DegenerateFitError&) {
            break;
        }
        std::vector<double> d2v(d2.data(), d2.data() + d2.size());
        for (double& v : d2v) v = std::max(v, 1e-12);
        const ResidualResult res = pearson_residuals(model, d2v);
        for (int i = 0; i < w.size(); ++i) w[i] = weight(cfg.raf, res.delta[i]);
        WeightedMoments m;
        try {
            m = weighted_location_scatter(data, w);
        } catch (const std::exception&) {
            break;
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.scatter);
        const double ev_min = es.eigenvalues().minCoeff();
        const double ev_max = es.eigenvalues().maxCoeff();
        if (ev_min <= 0.0 || ev_max / ev_min > 1e12) break;
        VectorXd mu_next = m.location;
        MatrixXd s_next = m.scatter;
        if (it >= 100) {
            // Average with the previous iterate to break the rare two-cycles
            // the plain fixed-point map falls into; the damped map has the
            // same fixed points.
            mu_next = 0.5 * (mu_next + mu);
            s_next = 0.5 * (s_next + s);
        }
        const double dmu = (mu_next - mu).norm() / (1.0 + mu.norm());
        const double ds = (s_next - s).norm() / (1.0 + s.norm());
        mu = std::move(mu_next);
        s = std::move(s_next);
        gamma = m.gamma;
        if (std::max(dmu, ds) < cfg.convergence_tolerance) {
            out.converged = true;
            ++it;
            break;
        }
    }
    out.result.location = mu;
    out.result.scatter = s;
    out.result.weights = w;
    out.result.iterations = it;
    out.result.converged = out.converged;
    out.result.gamma_factor = gamma;
    out.result.empirical_downweighting = 1.0 - w.mean();
    out.result.bandwidth = model.scheme().h;
    try {
        out.result.squared_distances = mahalanobis_sq(data, mu, s);
        std::vector<double> d2v(out.result.squared_distances.data(),
                                out.result.squared_distances.data() + data.rows());
        for (double& v : d2v) v = std::max(v, 1e-12);
        out.result.root_criterion = fitted_prob_low_residual(model, d2v);
    } catch (const DegenerateFitError&) {
        out.converged = false;
        out.result.converged = false;
    }
    (void)p;
    return out;
}

}  // namespace detail

inline FitResult fit_fixed_bandwidth(const MatrixXd& data, const FitConfig& cfg, double h) {
    cfg.validate();
    const auto n = data.rows();
    const auto p = data.cols();
    if (n <= p || p < 1) throw std::invalid_argument("fit: need n > p >= 1");
    if (!data.allFinite()) throw std::invalid_argument("fit: non-finite rows");

    KernelScheme scheme = cfg.scheme;
    scheme.h = h > 0.0 ? h : default_bandwidth(static_cast<int>(p), static_cast<int>(n), scheme.variant);
    const SmoothedModel model(static_cast<int>(p), scheme, cfg.model_smoothing);

    auto starts = (cfg.init.kind == InitSpec::Kind::Deterministic6)
                      ? init_deterministic(data)
                      : init_subsampling(data, cfg.init.count, cfg.init.seed);
    for (auto& st : starts)
        std::tie(st.first, st.second) = detail::concentrate(data, st.first, st.second);

    std::vector<FitResult> converged;
    std::optional<FitResult> best_failed;
    for (const auto& st : starts) {
        detail::IterationOutcome out = detail::iterate_from(data, st.first, st.second, model, cfg);
        if (out.converged) {
            converged.push_back(std::move(out.result));
        } else if (out.result.squared_distances.size() > 0 &&
                   (!best_failed || out.result.root_criterion < best_failed->root_criterion)) {
            best_failed = std::move(out.result);
        }
    }
    if (converged.empty()) {
        if (best_failed) throw NonConvergenceError(std::move(*best_failed));
        throw NonConvergenceError(FitResult{});
    }
    return select_root(std::move(converged));
}

// Bandwidth achieving a target empirical downweighting level, by bisection
// between bracketing points found on a geometric scan around the default.
inline double select_bandwidth(const MatrixXd& data, double target, const FitConfig& cfg,
                               double tolerance = 0.01) {
    if (target <= 0.0 || target >= 0.5)
        throw std::invalid_argument("select_bandwidth: target must lie in (0, 0.5)");
    const double h0 = default_bandwidth(static_cast<int>(data.cols()),
                                        static_cast<int>(data.rows()), cfg.scheme.variant);
    std::vector<std::pair<double, double>> profile;
    double best_h = -1.0, best_gap = std::numeric_limits<double>::infinity();
    auto downweighting = [&](double h) -> std::optional<double> {
        try {
            const FitResult f = fit_fixed_bandwidth(data, cfg, h);
            profile.emplace_back(h, f.empirical_downweighting);
            const double gap = std::abs(f.empirical_downweighting - target);
            if (gap < best_gap) {
                best_gap = gap;
                best_h = h;
            }
            return f.empirical_downweighting;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    // Geometric scan: downweighting decreases with h, so a bracket has the
    // level above target on the left and below on the right.
    double lo = -1.0, hi = -1.0;
    for (int i = -6; i <= 6; ++i) {
        const double h = h0 * std::pow(2.0, 0.5 * i);
        const auto d = downweighting(h);
        if (!d) continue;
        if (*d >= target) lo = h;
        if (*d <= target && hi < 0.0 && lo > 0.0) hi = h;
    }
    if (lo > 0.0 && hi > lo) {
        for (int iter = 0; iter < 30; ++iter) {
            const double mid = std::sqrt(lo * hi);
            const auto d = downweighting(mid);
            if (!d) break;
            if (std::abs(*d - target) <= tolerance) return mid;
            (*d > target ? lo : hi) = mid;
        }
    }
    if (best_h > 0.0 && best_gap <= tolerance) return best_h;
    throw BandwidthSearchError("select_bandwidth: no bandwidth attains the target level",
                               std::move(profile));
}

// Algorithm entry point: resolves the bandwidth mode, then runs the weighted
// fixed-point iteration from every start and selects a root.
inline FitResult fit(const MatrixXd& data, const FitConfig& cfg) {
    cfg.validate();
    if (cfg.bandwidth_mode.kind == BandwidthMode::Kind::TargetDownweighting) {
        const double h = select_bandwidth(data, cfg.bandwidth_mode.value, cfg);
        return fit_fixed_bandwidth(data, cfg, h);
    }
    if (cfg.bandwidth_mode.kind == BandwidthMode::Kind::ScaledDefault) {
        const double h0 = default_bandwidth(static_cast<int>(data.cols()),
                                            static_cast<int>(data.rows()), cfg.scheme.variant);
        return fit_fixed_bandwidth(data, cfg, cfg.bandwidth_mode.value * h0);
    }
    const double h = cfg.bandwidth_mode.value > 0.0 ? cfg.bandwidth_mode.value : cfg.scheme.h;
    return fit_fixed_bandwidth(data, cfg, h);
}

}  // namespace wle
