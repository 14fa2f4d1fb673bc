#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wle/estimator.hpp"

namespace wle {

// Contaminated-normal scenario: (1-eps) N_p(0, I) + eps N_p(k a, delta I),
// with a = all-ones for p <= 10 and first-five-ones for p > 10 unless
// overridden.
struct Scenario {
    int n = 100;
    int p = 10;
    double epsilon = 0.0;
    double k = 0.0;
    std::vector<int> direction;  // empty = dimension-based default
    double delta = 0.01;
    std::uint64_t seed = 0;

    std::vector<int> effective_direction() const {
        if (!direction.empty()) return direction;
        std::vector<int> a(p, 0);
        const int m = (p <= 10) ? p : 5;
        for (int j = 0; j < m; ++j) a[j] = 1;
        return a;
    }
};

struct MetricsRow {
    double location_error = 0.0;     // ||mu_hat||
    double log_mean_trace = 0.0;     // log(trace(Sigma_u)/p)
    double log10_condition = 0.0;    // log10 cond(Sigma_u)
    double max_diag_dev = 0.0;       // max_j |Sigma_jj - 1|
    double max_offdiag = 0.0;        // max_{j!=h} |Sigma_jh|
    double elapsed_seconds = 0.0;
};

namespace rngdetail {

// splitmix64: stable stream derivation independent of the standard library's
// distribution implementations.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0x100000001b3ULL * a;
    splitmix64(s);
    s ^= 0x100000001b3ULL * b;
    return splitmix64(s);
}

class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : state_(seed ? seed : 0x6a09e667f3bcc909ULL) {}

    double uniform() {
        return (splitmix64(state_) >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rngdetail

inline MatrixXd generate(const Scenario& sc) {
    if (sc.n < 1 || sc.p < 1) throw std::invalid_argument("simulate: invalid scenario size");
    if (sc.epsilon < 0.0 || sc.epsilon >= 0.5)
        throw std::invalid_argument("simulate: epsilon must lie in [0, 0.5)");
    rngdetail::NormalSampler rng(sc.seed);
    const std::vector<int> a = sc.effective_direction();
    const double sd_contam = std::sqrt(sc.delta);
    MatrixXd x(sc.n, sc.p);
    for (int i = 0; i < sc.n; ++i) {
        const bool contaminated = sc.epsilon > 0.0 && rng.uniform() < sc.epsilon;
        for (int j = 0; j < sc.p; ++j) {
            const double z = rng.normal();
            if (contaminated && a[j] != 0)
                x(i, j) = sc.k * a[j] + sd_contam * z;
            else
                x(i, j) = z;
        }
    }
    return x;
}

inline MetricsRow measure(const FitResult& fit, double elapsed_seconds) {
    MetricsRow row;
    const int p = static_cast<int>(fit.location.size());
    row.location_error = fit.location.norm();
    row.log_mean_trace = std::log(fit.scatter.trace() / p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(fit.scatter);
    row.log10_condition = std::log10(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff());
    row.max_diag_dev = (fit.scatter.diagonal().array() - 1.0).abs().maxCoeff();
    double off = 0.0;
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
            if (a != b) off = std::max(off, std::abs(fit.scatter(a, b)));
    row.max_offdiag = off;
    row.elapsed_seconds = elapsed_seconds;
    return row;
}

struct NamedEstimator {
    std::string name;
    std::function<FitResult(const MatrixXd&)> fit;
};

inline FitResult fit_mle(const MatrixXd& data) {
    FitResult f;
    const WeightedMoments m = weighted_location_scatter(data, VectorXd::Ones(data.rows()));
    f.location = m.location;
    f.scatter = m.scatter;
    f.weights = VectorXd::Ones(data.rows());
    f.squared_distances = mahalanobis_sq(data, f.location, f.scatter);
    f.converged = true;
    f.gamma_factor = m.gamma;
    return f;
}

// The four kernel schemes with the Hellinger RAF, plus the MLE baseline.
// Each scheme runs at its model-reference default bandwidth; the results CSV
// records the configuration used.
inline std::vector<NamedEstimator> study_estimators() {
    auto make = [](Kernel k) {
        return [k](const MatrixXd& data) {
            FitConfig cfg;
            cfg.scheme.variant = k;
            return fit(data, cfg);
        };
    };
    return {
        {"WLEa", make(Kernel::ReflectedNormal)},
        {"WLEb", make(Kernel::LogBackTransform)},
        {"WLEc", make(Kernel::LogChiSq)},
        {"WLEd", make(Kernel::GammaKernel)},
        {"MLE", fit_mle},
    };
}

struct StudyCell {
    Scenario scenario;
    std::string estimator;
    MetricsRow mean;  // averaged over successful replicates
    int replicates = 0;
    int failures = 0;
};

inline std::vector<StudyCell> run_study(const std::vector<Scenario>& grid, int replicates,
                                        const std::vector<NamedEstimator>& estimators,
                                        std::uint64_t seed) {
    if (replicates < 1) throw std::invalid_argument("simulate: replicates must be >= 1");
    std::vector<StudyCell> cells;
    for (std::size_t s = 0; s < grid.size(); ++s) {
        std::vector<StudyCell> row(estimators.size());
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            row[e].scenario = grid[s];
            row[e].estimator = estimators[e].name;
        }
        for (int rep = 0; rep < replicates; ++rep) {
            Scenario sc = grid[s];
            sc.seed = rngdetail::derive_seed(seed, s, static_cast<std::uint64_t>(rep));
            const MatrixXd data = generate(sc);
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const FitResult f = estimators[e].fit(data);
                    const double elapsed =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    const MetricsRow m = measure(f, elapsed);
                    StudyCell& cell = row[e];
                    cell.mean.location_error += m.location_error;
                    cell.mean.log_mean_trace += m.log_mean_trace;
                    cell.mean.log10_condition += m.log10_condition;
                    cell.mean.max_diag_dev += m.max_diag_dev;
                    cell.mean.max_offdiag += m.max_offdiag;
                    cell.mean.elapsed_seconds += m.elapsed_seconds;
                    ++cell.replicates;
                } catch (const std::exception&) {
                    ++row[e].failures;
                }
            }
        }
        for (auto& cell : row) {
            if (cell.replicates > 0) {
                cell.mean.location_error /= cell.replicates;
                cell.mean.log_mean_trace /= cell.replicates;
                cell.mean.log10_condition /= cell.replicates;
                cell.mean.max_diag_dev /= cell.replicates;
                cell.mean.max_offdiag /= cell.replicates;
                cell.mean.elapsed_seconds /= cell.replicates;
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

}  // namespace wle
