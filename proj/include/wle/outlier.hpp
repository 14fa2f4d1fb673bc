#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "wle/estimator.hpp"

namespace wle {

enum class Reference { ScaledBeta, ChiSq };

// Quantile of the limiting law of squared robust distances,
// ((n-1)^2/n) * Beta(p/2, (n-p-1)/2). The second shape parameter follows the
// classical unbiased-estimator derivation; pass appendix_shape = false for the
// (n-p)/2 variant.
inline double scaled_beta_quantile(int n, int p, double level, bool appendix_shape = true) {
    if (n <= p + 1) throw std::invalid_argument("scaled beta: need n > p+1");
    if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("scaled beta: invalid level");
    const double b = appendix_shape ? 0.5 * (n - p - 1) : 0.5 * (n - p);
    boost::math::beta_distribution<double> dist(0.5 * p, b);
    const double scale = static_cast<double>(n - 1) * (n - 1) / n;
    return scale * boost::math::quantile(dist, level);
}

// Per-test level (1-alpha)^(1/n) whose simultaneous use over n tests gives
// familywise level alpha.
inline double multiplicity_level(double alpha, int n) {
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("multiplicity: invalid alpha");
    if (n < 1) throw std::invalid_argument("multiplicity: n must be >= 1");
    return std::pow(1.0 - alpha, 1.0 / n);
}

struct OutlierReport {
    std::vector<double> squared_distances;
    double cutoff_plain = 0.0;
    double cutoff_multiplicity = 0.0;
    std::vector<bool> flags_plain;
    std::vector<bool> flags_multiplicity;
    Reference reference = Reference::ScaledBeta;
    double alpha = 0.0;
};

inline OutlierReport detect(const FitResult& fit, double alpha,
                            Reference reference = Reference::ScaledBeta) {
    const int n = static_cast<int>(fit.squared_distances.size());
    const int p = static_cast<int>(fit.location.size());
    OutlierReport rep;
    rep.reference = reference;
    rep.alpha = alpha;
    const double level_plain = 1.0 - alpha;
    const double level_mult = multiplicity_level(alpha, n);
    if (reference == Reference::ScaledBeta) {
        rep.cutoff_plain = scaled_beta_quantile(n, p, level_plain);
        rep.cutoff_multiplicity = scaled_beta_quantile(n, p, level_mult);
    } else {
        rep.cutoff_plain = chisq_quantile(level_plain, p);
        rep.cutoff_multiplicity = chisq_quantile(level_mult, p);
    }
    rep.squared_distances.assign(fit.squared_distances.data(),
                                 fit.squared_distances.data() + n);
    rep.flags_plain.resize(n);
    rep.flags_multiplicity.resize(n);
    for (int i = 0; i < n; ++i) {
        rep.flags_plain[i] = rep.squared_distances[i] > rep.cutoff_plain;
        rep.flags_multiplicity[i] = rep.squared_distances[i] > rep.cutoff_multiplicity;
    }
    return rep;
}

struct Diagnostics {
    std::vector<std::pair<double, double>> qq_pairs;  // (theoretical, observed)
    std::vector<std::pair<double, double>> dd_pairs;  // (classical d^2, robust d^2)
    double cutoff = 0.0;                              // same scaled-beta cutoff on both axes
};

inline Diagnostics diagnostics(const FitResult& robust_fit, const FitResult& mle_fit,
                               double alpha = 0.025) {
    const int n = static_cast<int>(robust_fit.squared_distances.size());
    if (mle_fit.squared_distances.size() != n)
        throw std::invalid_argument("diagnostics: fits disagree on n");
    const int p = static_cast<int>(robust_fit.location.size());
    Diagnostics d;
    std::vector<double> sorted(robust_fit.squared_distances.data(),
                               robust_fit.squared_distances.data() + n);
    std::sort(sorted.begin(), sorted.end());
    boost::math::beta_distribution<double> dist(0.5 * p, 0.5 * (n - p - 1));
    const double scale = static_cast<double>(n - 1) * (n - 1) / n;
    for (int i = 0; i < n; ++i) {
        const double pos = (i + 0.5) / n;
        d.qq_pairs.emplace_back(scale * boost::math::quantile(dist, pos), sorted[i]);
    }
    for (int i = 0; i < n; ++i)
        d.dd_pairs.emplace_back(mle_fit.squared_distances[i], robust_fit.squared_distances[i]);
    d.cutoff = scaled_beta_quantile(n, p, 1.0 - alpha);
    return d;
}

}  // namespace wle
