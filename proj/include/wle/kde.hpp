#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/polygamma.hpp>

namespace wle {

enum class Kernel { ReflectedNormal, LogBackTransform, GammaKernel, LogChiSq };

inline bool log_scale(Kernel k) {
    return k == Kernel::LogBackTransform || k == Kernel::LogChiSq;
}

inline Kernel parse_kernel(const std::string& name) {
    if (name == "reflect") return Kernel::ReflectedNormal;
    if (name == "logback") return Kernel::LogBackTransform;
    if (name == "gamma") return Kernel::GammaKernel;
    if (name == "logchisq") return Kernel::LogChiSq;
    throw std::invalid_argument("kernel: unknown scheme '" + name + "'");
}

inline std::string kernel_name(Kernel k) {
    switch (k) {
        case Kernel::ReflectedNormal: return "reflect";
        case Kernel::LogBackTransform: return "logback";
        case Kernel::GammaKernel: return "gamma";
        case Kernel::LogChiSq: return "logchisq";
    }
    return "?";
}

struct KernelScheme {
    Kernel variant = Kernel::LogBackTransform;
    double h = 0.0;  // bandwidth on the operating scale; <= 0 means "use default"
};

inline double chisq_pdf(double x, int p) {
    if (x <= 0.0) return 0.0;
    boost::math::chi_squared dist(static_cast<double>(p));
    return boost::math::pdf(dist, x);
}

inline double chisq_quantile(double level, int p) {
    boost::math::chi_squared dist(static_cast<double>(p));
    return boost::math::quantile(dist, level);
}

// Density of log(X) for X ~ chi^2_p: exp((p x - e^x)/2) / (2^{p/2} Gamma(p/2)).
inline double log_chisq_pdf(double x, int p) {
    const double half_p = 0.5 * p;
    const double log_norm = half_p * std::log(2.0) + std::lgamma(half_p);
    const double ex = std::exp(x);
    return std::exp(0.5 * (p * x - ex) - log_norm);
}

// Normal-reference (Silverman) rule evaluated against the model on the
// operating scale: spread of chi^2_p for the positive-support schemes, spread
// of log chi^2_p for the log-scale ones.
inline double default_bandwidth(int p, int n, Kernel k) {
    double sd, iqr;
    boost::math::chi_squared dist(static_cast<double>(p));
    const double q1 = boost::math::quantile(dist, 0.25);
    const double q3 = boost::math::quantile(dist, 0.75);
    if (log_scale(k)) {
        // Var[log X] = trigamma(p/2) for X ~ chi^2_p (scale factor 2 drops out).
        sd = std::sqrt(boost::math::trigamma(0.5 * p));
        iqr = std::log(q3) - std::log(q1);
    } else {
        sd = std::sqrt(2.0 * p);
        iqr = q3 - q1;
    }
    return 0.9 * std::min(sd, iqr / 1.349) * std::pow(static_cast<double>(n), -0.2);
}

namespace detail {

inline double normal_pdf(double z, double h) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    const double u = z / h;
    return inv_sqrt_2pi / h * std::exp(-0.5 * u * u);
}

inline double gamma_kernel_pdf(double y, double t, double h) {
    // Gamma density in y with shape t/h + 1 and scale h.
    if (y <= 0.0) return 0.0;
    const double shape = t / h + 1.0;
    const double log_pdf = (shape - 1.0) * std::log(y) - y / h - shape * std::log(h) - std::lgamma(shape);
    return std::exp(log_pdf);
}

}  // namespace detail

// Kernel density estimate of the squared-distance sample, evaluated at the
// given points. Evaluation points are on the operating scale: squared
// distances for ReflectedNormal/GammaKernel/LogBackTransform, log squared
// distances for LogChiSq.
inline std::vector<double> kernel_density(const KernelScheme& scheme,
                                          const std::vector<double>& sample,
                                          const std::vector<double>& at) {
    if (sample.empty()) throw std::invalid_argument("kde: empty sample");
    if (scheme.h <= 0.0) throw std::invalid_argument("kde: bandwidth must be positive");
    const double h = scheme.h;
    const double n = static_cast<double>(sample.size());
    std::vector<double> out(at.size(), 0.0);

    switch (scheme.variant) {
        case Kernel::ReflectedNormal:
            for (std::size_t j = 0; j < at.size(); ++j) {
                if (at[j] < 0.0) throw std::invalid_argument("kde: negative evaluation point");
                double acc = 0.0;
                for (double d : sample) {
                    if (d <= 0.0) throw std::invalid_argument("kde: nonpositive sample value");
                    acc += detail::normal_pdf(at[j] - d, h) + detail::normal_pdf(at[j] + d, h);
                }
                out[j] = acc / n;
            }
            break;
        case Kernel::GammaKernel:
            for (std::size_t j = 0; j < at.size(); ++j) {
                if (at[j] < 0.0) throw std::invalid_argument("kde: negative evaluation point");
                double acc = 0.0;
                for (double d : sample) {
                    if (d <= 0.0) throw std::invalid_argument("kde: nonpositive sample value");
                    acc += detail::gamma_kernel_pdf(at[j], d, h);
                }
                out[j] = acc / n;
            }
            break;
        case Kernel::LogBackTransform:
            for (std::size_t j = 0; j < at.size(); ++j) {
                if (at[j] <= 0.0) throw std::invalid_argument("kde: nonpositive evaluation point");
                const double ly = std::log(at[j]);
                double acc = 0.0;
                for (double d : sample) {
                    if (d <= 0.0) throw std::invalid_argument("kde: nonpositive sample value");
                    acc += detail::normal_pdf(ly - std::log(d), h);
                }
                out[j] = acc / (n * at[j]);
            }
            break;
        case Kernel::LogChiSq:
            for (std::size_t j = 0; j < at.size(); ++j) {
                double acc = 0.0;
                for (double d : sample) {
                    if (d <= 0.0) throw std::invalid_argument("kde: nonpositive sample value");
                    acc += detail::normal_pdf(at[j] - std::log(d), h);
                }
                out[j] = acc / n;
            }
            break;
    }
    return out;
}

// Smoothed model density m*(.) = integral of k(.; t, h) against the chi^2_p
// density (or the log chi^2_p density for the log-scale schemes), cached on a
// fixed grid and interpolated with a clamped monotone cubic.
class SmoothedModel {
  public:
    static constexpr int kGridSize = 512;
    static constexpr double kFloor = 1e-300;

    SmoothedModel(int p, KernelScheme scheme, bool smooth = true)
        : p_(p), scheme_(scheme), smooth_(smooth) {
        if (p < 1) throw std::invalid_argument("smoothed model: p must be >= 1");
        if (scheme.h <= 0.0) throw std::invalid_argument("smoothed model: bandwidth must be positive");
        boost::math::chi_squared dist(static_cast<double>(p));
        const double h = scheme.h;
        double lo, hi;
        if (log_scale(scheme.variant)) {
            lo = std::log(boost::math::quantile(dist, 1e-7)) - 4.0 * h;
            hi = std::log(boost::math::quantile(dist, 1.0 - 1e-9)) + 4.0 * h;
        } else {
            lo = 1e-9;
            hi = boost::math::quantile(dist, 1.0 - 1e-9);
            if (scheme.variant == Kernel::ReflectedNormal) hi += 6.0 * h;
        }
        grid_.resize(kGridSize);
        vals_.resize(kGridSize);
        for (int i = 0; i < kGridSize; ++i)
            grid_[i] = lo + (hi - lo) * i / (kGridSize - 1);
        if (smooth_) {
            for (int i = 0; i < kGridSize; ++i) vals_[i] = convolve(grid_[i]);
        } else {
            for (int i = 0; i < kGridSize; ++i)
                vals_[i] = log_scale(scheme.variant) ? log_chisq_pdf(grid_[i], p)
                                                     : chisq_pdf(grid_[i], p);
        }
        build_slopes();
    }

    int p() const { return p_; }
    const KernelScheme& scheme() const { return scheme_; }
    bool smoothing() const { return smooth_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return vals_; }

    // Model density on the operating scale at an operating-scale point.
    double at_grid_scale(double x) const { return std::max(interp(x), kFloor); }

    // Model density evaluated for a squared distance, matching the scale the
    // kde reports for the same scheme (LogBackTransform divides by d^2).
    double at_squared_distance(double d2) const {
        if (scheme_.variant == Kernel::LogBackTransform)
            return std::max(interp(std::log(d2)) / d2, kFloor);
        if (scheme_.variant == Kernel::LogChiSq)
            return std::max(interp(std::log(d2)), kFloor);
        return std::max(interp(d2), kFloor);
    }

    // Direct quadrature of the smoothed model at one point (oracle path, used
    // by tests; the cached grid calls this during construction).
    double convolve(double x) const {
        namespace quad = boost::math::quadrature;
        boost::math::chi_squared dist(static_cast<double>(p_));
        const double h = scheme_.h;
        double a, b;
        auto f = [&](double u) -> double {
            switch (scheme_.variant) {
                case Kernel::ReflectedNormal:
                    return (detail::normal_pdf(x - u, h) + detail::normal_pdf(x + u, h)) *
                           chisq_pdf(u, p_);
                case Kernel::GammaKernel:
                    return detail::gamma_kernel_pdf(x, u, h) * chisq_pdf(u, p_);
                default:
                    return detail::normal_pdf(x - u, h) * log_chisq_pdf(u, p_);
            }
        };
        if (log_scale(scheme_.variant)) {
            a = x - 8.0 * h;
            b = x + 8.0 * h;
            const double lo = std::log(boost::math::quantile(dist, 1e-12));
            const double hi = std::log(boost::math::quantile(dist, 1.0 - 1e-13));
            a = std::max(a, lo);
            b = std::min(b, hi);
            if (a >= b) return 0.0;
            return quad::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-10);
        }
        const double support = boost::math::quantile(dist, 1.0 - 1e-12);
        // Integrate only over the kernel's effective window in t so narrow
        // bandwidths are not missed by the adaptive rule.
        if (scheme_.variant == Kernel::ReflectedNormal) {
            double mass = 0.0;
            auto direct = [&](double u) { return detail::normal_pdf(x - u, h) * chisq_pdf(u, p_); };
            a = std::max(0.0, x - 8.0 * h);
            b = std::min(support, x + 8.0 * h);
            if (a < b) mass += quad::gauss_kronrod<double, 31>::integrate(direct, a, b, 8, 1e-10);
            if (x < 8.0 * h) {
                auto mirrored = [&](double u) {
                    return detail::normal_pdf(x + u, h) * chisq_pdf(u, p_);
                };
                const double b2 = std::min(support, 8.0 * h - x);
                if (b2 > 0.0)
                    mass += quad::gauss_kronrod<double, 31>::integrate(mirrored, 0.0, b2, 8, 1e-10);
            }
            return mass;
        }
        // Gamma kernel: in t it concentrates near the evaluation point with
        // spread of order sqrt(h x) + h.
        const double w = 12.0 * (std::sqrt(h * std::max(x, h)) + h);
        a = std::max(0.0, x - w);
        b = std::min(support, x + w);
        if (a >= b) return 0.0;
        return quad::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-10);
    }

  private:
    // Fritsch-Carlson monotone cubic Hermite slopes; keeps the interpolant
    // free of negative undershoot between grid points.
    void build_slopes() {
        const int n = kGridSize;
        slopes_.assign(n, 0.0);
        std::vector<double> d(n - 1);
        for (int i = 0; i + 1 < n; ++i)
            d[i] = (vals_[i + 1] - vals_[i]) / (grid_[i + 1] - grid_[i]);
        slopes_[0] = d[0];
        slopes_[n - 1] = d[n - 2];
        for (int i = 1; i + 1 < n; ++i)
            slopes_[i] = (d[i - 1] * d[i] > 0.0) ? 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]) : 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) { slopes_[i] = slopes_[i + 1] = 0.0; continue; }
            const double a = slopes_[i] / d[i], b = slopes_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                slopes_[i] = t * a * d[i];
                slopes_[i + 1] = t * b * d[i];
            }
        }
    }

    double interp(double x) const {
        if (x <= grid_.front()) return vals_.front();
        if (x >= grid_.back()) return vals_.back();
        auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
        const int i = static_cast<int>(it - grid_.begin()) - 1;
        const double hseg = grid_[i + 1] - grid_[i];
        const double t = (x - grid_[i]) / hseg;
        const double t2 = t * t, t3 = t2 * t;
        const double v = (2 * t3 - 3 * t2 + 1) * vals_[i] + (t3 - 2 * t2 + t) * hseg * slopes_[i] +
                         (-2 * t3 + 3 * t2) * vals_[i + 1] + (t3 - t2) * hseg * slopes_[i + 1];
        return std::max(v, 0.0);
    }

    int p_;
    KernelScheme scheme_;
    bool smooth_;
    std::vector<double> grid_, vals_, slopes_;
};

struct ResidualResult {
    std::vector<double> delta;
    std::vector<bool> floored;  // model density hit the underflow floor
};

// Pearson residuals delta_i = m_hat(x_i) / m*(x_i) - 1 at the observations'
// squared distances, with both densities from the same scheme and bandwidth.
inline ResidualResult pearson_residuals(const SmoothedModel& model,
                                        const std::vector<double>& squared_distances) {
    const KernelScheme& scheme = model.scheme();
    std::vector<double> at;
    at.reserve(squared_distances.size());
    if (scheme.variant == Kernel::LogChiSq) {
        for (double d2 : squared_distances) at.push_back(std::log(d2));
    } else {
        at = squared_distances;
    }
    const std::vector<double> mhat = kernel_density(scheme, squared_distances, at);
    ResidualResult res;
    res.delta.resize(squared_distances.size());
    res.floored.resize(squared_distances.size());
    for (std::size_t i = 0; i < squared_distances.size(); ++i) {
        const double mstar = model.at_squared_distance(squared_distances[i]);
        res.floored[i] = (mstar <= SmoothedModel::kFloor);
        res.delta[i] = std::max(mhat[i] / mstar - 1.0, -1.0);
    }
    return res;
}

}  // namespace wle
