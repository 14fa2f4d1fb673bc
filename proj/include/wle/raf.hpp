#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wle {

// Residual adjustment function family based on the power divergence measure.
// tau = 1 reproduces maximum likelihood (unit weights), tau = 2 the Hellinger
// distance, tau -> infinity Kullback-Leibler and tau = -1 Neyman's chi-square.
struct RafSpec {
    double tau = 2.0;
    bool infinite = false;

    static RafSpec ml() { return {1.0, false}; }
    static RafSpec hellinger() { return {2.0, false}; }
    static RafSpec kullback_leibler() { return {0.0, true}; }
    static RafSpec neyman_chisq() { return {-1.0, false}; }
    static RafSpec power(double tau) { return {tau, false}; }

    bool admissible() const {
        if (infinite) return true;
        return tau == -1.0 || tau >= 1.0;
    }

    static RafSpec parse(const std::string& name) {
        if (name == "ml") return ml();
        if (name == "hellinger") return hellinger();
        if (name == "kl") return kullback_leibler();
        if (name == "ncs") return neyman_chisq();
        if (name.rfind("power:", 0) == 0) {
            RafSpec s = power(std::stod(name.substr(6)));
            if (!s.admissible()) throw std::invalid_argument("raf: tau must be -1 or >= 1");
            return s;
        }
        throw std::invalid_argument("raf: unknown spec '" + name + "'");
    }

    std::string name() const {
        if (infinite) return "kl";
        if (tau == 1.0) return "ml";
        if (tau == 2.0) return "hellinger";
        if (tau == -1.0) return "ncs";
        return "power:" + std::to_string(tau);
    }
};

// A_tau(delta) = tau * ((delta+1)^(1/tau) - 1), with the log limit at tau = inf.
inline double raf_value(const RafSpec& spec, double delta) {
    if (!spec.admissible()) throw std::invalid_argument("raf: inadmissible tau");
    if (delta < -1.0) throw std::invalid_argument("raf: residual below -1");
    if (spec.infinite) {
        if (delta == -1.0) return -std::numeric_limits<double>::infinity();
        return std::log(delta + 1.0);
    }
    if (spec.tau == 1.0) return delta;
    return spec.tau * (std::pow(delta + 1.0, 1.0 / spec.tau) - 1.0);
}

// w(delta) = [A(delta) + 1]^+ / (delta + 1), clamped into [0, 1].
inline double weight(const RafSpec& spec, double delta) {
    if (delta < -1.0) throw std::invalid_argument("raf: residual below -1");
    if (!spec.infinite && spec.tau == 1.0) return 1.0;
    if (delta == -1.0) return 0.0;
    const double a = raf_value(spec, delta);
    const double num = std::max(a + 1.0, 0.0);
    const double w = num / (delta + 1.0);
    return std::clamp(w, 0.0, 1.0);
}

}  // namespace wle
