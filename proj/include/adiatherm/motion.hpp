// motion.hpp: Fock-basis weights for thermal, coherent and cat motional states

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "adiatherm/units.hpp"

namespace adiatherm {

enum class MotionKind { Thermal, Coherent, Cat };

inline const char* to_string(MotionKind k) {
    switch (k) {
        case MotionKind::Thermal: return "thermal";
        case MotionKind::Coherent: return "coherent";
        case MotionKind::Cat: return "cat";
    }
    return "?";
}

/// Truncated Fock distribution. tail_mass is the probability beyond n_max.
struct MotionDistribution {
    MotionKind kind{MotionKind::Thermal};
    double nbar{0.0};   // thermal
    double alpha{0.0};  // coherent, cat
    double theta{0.0};  // cat
    std::vector<double> weights;
    double tail_mass{0.0};

    int n_max() const { return static_cast<int>(weights.size()) - 1; }
};

inline constexpr double kDefaultTailTol = 1e-8;

// ---------------------------------------------------------------------------
// Thermal

/// Geometric weights p_n = nbar^n / (1+nbar)^(n+1), n = 0..n_max.
inline MotionDistribution thermal_weights_fixed(double nbar, int n_max) {
    if (!(nbar > 0.0)) throw std::domain_error("thermal_weights: nbar must be positive");
    if (n_max < 0) throw std::domain_error("thermal_weights: negative cutoff");
    MotionDistribution d;
    d.kind = MotionKind::Thermal;
    d.nbar = nbar;
    const double q = nbar / (1.0 + nbar);
    d.weights.resize(n_max + 1);
    double p = 1.0 / (1.0 + nbar);
    for (int n = 0; n <= n_max; ++n) {
        d.weights[n] = p;
        p *= q;
    }
    d.tail_mass = std::exp((n_max + 1) * std::log(q));
    return d;
}

/// Smallest n_max with q^(n_max+1) <= tail_tol, then raised to min_cutoff.
inline int thermal_cutoff(double nbar, double tail_tol) {
    if (!(nbar > 0.0)) throw std::domain_error("thermal_weights: nbar must be positive");
    if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw std::domain_error("thermal_weights: tail_tol must be in (0, 1)");
    const double log_q = std::log(nbar) - std::log1p(nbar);
    const double log_tol = std::log(tail_tol);
    int n = std::max(0, static_cast<int>(std::ceil(log_tol / log_q)) - 1);
    while ((n + 1) * log_q > log_tol) ++n;
    while (n > 0 && n * log_q <= log_tol) --n;
    return n;
}

inline MotionDistribution thermal_weights(double nbar, double tail_tol = kDefaultTailTol, int min_cutoff = 0) {
    return thermal_weights_fixed(nbar, std::max(thermal_cutoff(nbar, tail_tol), min_cutoff));
}

/// T dnbar/dT at x = hbar omega / (k_B T): x e^x nbar^2.
inline double nbar_log_temperature_derivative(double x) {
    const double nbar = 1.0 / std::expm1(x);
    return x * std::exp(x) * nbar * nbar;
}

/// T * dp_n/dT for the thermal distribution at x = hbar omega / (k_B T).
inline double thermal_weight_dT(int n, double x) {
    if (!(x > 0.0)) throw std::domain_error("thermal_weight_dT: x must be positive");
    const double nbar = 1.0 / std::expm1(x);
    const double p = std::exp(n * (std::log(nbar) - std::log1p(nbar))) / (1.0 + nbar);
    const double dp_dnbar = p * (n / nbar - (n + 1.0) / (1.0 + nbar));
    return dp_dnbar * nbar_log_temperature_derivative(x);
}

/// T * d/dT of every weight of `d` and of its tail mass.
struct WeightDerivatives {
    std::vector<double> weights;
    double tail{0.0};
};

inline WeightDerivatives thermal_weight_derivatives(const MotionDistribution& d) {
    if (d.kind != MotionKind::Thermal) throw std::domain_error("thermal_weight_derivatives: not a thermal distribution");
    const double nbar = d.nbar;
    const double x = std::log1p(1.0 / nbar);
    const double chain = nbar_log_temperature_derivative(x);
    WeightDerivatives out;
    out.weights.resize(d.weights.size());
    for (std::size_t n = 0; n < d.weights.size(); ++n)
        out.weights[n] = d.weights[n] * (n / nbar - (n + 1.0) / (1.0 + nbar)) * chain;
    // tail = q^(n_max+1), dq/dnbar = 1/(1+nbar)^2
    const int k = d.n_max() + 1;
    const double q = nbar / (1.0 + nbar);
    out.tail = k * std::exp((k - 1) * std::log(q)) / ((1.0 + nbar) * (1.0 + nbar)) * chain;
    return out;
}

// ---------------------------------------------------------------------------
// Coherent and cat

namespace detail {

inline std::vector<double> poisson_weights(double mean, int n_max) {
    std::vector<double> w(n_max + 1);
    w[0] = std::exp(-mean);
    for (int n = 1; n <= n_max; ++n) w[n] = w[n - 1] * mean / n;
    return w;
}

/// P(X > n_max) for X ~ Poisson(mean).
inline double poisson_tail(double mean, int n_max) {
    if (mean == 0.0) return 0.0;
    return boost::math::gamma_p(static_cast<double>(n_max) + 1.0, mean);
}

/// Smallest n_max with scale * P(X > n_max) <= tail_tol.
inline int poisson_cutoff(double mean, double tail_tol, double scale) {
    if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw std::domain_error("tail_tol must be in (0, 1)");
    int n = static_cast<int>(std::floor(mean));
    while (n > 0 && scale * poisson_tail(mean, n - 1) <= tail_tol) --n;
    while (scale * poisson_tail(mean, n) > tail_tol) ++n;
    return n;
}

}  // namespace detail

inline MotionDistribution coherent_weights(double alpha, double tail_tol = kDefaultTailTol, int min_cutoff = 0) {
    if (!(alpha >= 0.0)) throw std::domain_error("coherent_weights: alpha must be non-negative");
    const double mean = alpha * alpha;
    const int n_max = std::max(detail::poisson_cutoff(mean, tail_tol, 1.0), min_cutoff);
    MotionDistribution d;
    d.kind = MotionKind::Coherent;
    d.alpha = alpha;
    d.weights = detail::poisson_weights(mean, n_max);
    d.tail_mass = detail::poisson_tail(mean, n_max);
    return d;
}

/// Norm of e^{i theta}|alpha> + e^{-i theta}|-alpha> over 2: 1 + cos(2 theta) e^{-2 alpha^2}.
inline double cat_normalization(double alpha, double theta) {
    return 1.0 + std::cos(2.0 * theta) * std::exp(-2.0 * alpha * alpha);
}

/// Fock weights of (e^{i theta}|alpha> + e^{-i theta}|-alpha>)/sqrt(2), normalized:
/// p_n = [1 + (-1)^n cos 2theta] Poisson_n(alpha^2) / N, for a given cutoff.
/// Only |c_n|^2 is kept: the dynamics conserves total excitations, so coherences
/// between Fock states never reach Dicke-level populations.
inline MotionDistribution cat_weights_fixed(double alpha, double theta, int n_max) {
    if (!(alpha >= 0.0)) throw std::domain_error("cat_weights: alpha must be non-negative");
    if (n_max < 0) throw std::domain_error("cat_weights: negative cutoff");
    const double norm = cat_normalization(alpha, theta);
    if (!(norm > 0.0)) throw std::domain_error("cat_weights: vanishing normalization");
    MotionDistribution d;
    d.kind = MotionKind::Cat;
    d.alpha = alpha;
    d.theta = theta;
    d.weights = detail::poisson_weights(alpha * alpha, n_max);
    const double c = std::cos(2.0 * theta);
    double sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        d.weights[n] *= (n % 2 == 0 ? 1.0 + c : 1.0 - c) / norm;
        sum += d.weights[n];
    }
    d.tail_mass = std::max(0.0, 1.0 - sum);
    return d;
}

inline MotionDistribution cat_weights(double alpha, double theta, double tail_tol = kDefaultTailTol,
                                      int min_cutoff = 0) {
    if (!(alpha >= 0.0)) throw std::domain_error("cat_weights: alpha must be non-negative");
    const double norm = cat_normalization(alpha, theta);
    if (!(norm > 0.0)) throw std::domain_error("cat_weights: vanishing normalization");
    const int n_max = std::max(detail::poisson_cutoff(alpha * alpha, tail_tol, 2.0 / norm), min_cutoff);
    return cat_weights_fixed(alpha, theta, n_max);
}

/// d p_n / d epsilon at theta = alpha * epsilon for n = 0..n_max (chain rule through theta,
/// including the theta dependence of the normalization).
inline std::vector<double> cat_weight_derivatives(double alpha, double epsilon, int n_max) {
    const double theta = alpha * epsilon;
    const double e = std::exp(-2.0 * alpha * alpha);
    const double norm = cat_normalization(alpha, theta);
    const double dc = -2.0 * std::sin(2.0 * theta);
    auto w = detail::poisson_weights(alpha * alpha, n_max);
    for (int n = 0; n <= n_max; ++n) {
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        w[n] *= alpha * dc * (sign - e) / (norm * norm);
    }
    return w;
}

inline double cat_weight_deps(double alpha, double epsilon, int n) {
    return cat_weight_derivatives(alpha, epsilon, n)[n];
}

// ---------------------------------------------------------------------------
// Temperature

/// Thermal point of a mode: x = hbar omega / (k_B T), nbar = 1/(e^x - 1).
struct TemperaturePoint {
    double x{0.0};
    double kelvin{0.0};
    double nbar{0.0};
};

inline TemperaturePoint nbar_from_T(double omega, double kelvin) {
    if (!(omega > 0.0) || !(kelvin > 0.0)) throw std::domain_error("nbar_from_T: omega and T must be positive");
    const double x = units::hbar * omega / (units::k_B * kelvin);
    return {x, kelvin, 1.0 / std::expm1(x)};
}

inline TemperaturePoint T_from_nbar(double omega, double nbar) {
    if (!(omega > 0.0) || !(nbar > 0.0)) throw std::domain_error("T_from_nbar: omega and nbar must be positive");
    const double x = std::log1p(1.0 / nbar);
    return {x, units::hbar * omega / (units::k_B * x), nbar};
}

}  // namespace adiatherm
