#pragma once

#include <cmath>
#include <utility>

#include "ptring/errors.hpp"
#include "ptring/tcmt.hpp"

namespace ptring {

// Photon-lifetime estimators. Three are exposed on purpose: the two
// approximate closed forms (misaligned high-Q limit 1/(2*gamma1) and
// aligned near-EP limit 1/gamma_c) and the exact eigenvalue-based one.
// Callers should always say which estimator produced a number.

struct LifetimeEstimate {
    double tau_1e = 0.0;  // fitted 1/e width of the coincidence peak (s)
    double jitter1 = 0.0;
    double jitter2 = 0.0;
    double tau = 0.0;  // deconvolved photon lifetime (s)
};

inline double tau_high_q(const SystemParams& p) {
    p.validate();
    if (p.gamma1 <= 0.0) throw numeric_error("tau_high_q: gamma1 must be positive");
    return 1.0 / (2.0 * p.gamma1);
}

inline double tau_low_q(const SystemParams& p) {
    p.validate();
    if (p.gamma_c <= 0.0) throw numeric_error("tau_low_q: gamma_c must be positive");
    return 1.0 / p.gamma_c;
}

// Per-branch lifetimes 1/(2|Im omega_+|), 1/(2|Im omega_-|).
inline std::pair<double, double> tau_exact(const SystemParams& p) {
    EigenSolution sol = eigenfrequencies(p);
    double im_p = std::abs(sol.omega_plus.imag());
    double im_m = std::abs(sol.omega_minus.imag());
    if (im_p == 0.0 || im_m == 0.0)
        throw infinite_lifetime_error("tau_exact: purely real eigenvalue, infinite lifetime");
    return {1.0 / (2.0 * im_p), 1.0 / (2.0 * im_m)};
}

// Maximum achievable tuning contrast gamma_c / (2 gamma1) = tau_high_q / tau_low_q.
inline double lifetime_contrast(const SystemParams& p) {
    p.validate();
    if (p.gamma1 <= 0.0) throw numeric_error("lifetime_contrast: gamma1 must be positive");
    return p.gamma_c / (2.0 * p.gamma1);
}

// tau_1e = sqrt(2 tau^2 + j1^2 + j2^2)
inline double convolve_jitter(double tau, double j1, double j2) {
    require(tau >= 0.0 && j1 >= 0.0 && j2 >= 0.0, "convolve_jitter: arguments must be >= 0");
    return std::sqrt(2.0 * tau * tau + j1 * j1 + j2 * j2);
}

// Exact inverse of convolve_jitter. The boundary tau_1e^2 == j1^2 + j2^2
// returns 0; below it the lifetime is unresolvable.
inline double deconvolve_jitter(double tau_1e, double j1, double j2) {
    require(tau_1e >= 0.0 && j1 >= 0.0 && j2 >= 0.0, "deconvolve_jitter: arguments must be >= 0");
    double rest = tau_1e * tau_1e - j1 * j1 - j2 * j2;
    if (rest < 0.0)
        throw jitter_domain_error("deconvolve_jitter: tau_1e below jitter floor, unresolvable");
    return std::sqrt(rest / 2.0);
}

inline LifetimeEstimate make_lifetime_estimate(double tau_1e, double j1, double j2) {
    return LifetimeEstimate{tau_1e, j1, j2, deconvolve_jitter(tau_1e, j1, j2)};
}

}  // namespace ptring
