#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "ptring/errors.hpp"
#include "ptring/spectrum.hpp"

namespace ptring {

using complexd = std::complex<double>;

// Two coupled rings: the main ring (intrinsic decay gamma1) carries the
// resonance of interest; the auxiliary ring (intrinsic decay gamma2) is the
// only one coupled to the bus waveguide, with coupling decay gamma_c.
// Inter-ring field coupling is kappa. Everything in s^-1, ordinary-frequency
// convention: Q = f0 / FWHM, no 2*pi anywhere.
struct SystemParams {
    double omega1 = 0.0;       // main-ring resonance
    double delta_omega = 0.0;  // omega2 - omega1
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma_c = 0.0;
    double kappa = 0.0;

    double omega2() const { return omega1 + delta_omega; }

    void validate() const {
        require(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma_c >= 0.0 && kappa >= 0.0,
                "system params: decay/coupling rates must be non-negative");
        require(omega1 > 0.0, "system params: omega1 must be positive");
        require(std::isfinite(omega1) && std::isfinite(delta_omega) && std::isfinite(gamma1) &&
                    std::isfinite(gamma2) && std::isfinite(gamma_c) && std::isfinite(kappa),
                "system params: non-finite value");
    }
};

// Main/auxiliary longitudinal-mode combs. The reference device has
// fsr2 = 2 * fsr1 exactly; other ratios are allowed.
struct DeviceGeometry {
    double fsr1 = 0.0;
    double fsr2 = 0.0;
    int n_modes = 1;  // main-ring modes on each side of the reference mode
    double alignment_offset = 0.0;

    void validate() const {
        require(fsr1 > 0.0 && fsr2 > 0.0, "geometry: FSRs must be positive");
        require(n_modes >= 1, "geometry: n_modes must be >= 1");
    }
};

struct EigenSolution {
    complexd omega_plus;
    complexd omega_minus;
    std::array<complexd, 2> eigvec_plus;
    std::array<complexd, 2> eigvec_minus;
};

struct SteadyStateResponse {
    complexd a1;
    complexd a2;
    complexd s_out;
    double drive_freq = 0.0;
};

struct Matrix2c {
    complexd m00, m01, m10, m11;
    complexd trace() const { return m00 + m11; }
};

inline Matrix2c hamiltonian(const SystemParams& p) {
    p.validate();
    const complexd i(0.0, 1.0);
    return Matrix2c{p.omega1 - i * (p.gamma1 / 2.0), complexd(p.kappa, 0.0),
                    complexd(p.kappa, 0.0), p.omega2() - i * ((p.gamma2 + p.gamma_c) / 2.0)};
}

namespace detail {

// Normalized eigenvector of a symmetric 2x2 for eigenvalue lambda.
inline std::array<complexd, 2> eigvec_of(const Matrix2c& h, complexd lambda) {
    std::array<complexd, 2> v;
    complexd r0 = lambda - h.m00;
    complexd r1 = lambda - h.m11;
    // pick the better-conditioned row relation
    if (std::abs(r0) >= std::abs(r1)) {
        v = {h.m01, r0};
    } else {
        v = {r1, h.m10};
    }
    double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
    if (n == 0.0) return {complexd(1.0, 0.0), complexd(0.0, 0.0)};
    v[0] /= n;
    v[1] /= n;
    // fixed phase: largest-magnitude component real positive
    complexd ref = std::abs(v[0]) >= std::abs(v[1]) ? v[0] : v[1];
    if (std::abs(ref) > 0.0) {
        complexd phase = ref / std::abs(ref);
        v[0] /= phase;
        v[1] /= phase;
    }
    return v;
}

}  // namespace detail

// Exact eigenvalues of the 2x2 Hamiltonian via the centered characteristic
// solution lambda = mu +- sqrt(delta^2 + kappa^2); no cancellation between
// the optical carrier and the GHz-scale structure. omega_plus is the root
// with the larger real part (ties broken by larger imaginary part).
inline EigenSolution eigenfrequencies(const SystemParams& p) {
    Matrix2c h = hamiltonian(p);
    complexd mu = (h.m00 + h.m11) / 2.0;
    complexd delta = (h.m00 - h.m11) / 2.0;
    complexd root = std::sqrt(delta * delta + h.m01 * h.m10);
    complexd lam_a = mu + root;
    complexd lam_b = mu - root;
    bool a_is_plus = (lam_a.real() > lam_b.real()) ||
                     (lam_a.real() == lam_b.real() && lam_a.imag() >= lam_b.imag());
    EigenSolution sol;
    sol.omega_plus = a_is_plus ? lam_a : lam_b;
    sol.omega_minus = a_is_plus ? lam_b : lam_a;
    sol.eigvec_plus = detail::eigvec_of(h, sol.omega_plus);
    sol.eigvec_minus = detail::eigvec_of(h, sol.omega_minus);
    return sol;
}

// Signed distance to the exceptional point: kappa - (gamma2 + gamma_c - gamma1)/4.
// Positive: split (PT-symmetric-like) phase; negative: broken phase.
inline double ep_distance(const SystemParams& p) {
    p.validate();
    return p.kappa - (p.gamma2 + p.gamma_c - p.gamma1) / 4.0;
}

// Steady state of the driven system at drive frequency omega (e^{-i omega t}
// convention). The bus drives only the auxiliary ring with amplitude
// sqrt(gamma_c); s_out = s_in - sqrt(gamma_c) * a2. Solved as the 2x2 linear
// system [D1, i kappa; i kappa, D2] [a1; a2] = [0; sqrt(gamma_c) s_in].
inline SteadyStateResponse steady_state_response(const SystemParams& p, double drive_freq,
                                                 complexd s_in) {
    p.validate();
    require(s_in != complexd(0.0, 0.0), "steady state: s_in must be nonzero");
    const complexd i(0.0, 1.0);
    complexd d1 = i * (p.omega1 - drive_freq) + p.gamma1 / 2.0;
    complexd d2 = i * (p.omega2() - drive_freq) + (p.gamma2 + p.gamma_c) / 2.0;
    complexd det = d1 * d2 + p.kappa * p.kappa;
    if (det == complexd(0.0, 0.0))
        throw singular_system_error("steady state: lossless system driven exactly on resonance");
    double root_gc = std::sqrt(p.gamma_c);
    complexd a2 = d1 * root_gc * s_in / det;
    complexd a1 = -i * p.kappa * root_gc * s_in / det;
    return SteadyStateResponse{a1, a2, s_in - root_gc * a2, drive_freq};
}

inline void validate_grid(const std::vector<double>& grid) {
    require(grid.size() >= 2, "grid: need at least 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], "grid: frequencies must be strictly increasing");
}

inline Spectrum transmission_spectrum(const SystemParams& p, const std::vector<double>& grid) {
    validate_grid(grid);
    Spectrum spec;
    spec.kind = Spectrum::Kind::transmission;
    spec.freqs = grid;
    spec.values.reserve(grid.size());
    for (double f : grid) {
        SteadyStateResponse r = steady_state_response(p, f, complexd(1.0, 0.0));
        spec.values.push_back(std::norm(r.s_out));
    }
    return spec;
}

inline Spectrum dos_spectrum(const SystemParams& p, const std::vector<double>& grid,
                             bool normalize = false) {
    validate_grid(grid);
    Spectrum spec;
    spec.kind = Spectrum::Kind::dos;
    spec.freqs = grid;
    spec.values.reserve(grid.size());
    double peak = 0.0;
    for (double f : grid) {
        SteadyStateResponse r = steady_state_response(p, f, complexd(1.0, 0.0));
        double v = std::norm(r.a1);
        peak = std::max(peak, v);
        spec.values.push_back(v);
    }
    if (normalize && peak > 0.0)
        for (double& v : spec.values) v /= peak;
    return spec;
}

// Detuning of main-ring mode m from its nearest auxiliary comb line. The
// auxiliary comb sits at omega1 + alignment_offset + tuning + k * fsr2.
// Exact half-spacing ties break toward the lower-frequency line.
inline double comb_mode_detuning(const SystemParams& base, const DeviceGeometry& geom,
                                 double tuning, int mode_index) {
    double mode_freq = base.omega1 + mode_index * geom.fsr1;
    double anchor = base.omega1 + geom.alignment_offset + tuning;
    double k = std::floor((mode_freq - anchor) / geom.fsr2 + 0.5);
    return (anchor + k * geom.fsr2) - mode_freq;
}

// Multi-resonance band: each main-ring mode is an independent two-mode system
// paired with its nearest auxiliary line; the band transmission is the
// product of per-mode transmissions. Valid because mode spacings far exceed
// linewidths at this parameter scale.
inline Spectrum comb_spectrum(const SystemParams& base, const DeviceGeometry& geom, double tuning,
                              const std::vector<double>& grid) {
    base.validate();
    geom.validate();
    validate_grid(grid);
    Spectrum spec;
    spec.kind = Spectrum::Kind::transmission;
    spec.freqs = grid;
    spec.values.assign(grid.size(), 1.0);
    for (int m = -geom.n_modes; m <= geom.n_modes; ++m) {
        SystemParams mode = base;
        mode.omega1 = base.omega1 + m * geom.fsr1;
        mode.delta_omega = comb_mode_detuning(base, geom, tuning, m);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            SteadyStateResponse r = steady_state_response(mode, grid[i], complexd(1.0, 0.0));
            spec.values[i] *= std::norm(r.s_out);
        }
    }
    return spec;
}

}  // namespace ptring
