#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ptring/errors.hpp"
#include "ptring/levmar.hpp"
#include "ptring/spectrum.hpp"
#include "ptring/tcmt.hpp"

namespace ptring {

struct ResonanceWindow {
    std::size_t center_index = 0;
    std::size_t lo = 0;  // inclusive
    std::size_t hi = 0;  // inclusive
    double center = 0.0;
    double depth = 0.0;  // below the local baseline
};

struct ResonanceFit {
    double center = 0.0;
    double fwhm = 0.0;
    double extinction = 0.0;
    double q_factor = 0.0;
    double residual = 0.0;  // RMS fit error
};

struct ParamFitResult {
    SystemParams params;
    double tuning = 0.0;
    std::vector<double> covariance_diag;
    double cost = 0.0;
    std::size_t iterations = 0;
    bool non_identifiable = false;  // covariance condition number > 1e8
};

// Local-minimum dips whose depth below the local baseline exceeds
// `prominence`. The baseline of a dip is the lower of the two highest values
// reached walking outward before a deeper point (or the boundary). Each dip
// gets a fitting window extending to the nearest points that recover to
// baseline - prominence/2. Plateau minima resolve to the midpoint index.
inline std::vector<ResonanceWindow> find_resonances(const Spectrum& spec, double prominence) {
    spec.validate();
    require(prominence > 0.0 && prominence < 1.0, "find_resonances: prominence must be in (0,1)");
    const auto& v = spec.values;
    const std::size_t n = v.size();

    std::vector<ResonanceWindow> out;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(v[i] <= v[i - 1])) {
            ++i;
            continue;
        }
        // run of equal values
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i]) ++j;
        if (j + 1 < n && v[j + 1] > v[i] && v[i] < v[i - 1]) {
            std::size_t c = (i + j) / 2;  // plateau midpoint
            // walk left: highest value before a point deeper than v[c]
            double left_base = v[c];
            for (std::size_t k = c; k-- > 0;) {
                if (v[k] < v[c]) break;
                left_base = std::max(left_base, v[k]);
            }
            double right_base = v[c];
            for (std::size_t k = j + 1; k < n; ++k) {
                if (v[k] < v[c]) break;
                right_base = std::max(right_base, v[k]);
            }
            double baseline = std::min(left_base, right_base);
            double depth = baseline - v[c];
            if (depth > prominence) {
                double recover = baseline - prominence / 2.0;
                std::size_t lo = c;
                while (lo > 0 && v[lo] < recover) --lo;
                std::size_t hi = c;
                while (hi + 1 < n && v[hi] < recover) ++hi;
                out.push_back(ResonanceWindow{c, lo, hi, spec.freqs[c], depth});
            }
        }
        i = j + 1;
    }
    return out;
}

// Symmetric Lorentzian dip T = 1 - d (G/2)^2 / ((w - w0)^2 + (G/2)^2) fitted
// over [window.lo, window.hi]. The width is fitted as exp(log G) so it stays
// positive. With linear_baseline the unit baseline gains slope/intercept
// terms for sloped inputs.
inline ResonanceFit fit_lorentzian(const Spectrum& spec, const ResonanceWindow& window,
                                   bool linear_baseline = false) {
    spec.validate();
    require(window.hi < spec.freqs.size() && window.lo <= window.hi, "fit_lorentzian: bad window");
    const std::size_t n = window.hi - window.lo + 1;
    require(n >= 5, "fit_lorentzian: window must contain at least 5 points");

    std::vector<double> f(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        f[k] = spec.freqs[window.lo + k];
        y[k] = spec.values[window.lo + k];
    }

    // initial estimates from the window itself
    std::size_t imin = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (y[k] < y[imin]) imin = k;
    double c0 = f[imin];
    double d0 = std::clamp(1.0 - y[imin], 1e-3, 1.0);
    double half_level = 1.0 - d0 / 2.0;
    std::size_t l = imin, r = imin;
    while (l > 0 && y[l] < half_level) --l;
    while (r + 1 < n && y[r] < half_level) ++r;
    double g0 = std::max(f[r] - f[l], (f[n - 1] - f[0]) / std::max<std::size_t>(n - 1, 1));

    // dimensionless parameterization: u = (w0 - c0)/g0, lng = log G, d
    std::vector<double> p0{0.0, std::log(g0), d0};
    if (linear_baseline) {
        p0.push_back(0.0);  // slope (per g0)
        p0.push_back(0.0);  // offset
    }
    auto resid = [&](const std::vector<double>& p, std::vector<double>& rv) {
        double w0 = c0 + p[0] * g0;
        double g = std::exp(p[1]);
        double d = p[2];
        double hg2 = (g / 2.0) * (g / 2.0);
        for (std::size_t k = 0; k < n; ++k) {
            double base = 1.0;
            if (p.size() >= 5) base = 1.0 + p[4] + p[3] * ((f[k] - c0) / g0);
            double dx = f[k] - w0;
            rv[k] = base - d * hg2 / (dx * dx + hg2) - y[k];
        }
    };

    LevMarOptions opt;
    opt.max_iterations = 10000;
    opt.cost_rel_tol = 1e-12;
    LevMarResult res = levmar_fit(resid, p0, n, opt);
    if (!res.converged)
        throw convergence_error("fit_lorentzian: iteration cap reached without convergence");

    ResonanceFit fit;
    fit.center = c0 + res.params[0] * g0;
    fit.fwhm = std::exp(res.params[1]);
    fit.extinction = std::clamp(res.params[2], 0.0, 1.0);
    fit.q_factor = fit.center / fit.fwhm;
    fit.residual = std::sqrt(res.cost / static_cast<double>(n));
    return fit;
}

namespace detail {

// Jacobi eigenvalues of a small symmetric matrix (row-major n x n).
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (apq == 0.0) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i * n + i];
    return ev;
}

// Inverse of a small SPD-ish matrix via Gauss-Jordan; returns empty on failure.
inline std::vector<double> invert_dense(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (a[piv * n + col] == 0.0) return {};
        if (piv != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a[piv * n + c], a[col * n + c]);
                std::swap(inv[piv * n + c], inv[col * n + c]);
            }
        double d = a[col * n + col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col * n + c] /= d;
            inv[col * n + c] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double fct = a[r * n + col];
            if (fct == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a[r * n + c] -= fct * a[col * n + c];
                inv[r * n + c] -= fct * inv[col * n + c];
            }
        }
    }
    return inv;
}

}  // namespace detail

struct ParamFitOptions {
    bool equal_gamma = false;     // enforce gamma1 == gamma2
    double tuning_guess = 0.0;    // initial tuning (s^-1)
    std::size_t max_iterations = 10000;
    double cost_rel_tol = 1e-10;
};

// Inverse problem: recover (gamma1, gamma2, gamma_c, kappa, tuning, omega1)
// from a measured band by least squares against comb_spectrum. Rates are
// fitted in log space (positivity); tuning and omega1 in units of fsr1/1000
// for conditioning. Deterministic: fixed iteration order, no randomness.
inline ParamFitResult extract_system_params(const Spectrum& spec, const DeviceGeometry& geom,
                                            const SystemParams& initial_guess,
                                            const ParamFitOptions& opt = {}) {
    spec.validate();
    geom.validate();
    initial_guess.validate();
    require(spec.freqs.front() + geom.fsr1 < spec.freqs.back(),
            "extract_system_params: spectrum must span at least 2 main-ring resonances");
    require(initial_guess.gamma1 > 0.0 && initial_guess.gamma2 > 0.0 &&
                initial_guess.gamma_c > 0.0 && initial_guess.kappa > 0.0,
            "extract_system_params: initial rates must be positive");

    const double fscale = geom.fsr1 / 1000.0;
    const bool eq = opt.equal_gamma;
    // theta: [ln g1, (ln g2), ln gc, ln kappa, tuning/fscale, (w1 - w1_guess)/fscale]
    std::vector<double> theta;
    theta.push_back(std::log(initial_guess.gamma1));
    if (!eq) theta.push_back(std::log(initial_guess.gamma2));
    theta.push_back(std::log(initial_guess.gamma_c));
    theta.push_back(std::log(initial_guess.kappa));
    theta.push_back(opt.tuning_guess / fscale);
    theta.push_back(0.0);
    const std::size_t np = theta.size();

    auto unpack = [&](const std::vector<double>& t, SystemParams& p, double& tuning) {
        std::size_t k = 0;
        p = initial_guess;
        p.delta_omega = 0.0;
        p.gamma1 = std::exp(t[k++]);
        p.gamma2 = eq ? p.gamma1 : std::exp(t[k++]);
        p.gamma_c = std::exp(t[k++]);
        p.kappa = std::exp(t[k++]);
        tuning = t[k++] * fscale;
        p.omega1 = initial_guess.omega1 + t[k++] * fscale;
    };

    auto resid = [&](const std::vector<double>& t, std::vector<double>& rv) {
        SystemParams p;
        double tuning = 0.0;
        unpack(t, p, tuning);
        Spectrum model = comb_spectrum(p, geom, tuning, spec.freqs);
        for (std::size_t i = 0; i < rv.size(); ++i) rv[i] = model.values[i] - spec.values[i];
    };

    LevMarOptions lmopt;
    lmopt.max_iterations = opt.max_iterations;
    lmopt.cost_rel_tol = opt.cost_rel_tol;
    lmopt.typical_scale.assign(np, 1.0);
    lmopt.typical_scale[np - 2] = 100.0;  // tuning, in fsr1/1000 units
    lmopt.typical_scale[np - 1] = 100.0;  // omega1 offset
    lmopt.max_step_scale = 0.7;           // log-rates move at most x2 per step
    LevMarResult res = levmar_fit(resid, theta, spec.freqs.size(), lmopt);
    if (!res.converged)
        throw convergence_error("extract_system_params: iteration cap reached");

    ParamFitResult out;
    unpack(res.params, out.params, out.tuning);
    out.cost = res.cost;
    out.iterations = res.iterations;

    // covariance of theta from the local quadratic model, then mapped to
    // physical units (log-rate variance scales by the rate squared)
    const std::size_t n = spec.freqs.size();
    double s2 = n > np ? res.cost / static_cast<double>(n - np) : 0.0;
    std::vector<double> cov = detail::invert_dense(res.jtj, np);
    // condition number of the correlation-normalized J^T J, so pure column
    // scaling does not masquerade as degeneracy
    std::vector<double> scaled(np * np, 0.0);
    bool zero_diag = false;
    for (std::size_t a = 0; a < np; ++a) {
        double da = res.jtj[a * np + a];
        if (!(da > 0.0)) zero_diag = true;
    }
    if (!zero_diag) {
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b)
                scaled[a * np + b] = res.jtj[a * np + b] /
                                     std::sqrt(res.jtj[a * np + a] * res.jtj[b * np + b]);
    }
    std::vector<double> ev =
        zero_diag ? std::vector<double>{0.0, 1.0} : detail::symmetric_eigenvalues(scaled, np);
    double emax = *std::max_element(ev.begin(), ev.end());
    double emin = *std::min_element(ev.begin(), ev.end());
    out.non_identifiable = !(emin > 0.0) || emax / emin > 1e8;

    std::vector<double> grad_scale;  // d(physical)/d(theta_k)
    grad_scale.push_back(out.params.gamma1);
    if (!eq) grad_scale.push_back(out.params.gamma2);
    grad_scale.push_back(out.params.gamma_c);
    grad_scale.push_back(out.params.kappa);
    grad_scale.push_back(fscale);
    grad_scale.push_back(fscale);
    out.covariance_diag.assign(np, 0.0);
    if (!cov.empty())
        for (std::size_t k = 0; k < np; ++k)
            out.covariance_diag[k] = s2 * cov[k * np + k] * grad_scale[k] * grad_scale[k];
    return out;
}

}  // namespace ptring
