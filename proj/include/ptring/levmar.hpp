#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ptring/errors.hpp"

namespace ptring {

// Small dense Levenberg-Marquardt driver with finite-difference Jacobian.
// Cost is the plain sum of squared residuals; only improving steps are
// accepted, so the reported cost is non-increasing by construction.

struct LevMarOptions {
    std::size_t max_iterations = 10000;
    double cost_rel_tol = 1e-10;
    double fd_rel_step = 1e-6;
    // Per-parameter magnitude floor for the finite-difference step; empty
    // means max(|p|, 1) * fd_rel_step.
    std::vector<double> typical_scale;
    double lambda0 = 1e-3;
    // Cap on a single parameter update, in units of that parameter's typical
    // scale. Keeps early near-Gauss-Newton steps from jumping basins; 0
    // disables.
    double max_step_scale = 0.0;
};

struct LevMarResult {
    std::vector<double> params;
    double cost = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    // J^T J at the solution, row-major p x p (for covariance estimates).
    std::vector<double> jtj;
};

namespace detail {

// Gaussian elimination with partial pivoting; returns false if singular.
inline bool solve_dense(std::vector<double> a, std::vector<double> b,
                        std::size_t n, std::vector<double>& x) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (a[piv * n + col] == 0.0) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return true;
}

}  // namespace detail

// residual_fn fills r (size n_res) from p (size n_par).
inline LevMarResult levmar_fit(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& residual_fn,
    std::vector<double> p, std::size_t n_res, const LevMarOptions& opt = {}) {
    const std::size_t np = p.size();
    std::vector<double> r(n_res), r_try(n_res), p_try(np);
    std::vector<double> jac(n_res * np);  // column-major: jac[j*n_res + i]

    auto cost_of = [](const std::vector<double>& rv) {
        double s = 0.0;
        for (double v : rv) s += v * v;
        return s;
    };

    residual_fn(p, r);
    double cost = cost_of(r);
    double lambda = opt.lambda0;

    LevMarResult out;
    out.params = p;
    out.cost = cost;

    std::vector<double> jtj(np * np), jtr(np), aug(np * np), step(np);

    auto build_normal_eqs = [&]() {
        for (std::size_t j = 0; j < np; ++j) {
            double typ = (j < opt.typical_scale.size() && opt.typical_scale[j] > 0.0)
                             ? opt.typical_scale[j]
                             : std::max(std::abs(p[j]), 1.0);
            double h = opt.fd_rel_step * std::max(std::abs(p[j]), typ);
            if (h == 0.0) h = opt.fd_rel_step;
            p_try = p;
            p_try[j] += h;
            residual_fn(p_try, r_try);
            for (std::size_t i = 0; i < n_res; ++i)
                jac[j * n_res + i] = (r_try[i] - r[i]) / h;
        }
        for (std::size_t a = 0; a < np; ++a) {
            for (std::size_t b = a; b < np; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < n_res; ++i)
                    s += jac[a * n_res + i] * jac[b * n_res + i];
                jtj[a * np + b] = jtj[b * np + a] = s;
            }
            double g = 0.0;
            for (std::size_t i = 0; i < n_res; ++i) g += jac[a * n_res + i] * r[i];
            jtr[a] = g;
        }
    };

    std::size_t iter = 0;
    for (; iter < opt.max_iterations; ++iter) {
        build_normal_eqs();

        bool improved = false;
        for (int damp_try = 0; damp_try < 60; ++damp_try) {
            aug = jtj;
            for (std::size_t a = 0; a < np; ++a) {
                double d = jtj[a * np + a];
                aug[a * np + a] = d + lambda * (d > 0.0 ? d : 1.0);
            }
            std::vector<double> rhs(np);
            for (std::size_t a = 0; a < np; ++a) rhs[a] = -jtr[a];
            if (!detail::solve_dense(aug, rhs, np, step)) {
                lambda *= 10.0;
                continue;
            }
            if (opt.max_step_scale > 0.0) {
                double excess = 1.0;
                for (std::size_t a = 0; a < np; ++a) {
                    double typ = (a < opt.typical_scale.size() && opt.typical_scale[a] > 0.0)
                                     ? opt.typical_scale[a]
                                     : std::max(std::abs(p[a]), 1.0);
                    excess = std::max(excess, std::abs(step[a]) / (opt.max_step_scale * typ));
                }
                if (excess > 1.0)
                    for (double& s : step) s /= excess;
            }
            p_try = p;
            for (std::size_t a = 0; a < np; ++a) p_try[a] += step[a];
            residual_fn(p_try, r_try);
            double cost_try = cost_of(r_try);
            if (std::isfinite(cost_try) && cost_try <= cost) {
                double rel_drop = (cost - cost_try) / std::max(cost, 1e-300);
                p = p_try;
                r = r_try;
                cost = cost_try;
                lambda = std::max(lambda / 3.0, 1e-14);
                improved = true;
                if (rel_drop < opt.cost_rel_tol) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 5.0;
            if (lambda > 1e15) break;
        }
        if (!improved) {
            // No downhill direction left at maximum damping: stationary.
            out.converged = true;
        }
        if (out.converged) break;
    }

    out.params = p;
    out.cost = cost;
    out.iterations = std::min(iter + 1, opt.max_iterations);
    build_normal_eqs();  // J^T J at the accepted solution
    out.jtj = jtj;
    return out;
}

}  // namespace ptring
