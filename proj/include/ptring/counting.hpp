#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ptring/errors.hpp"
#include "ptring/levmar.hpp"
#include "ptring/rng.hpp"
#include "ptring/timestamps.hpp"

namespace ptring {

// Binned start-stop time differences (stop - start), bin centers at integer
// multiples of bin_width_ps symmetric about zero.
struct CoincidenceHistogram {
    double bin_width_ps = 0.0;
    std::vector<double> offsets_ps;
    std::vector<std::int64_t> counts;
    std::string start_channel;
    std::string stop_channel;
    std::int64_t total_starts = 0;
};

// Multi-stop histogram: every (start, stop) pair with |dt| <= span/2
// contributes. Two-sorted-list merge, linear in events plus matches.
inline CoincidenceHistogram coincidence_histogram(const TimestampStream& start,
                                                  const TimestampStream& stop,
                                                  double bin_width_ps, double span_ps) {
    require(bin_width_ps > 0.0, "histogram: bin width must be positive");
    require(span_ps >= bin_width_ps, "histogram: span must cover at least one bin");
    const double half = span_ps / 2.0;
    const std::int64_t k_max = std::llround(half / bin_width_ps);
    CoincidenceHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.start_channel = start.channel;
    h.stop_channel = stop.channel;
    h.total_starts = static_cast<std::int64_t>(start.times_ps.size());
    h.offsets_ps.resize(2 * k_max + 1);
    h.counts.assign(2 * k_max + 1, 0);
    for (std::int64_t k = -k_max; k <= k_max; ++k)
        h.offsets_ps[k + k_max] = static_cast<double>(k) * bin_width_ps;

    std::size_t lo = 0;
    for (std::int64_t s : start.times_ps) {
        while (lo < stop.times_ps.size() &&
               static_cast<double>(stop.times_ps[lo] - s) < -half)
            ++lo;
        for (std::size_t j = lo; j < stop.times_ps.size(); ++j) {
            double dt = static_cast<double>(stop.times_ps[j] - s);
            if (dt > half) break;
            // bins cover [k*bw - bw/2, k*bw + bw/2); the rounding must stay
            // translation-consistent (not half-away-from-zero) or RMS peak
            // widths inherit a half-resolution bias
            std::int64_t k = static_cast<std::int64_t>(std::floor(dt / bin_width_ps + 0.5));
            h.counts[k + k_max]++;
        }
    }
    return h;
}

struct DoubleExpFit {
    double tau_1e_ps = 0.0;     // quadrature (RMS) width of the peak; the
                                // quantity the jitter relation inverts
    double amplitude = 0.0;     // fitted profile amplitude above baseline
    double baseline = 0.0;      // fitted flat background per bin
    double center_ps = 0.0;     // fitted peak position
    double exp_scale_ps = 0.0;  // least-squares double-exponential scale
};

// Fits the coincidence peak. Two widths come out of this:
//  - exp_scale_ps: scale of the least-squares profile A exp(-|dt-t0|/b) + B
//    over |dt - t0| <= 5 * (initial width estimate);
//  - tau_1e_ps: baseline-subtracted RMS width (Sheppard-corrected, window
//    iterated at +-8 sigma). The RMS width obeys the quadrature law
//    tau_1e^2 = 2 tau^2 + J1^2 + J2^2 for jitter-convolved double-exponential
//    peaks of any jitter/lifetime ratio, which the exponential scale does
//    not, so tau_1e is what feeds the lifetime deconvolution.
inline DoubleExpFit fit_double_exponential(const CoincidenceHistogram& h) {
    const std::size_t n = h.counts.size();
    require(n >= 5, "double-exp fit: histogram too small");

    std::vector<std::int64_t> sorted = h.counts;
    std::sort(sorted.begin(), sorted.end());
    double median = static_cast<double>(sorted[n / 2]);
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (h.counts[i] > h.counts[imax]) imax = i;
    double peak = static_cast<double>(h.counts[imax]);
    if (!(peak >= 5.0 * std::max(median, 1.0)))
        throw no_peak_error("double-exp fit: no dominant peak (max < 5x median)");

    // initial baseline from the outer wings (beyond 80% of the half-span)
    double t0 = h.offsets_ps[imax];
    const double half_span = (h.offsets_ps.back() - h.offsets_ps.front()) / 2.0;
    double base = 0.0;
    {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(h.offsets_ps[i] - t0) > 0.8 * half_span) {
                acc += static_cast<double>(h.counts[i]);
                ++cnt;
            }
        if (cnt > 0) base = acc / static_cast<double>(cnt);
    }

    // iterative baseline-subtracted second moment
    const double bw = h.bin_width_ps;
    double sigma = 3.0 * bw;
    double mean = t0;
    for (int pass = 0; pass < 60; ++pass) {
        // unclipped baseline subtraction: clipping negative wing residuals
        // would bias the second moment upward
        double w_sum = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(h.offsets_ps[i] - mean) > 8.0 * sigma) continue;
            double c = static_cast<double>(h.counts[i]) - base;
            w_sum += c;
            m1 += c * h.offsets_ps[i];
        }
        if (w_sum <= 0.0) throw no_peak_error("double-exp fit: peak vanished under baseline");
        m1 /= w_sum;
        double m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(h.offsets_ps[i] - mean) > 8.0 * sigma) continue;
            double c = static_cast<double>(h.counts[i]) - base;
            m2 += c * (h.offsets_ps[i] - m1) * (h.offsets_ps[i] - m1);
        }
        m2 = m2 / w_sum - bw * bw / 12.0;  // Sheppard correction
        double next = std::sqrt(std::max(m2, bw * bw / 12.0));
        double prev = sigma;
        sigma = next;
        mean = m1;
        if (std::abs(next - prev) < 1e-9 * std::max(prev, 1.0)) break;
    }

    // least-squares profile over the peak region
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(h.offsets_ps[i] - mean) <= 5.0 * sigma) {
            xs.push_back(h.offsets_ps[i]);
            ys.push_back(static_cast<double>(h.counts[i]));
        }
    require(xs.size() >= 5, "double-exp fit: peak region too small");
    double a0 = std::max(peak - base, 1.0);
    std::vector<double> p0{a0, std::log(std::max(sigma / 1.4142135623730951, bw)), mean, base};
    auto resid = [&](const std::vector<double>& p, std::vector<double>& rv) {
        double scale = std::exp(p[1]);
        for (std::size_t i = 0; i < xs.size(); ++i)
            rv[i] = p[0] * std::exp(-std::abs(xs[i] - p[2]) / scale) + p[3] - ys[i];
    };
    LevMarOptions opt;
    opt.max_iterations = 10000;
    opt.cost_rel_tol = 1e-12;
    opt.typical_scale = {a0, 1.0, std::max(sigma, bw), std::max(a0 * 0.01, 1.0)};
    LevMarResult res = levmar_fit(resid, p0, xs.size(), opt);
    if (!res.converged)
        throw convergence_error("double-exp fit: iteration cap reached");

    DoubleExpFit out;
    out.tau_1e_ps = sigma;
    out.amplitude = res.params[0];
    out.exp_scale_ps = std::exp(res.params[1]);
    out.center_ps = res.params[2];
    out.baseline = res.params[3];
    return out;
}

struct CarResult {
    double car = 0.0;
    double sigma = 0.0;
    bool lower_bound = false;  // accidental sum was zero; value uses 1 count
};

// Coincidence-to-accidental ratio: peak-window sum over the mean count per
// equal-width window estimated from the wings at |offset| >= acc_window/2.
inline CarResult car(const CoincidenceHistogram& h, double peak_window_ps,
                     double accidental_window_ps) {
    require(peak_window_ps > 0.0 && accidental_window_ps > 0.0, "car: windows must be positive");
    require(accidental_window_ps / 2.0 > peak_window_ps / 2.0,
            "car: accidental window must be disjoint from the peak window");
    require(accidental_window_ps / 2.0 <= std::abs(h.offsets_ps.back()) + h.bin_width_ps / 2.0,
            "car: accidental window outside the histogram span");

    double peak_sum = 0.0, acc_sum = 0.0;
    std::int64_t n_peak = 0, n_acc = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        double off = std::abs(h.offsets_ps[i]);
        if (off <= peak_window_ps / 2.0) {
            peak_sum += static_cast<double>(h.counts[i]);
            ++n_peak;
        } else if (off >= accidental_window_ps / 2.0) {
            acc_sum += static_cast<double>(h.counts[i]);
            ++n_acc;
        }
    }
    require(n_peak > 0, "car: empty peak window");
    require(n_acc > 0, "car: empty accidental region");

    CarResult out;
    double acc_eff = acc_sum;
    if (acc_sum == 0.0) {
        out.lower_bound = true;
        acc_eff = 1.0;
    }
    double acc_per_window = acc_eff * static_cast<double>(n_peak) / static_cast<double>(n_acc);
    out.car = peak_sum / acc_per_window;
    if (peak_sum > 0.0)
        out.sigma = out.car * std::sqrt(1.0 / peak_sum + 1.0 / acc_eff);
    return out;
}

struct VisibilityResult {
    double visibility = 0.0;
    double sigma = 0.0;
    double fit_amplitude = 0.0;
    double fit_offset = 0.0;
    double fit_phase = 0.0;
    std::int64_t n_trials = 0;
};

namespace detail {

// Linear least squares of C = c0 + a cos(phi) + b sin(phi).
inline bool fringe_lsq(const std::vector<double>& phases, const std::vector<double>& counts,
                       double& c0, double& a, double& b) {
    double s[3][3] = {{0}}, rhs[3] = {0};
    for (std::size_t i = 0; i < phases.size(); ++i) {
        double basis[3] = {1.0, std::cos(phases[i]), std::sin(phases[i])};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += basis[r] * counts[i];
            for (int c = 0; c < 3; ++c) s[r][c] += basis[r] * basis[c];
        }
    }
    // 3x3 Gauss with partial pivot
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(s[idx[r]][col]) > std::abs(s[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        if (s[idx[col]][col] == 0.0) return false;
        for (int r = col + 1; r < 3; ++r) {
            double f = s[idx[r]][col] / s[idx[col]][col];
            for (int c = col; c < 3; ++c) s[idx[r]][c] -= f * s[idx[col]][c];
            rhs[idx[r]] -= f * rhs[idx[col]];
        }
    }
    double x[3];
    for (int r = 2; r >= 0; --r) {
        double acc = rhs[idx[r]];
        for (int c = r + 1; c < 3; ++c) acc -= s[idx[r]][c] * x[c];
        x[r] = acc / s[idx[r]][r];
    }
    c0 = x[0];
    a = x[1];
    b = x[2];
    return true;
}

}  // namespace detail

// Fringe fit C(phi) = O (1 + V cos(phi - phi0)) on raw counts (no accidental
// subtraction), V from the fitted curve. The uncertainty is the standard
// deviation of V over n_trials Poisson resamples of the observed counts;
// trial substreams are derived from (seed, trial), so the result does not
// depend on evaluation order.
inline VisibilityResult visibility_fit(const std::vector<double>& phases,
                                       const std::vector<double>& coincidences,
                                       std::int64_t n_trials, std::uint64_t seed) {
    require(phases.size() == coincidences.size(), "visibility: length mismatch");
    require(phases.size() >= 5, "visibility: need at least 5 phase points");
    double ph_min = *std::min_element(phases.begin(), phases.end());
    double ph_max = *std::max_element(phases.begin(), phases.end());
    require(ph_max - ph_min >= 3.14159265358979, "visibility: phases must span at least pi");
    for (double c : coincidences) require(c >= 0.0, "visibility: negative count");
    require(n_trials >= 1, "visibility: need at least one trial");

    double cmin = *std::min_element(coincidences.begin(), coincidences.end());
    double cmax = *std::max_element(coincidences.begin(), coincidences.end());
    if (cmin == cmax)
        throw degenerate_fit_error("visibility: all counts equal");

    double c0 = 0.0, a = 0.0, b = 0.0;
    if (!detail::fringe_lsq(phases, coincidences, c0, a, b) || c0 <= 0.0)
        throw degenerate_fit_error("visibility: fringe fit is degenerate");

    VisibilityResult out;
    out.fit_offset = c0;
    out.fit_amplitude = std::hypot(a, b);
    out.fit_phase = std::atan2(b, a);
    out.visibility = out.fit_amplitude / c0;
    out.n_trials = n_trials;

    std::vector<double> resampled(phases.size());
    std::vector<double> vs;
    vs.reserve(static_cast<std::size_t>(n_trials));
    for (std::int64_t t = 0; t < n_trials; ++t) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(t));
        for (std::size_t i = 0; i < phases.size(); ++i)
            resampled[i] = static_cast<double>(rng.poisson(coincidences[i]));
        double tc0, ta, tb;
        if (!detail::fringe_lsq(phases, resampled, tc0, ta, tb) || tc0 <= 0.0) continue;
        vs.push_back(std::hypot(ta, tb) / tc0);
    }
    if (vs.size() >= 2) {
        double m = 0.0;
        for (double v : vs) m += v;
        m /= static_cast<double>(vs.size());
        double var = 0.0;
        for (double v : vs) var += (v - m) * (v - m);
        out.sigma = std::sqrt(var / static_cast<double>(vs.size() - 1));
    }
    return out;
}

struct BellCheck {
    bool violates = false;
    double margin = 0.0;
};

// Strict threshold at 1/sqrt(2).
inline BellCheck bell_threshold_check(const VisibilityResult& r) {
    constexpr double threshold = 0.70710678118654752440;
    return BellCheck{r.visibility > threshold, r.visibility - threshold};
}

struct G2Result {
    std::vector<double> delays_ps;
    std::vector<double> g2;
    double g2_zero = 0.0;
    double sigma_zero = 0.0;
};

namespace detail {

// counts of stream events within +-w/2 of each (reference + shift) position
inline void window_counts(const std::vector<std::int64_t>& reference, double shift,
                          const std::vector<std::int64_t>& stream, double half_window,
                          std::vector<std::int32_t>& out) {
    out.assign(reference.size(), 0);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        double center = static_cast<double>(reference[i]) + shift;
        while (lo < stream.size() && static_cast<double>(stream[lo]) < center - half_window)
            ++lo;
        for (std::size_t j = lo; j < stream.size(); ++j) {
            if (static_cast<double>(stream[j]) > center + half_window) break;
            out[i]++;
        }
    }
}

}  // namespace detail

// Heralded second-order autocorrelation over matched coincidence windows:
// g2(d) = N3(d) Nh / (N_h1 * N_h2(d)), arm 2 shifted by d.
inline G2Result heralded_g2(const TimestampStream& herald, const TimestampStream& arm1,
                            const TimestampStream& arm2, double coincidence_window_ps,
                            const std::vector<double>& delays_ps) {
    require(coincidence_window_ps > 0.0, "heralded_g2: window must be positive");
    require(!delays_ps.empty(), "heralded_g2: need at least one delay");
    const double hw = coincidence_window_ps / 2.0;
    const auto& hs = herald.times_ps;
    const std::int64_t n_h = static_cast<std::int64_t>(hs.size());

    std::vector<std::int32_t> n1, n2;
    detail::window_counts(hs, 0.0, arm1.times_ps, hw, n1);
    std::int64_t n_h1 = 0;
    for (auto v : n1) n_h1 += v;

    G2Result out;
    out.delays_ps = delays_ps;
    out.g2.reserve(delays_ps.size());
    double best_zero = std::numeric_limits<double>::max();
    for (double d : delays_ps) {
        detail::window_counts(hs, d, arm2.times_ps, hw, n2);
        std::int64_t n_h2 = 0, n3 = 0;
        for (std::size_t i = 0; i < n2.size(); ++i) {
            n_h2 += n2[i];
            n3 += static_cast<std::int64_t>(n1[i]) * n2[i];
        }
        if (n_h1 <= 0 || n_h2 <= 0)
            throw insufficient_statistics_error(
                "heralded_g2: no herald-arm coincidences at delay " + std::to_string(d));
        double g = static_cast<double>(n3) * static_cast<double>(n_h) /
                   (static_cast<double>(n_h1) * static_cast<double>(n_h2));
        out.g2.push_back(g);
        if (std::abs(d) < best_zero) {
            best_zero = std::abs(d);
            out.g2_zero = g;
            double n3_eff = std::max<double>(static_cast<double>(n3), 1.0);
            double scale = static_cast<double>(n_h) /
                           (static_cast<double>(n_h1) * static_cast<double>(n_h2));
            double rel = std::sqrt(1.0 / n3_eff + 1.0 / static_cast<double>(n_h) +
                                   1.0 / static_cast<double>(n_h1) +
                                   1.0 / static_cast<double>(n_h2));
            out.sigma_zero = (n3 > 0 ? g : n3_eff * scale) * rel;
        }
    }
    return out;
}

}  // namespace ptring
