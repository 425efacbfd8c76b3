#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ptring/errors.hpp"
#include "ptring/rng.hpp"
#include "ptring/tcmt.hpp"
#include "ptring/timestamps.hpp"

namespace ptring {

// Forward model of the cavity SFWM pair source: Poisson pair emission with
// rate = pgr_coefficient * pump_power^2, independent exponential cavity
// decays for signal and idler from a common creation instant, Gaussian
// channel jitter (sigma = J), detector efficiency, dark counts. The
// resulting signal-idler time differences have variance
// 2 tau^2 + jitter1^2 + jitter2^2 exactly, which is what the jitter
// deconvolution inverts.
struct PairSourceConfig {
    double pgr_coefficient = 0.0;  // pairs / s / mW^2
    double pump_power = 0.0;       // mW
    double tau_signal = 0.0;       // s
    double tau_idler = 0.0;        // s
    double eff_signal = 1.0;
    double eff_idler = 1.0;
    double dark_signal = 0.0;  // s^-1
    double dark_idler = 0.0;   // s^-1
    double jitter_signal = 0.0;  // s
    double jitter_idler = 0.0;   // s
    double duration = 0.0;  // s
    std::uint64_t seed = 0;

    void validate() const {
        require(pgr_coefficient >= 0.0 && pump_power >= 0.0, "pair source: negative rate inputs");
        require(tau_signal >= 0.0 && tau_idler >= 0.0, "pair source: negative lifetime");
        require(eff_signal >= 0.0 && eff_signal <= 1.0 && eff_idler >= 0.0 && eff_idler <= 1.0,
                "pair source: efficiency must be in [0,1]");
        require(dark_signal >= 0.0 && dark_idler >= 0.0, "pair source: negative dark rate");
        require(jitter_signal >= 0.0 && jitter_idler >= 0.0, "pair source: negative jitter");
        require(duration > 0.0, "pair source: duration must be positive");
    }
};

inline double pair_rate(const PairSourceConfig& c) {
    c.validate();
    return c.pgr_coefficient * c.pump_power * c.pump_power;
}

struct DosWeightedRate {
    double rate = 0.0;
    bool window_warning = false;  // DOS at a window edge above 1e-3 of peak
};

namespace detail {

struct DosIntegral {
    double value = 0.0;
    bool edge_warning = false;
};

// Trapezoid integral of the unnormalized main-ring DOS over +-10 total
// linewidths around the hybridized resonances.
inline DosIntegral integrate_dos(const SystemParams& p, std::size_t n_points = 8193) {
    EigenSolution sol = eigenfrequencies(p);
    double center = (sol.omega_plus.real() + sol.omega_minus.real()) / 2.0;
    double total_width = p.gamma1 + p.gamma2 + p.gamma_c;
    double span = std::abs(sol.omega_plus.real() - sol.omega_minus.real());
    double half = 10.0 * total_width + span / 2.0 + std::abs(p.delta_omega);
    if (half <= 0.0) half = std::max(1.0, std::abs(p.omega1) * 1e-6);

    double lo = center - half;
    double step = 2.0 * half / static_cast<double>(n_points - 1);
    DosIntegral out;
    double peak = 0.0, first = 0.0, last = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) {
        double f = lo + step * static_cast<double>(i);
        double v = std::norm(steady_state_response(p, f, complexd(1.0, 0.0)).a1);
        peak = std::max(peak, v);
        if (i == 0) first = v;
        if (i + 1 == n_points) last = v;
        acc += (i == 0 || i + 1 == n_points) ? v / 2.0 : v;
    }
    out.value = acc * step;
    out.edge_warning = peak > 0.0 && std::max(first, last) > 1e-3 * peak;
    return out;
}

}  // namespace detail

// PGR scaled by the signal/idler DOS integrals relative to a reference
// configuration: rate * (I_signal * I_idler) / I_ref^2. SFWM happens in the
// main ring, so the |a1|^2 DOS is the weight.
inline DosWeightedRate dos_weighted_rate(const PairSourceConfig& c, const SystemParams& signal,
                                         const SystemParams& idler,
                                         const SystemParams& reference) {
    double base = pair_rate(c);
    detail::DosIntegral is = detail::integrate_dos(signal);
    detail::DosIntegral ii = detail::integrate_dos(idler);
    detail::DosIntegral ir = detail::integrate_dos(reference);
    if (ir.value <= 0.0)
        throw numeric_error("dos_weighted_rate: reference DOS integral is zero");
    DosWeightedRate out;
    out.rate = base * (is.value * ii.value) / (ir.value * ir.value);
    out.window_warning = is.edge_warning || ii.edge_warning || ir.edge_warning;
    return out;
}

namespace detail {

// round-half-even quantization to the 1 ps grid; drops events outside [0, dur]
inline void quantize_sort(std::vector<double>& raw_ps, double duration_ps,
                          std::vector<std::int64_t>& out) {
    out.clear();
    out.reserve(raw_ps.size());
    for (double t : raw_ps) {
        double q = std::nearbyint(t);
        if (q < 0.0 || q > duration_ps) continue;
        out.push_back(static_cast<std::int64_t>(q));
    }
    std::sort(out.begin(), out.end());
}

inline void append_dark_counts(Rng& rng, double rate, double duration_s,
                               std::vector<double>& times_ps) {
    if (rate <= 0.0) return;
    double t = rng.exponential(1.0 / rate);
    while (t < duration_s) {
        times_ps.push_back(t * 1e12);
        t += rng.exponential(1.0 / rate);
    }
}

}  // namespace detail

// Photon-pair timestamp streams. Deterministic for a given config (the seed
// is part of the config; there is no global RNG state).
inline std::pair<TimestampStream, TimestampStream> generate_pair_streams(
    const PairSourceConfig& c) {
    c.validate();
    Rng rng(c.seed);
    const double rate = pair_rate(c);
    const double duration_ps = c.duration * 1e12;

    std::vector<double> sig_raw, idl_raw;
    if (rate > 0.0) {
        const double mean_gap = 1.0 / rate;
        double t = rng.exponential(mean_gap);
        while (t < c.duration) {
            double ts = t + rng.exponential(c.tau_signal) + rng.normal(0.0, c.jitter_signal);
            bool keep_s = rng.bernoulli(c.eff_signal);
            double ti = t + rng.exponential(c.tau_idler) + rng.normal(0.0, c.jitter_idler);
            bool keep_i = rng.bernoulli(c.eff_idler);
            if (keep_s) sig_raw.push_back(ts * 1e12);
            if (keep_i) idl_raw.push_back(ti * 1e12);
            t += rng.exponential(mean_gap);
        }
    }
    detail::append_dark_counts(rng, c.dark_signal, c.duration, sig_raw);
    detail::append_dark_counts(rng, c.dark_idler, c.duration, idl_raw);

    TimestampStream sig{"signal", {}}, idl{"idler", {}};
    detail::quantize_sort(sig_raw, duration_ps, sig.times_ps);
    detail::quantize_sort(idl_raw, duration_ps, idl.times_ps);
    return {std::move(sig), std::move(idl)};
}

// Franson fringe at the counting-statistics level: coincidences are Poisson
// around base_rate * T * (1 + V cos(phase)) / 2; singles are phase-independent.
struct FransonConfig {
    double phase = 0.0;  // radians
    double visibility_true = 0.0;
    double base_rate = 0.0;          // s^-1 (coincidences at fringe mean * 2)
    double singles_rate_signal = 0.0;  // s^-1
    double singles_rate_idler = 0.0;   // s^-1
    double integration_time = 0.0;     // s
    std::uint64_t seed = 0;

    void validate() const {
        require(visibility_true >= 0.0 && visibility_true <= 1.0,
                "franson: visibility must be in [0,1]");
        require(base_rate >= 0.0 && singles_rate_signal >= 0.0 && singles_rate_idler >= 0.0,
                "franson: negative rate");
        require(integration_time > 0.0, "franson: integration time must be positive");
    }
};

struct FransonCounts {
    std::int64_t singles_signal = 0;
    std::int64_t singles_idler = 0;
    std::int64_t coincidences = 0;
};

inline FransonCounts simulate_franson(const FransonConfig& c) {
    c.validate();
    Rng rng(c.seed);
    FransonCounts out;
    double mean_cc = c.base_rate * c.integration_time *
                     (1.0 + c.visibility_true * std::cos(c.phase)) / 2.0;
    out.singles_signal = rng.poisson(c.singles_rate_signal * c.integration_time);
    out.singles_idler = rng.poisson(c.singles_rate_idler * c.integration_time);
    out.coincidences = rng.poisson(std::max(mean_cc, 0.0));
    return out;
}

struct HbtStreams {
    TimestampStream herald;
    TimestampStream arm1;
    TimestampStream arm2;
};

// Heralded-HBT forward model: per coherence window the pair count is
// Poisson(mean_pairs_per_window); signal photons land in the herald stream,
// idlers are split between the two arms, and every timestamp carries the
// exponential decay + jitter decoration of generate_pair_streams. Multi-pair
// windows are what produces nonzero heralded g2(0).
inline HbtStreams simulate_hbt(const PairSourceConfig& c, double mean_pairs_per_window,
                               double splitter_ratio, std::int64_t n_windows, std::uint64_t seed,
                               double window_period_ps = 10000.0) {
    c.validate();
    require(mean_pairs_per_window >= 0.0, "simulate_hbt: mean pairs must be >= 0");
    require(splitter_ratio > 0.0 && splitter_ratio < 1.0,
            "simulate_hbt: splitter ratio must be in (0,1)");
    require(n_windows >= 1, "simulate_hbt: need at least one window");
    require(window_period_ps > 0.0, "simulate_hbt: window period must be positive");

    Rng rng(seed);
    std::vector<double> herald_raw, arm1_raw, arm2_raw;
    const double tau_s_ps = c.tau_signal * 1e12;
    const double tau_i_ps = c.tau_idler * 1e12;
    const double j_s_ps = c.jitter_signal * 1e12;
    const double j_i_ps = c.jitter_idler * 1e12;

    for (std::int64_t w = 0; w < n_windows; ++w) {
        std::int64_t pairs = rng.poisson(mean_pairs_per_window);
        double t0 = static_cast<double>(w + 1) * window_period_ps;
        for (std::int64_t k = 0; k < pairs; ++k) {
            double ts = t0 + rng.exponential(tau_s_ps) + rng.normal(0.0, j_s_ps);
            bool keep_s = rng.bernoulli(c.eff_signal);
            double ti = t0 + rng.exponential(tau_i_ps) + rng.normal(0.0, j_i_ps);
            bool keep_i = rng.bernoulli(c.eff_idler);
            bool to_arm1 = rng.bernoulli(splitter_ratio);
            if (keep_s) herald_raw.push_back(ts);
            if (keep_i) (to_arm1 ? arm1_raw : arm2_raw).push_back(ti);
        }
    }
    double duration_ps = static_cast<double>(n_windows + 2) * window_period_ps;
    HbtStreams out;
    out.herald.channel = "herald";
    out.arm1.channel = "arm1";
    out.arm2.channel = "arm2";
    detail::quantize_sort(herald_raw, duration_ps, out.herald.times_ps);
    detail::quantize_sort(arm1_raw, duration_ps, out.arm1.times_ps);
    detail::quantize_sort(arm2_raw, duration_ps, out.arm2.times_ps);
    return out;
}

}  // namespace ptring
