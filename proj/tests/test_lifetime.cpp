#include <catch2/catch_amalgamated.hpp>

#include "ptring/lifetime.hpp"
#include "ptring/rng.hpp"

using namespace ptring;
using Catch::Approx;

namespace {
SystemParams device_params() { return SystemParams{193.0e12, 0.0, 3.0e9, 3.0e9, 146.8e9, 45.5e9}; }
}  // namespace

TEST_CASE("tau_high_q", "[lifetime]") {
    SystemParams p = device_params();
    CHECK(tau_high_q(p) == Approx(166.67e-12).epsilon(1e-3));
    // the characterization quotes 167.7 ps from the unrounded gamma1; within 2 ps
    CHECK(std::abs(tau_high_q(p) - 167.7e-12) < 2e-12);

    p.gamma1 = 0.5e9;
    CHECK(tau_high_q(p) == Approx(1.0e-9).epsilon(1e-12));

    SystemParams q = device_params();
    q.gamma1 = 2.0 * p.gamma1;
    CHECK(tau_high_q(q) == Approx(tau_high_q(p) / 2.0).epsilon(1e-12));

    q.gamma1 = 0.0;
    CHECK_THROWS_AS(tau_high_q(q), numeric_error);
}

TEST_CASE("tau_low_q", "[lifetime]") {
    SystemParams p = device_params();
    CHECK(tau_low_q(p) == Approx(6.812e-12).epsilon(1e-3));
    p.gamma_c = 100.0e9;
    CHECK(tau_low_q(p) == Approx(10.0e-12).epsilon(1e-12));
    p.gamma_c = 1.0e12;
    CHECK(tau_low_q(p) == Approx(1.0e-12).epsilon(1e-12));
    p.gamma_c = 0.0;
    CHECK_THROWS_AS(tau_low_q(p), numeric_error);
}

TEST_CASE("tau_exact", "[lifetime]") {
    SECTION("decoupled limit") {
        SystemParams p{1.0e12, 0.0, 4.0e9, 2.0e9, 48.0e9, 0.0};
        auto [tp, tm] = tau_exact(p);
        CHECK(tp == Approx(1.0 / 4.0e9).epsilon(1e-10));           // 1/gamma1
        CHECK(tm == Approx(1.0 / 50.0e9).epsilon(1e-10));          // 1/(gamma2+gamma_c)
    }
    SECTION("near-EP device: both branches 13.1 ps") {
        auto [tp, tm] = tau_exact(device_params());
        CHECK(tp == Approx(1.0 / (2.0 * 38.2e9)).epsilon(1e-9));
        CHECK(tm == Approx(1.0 / (2.0 * 38.2e9)).epsilon(1e-9));
        CHECK(tp * 1e12 == Approx(13.089).epsilon(1e-3));
    }
    SECTION("degenerate at the EP") {
        SystemParams p = device_params();
        p.kappa = p.gamma_c / 4.0;
        auto [tp, tm] = tau_exact(p);
        CHECK(tp == Approx(tm).epsilon(1e-9));
    }
    SECTION("purely real eigenvalue is an error") {
        SystemParams p{1.0e12, 0.0, 0.0, 0.0, 0.0, 5.0e9};
        CHECK_THROWS_AS(tau_exact(p), infinite_lifetime_error);
    }
}

TEST_CASE("lifetime contrast", "[lifetime]") {
    SystemParams p = device_params();
    CHECK(lifetime_contrast(p) == Approx(146.8 / 6.0).epsilon(1e-12));
    CHECK(lifetime_contrast(p) == Approx(24.47).epsilon(1e-3));

    SystemParams q = p;
    q.gamma_c = 2.0 * q.gamma1;
    CHECK(lifetime_contrast(q) == Approx(1.0).epsilon(1e-12));

    SECTION("identity with the two estimators") {
        Rng rng(31);
        for (int i = 0; i < 200; ++i) {
            SystemParams r{1.0e12,
                           0.0,
                           1e6 + rng.uniform() * 1e10,
                           1e6 + rng.uniform() * 1e10,
                           1e6 + rng.uniform() * 3e11,
                           rng.uniform() * 1e11};
            CHECK(lifetime_contrast(r) ==
                  Approx(tau_high_q(r) / tau_low_q(r)).epsilon(1e-12));
        }
    }
}

TEST_CASE("jitter convolution", "[lifetime]") {
    SECTION("measured device values") {
        CHECK(convolve_jitter(156.4e-12, 74.5e-12, 53.5e-12) ==
              Approx(239.4e-12).margin(0.1e-12));
        CHECK(convolve_jitter(4.1e-12, 74.5e-12, 53.5e-12) ==
              Approx(91.9e-12).margin(0.1e-12));
    }
    SECTION("zero-jitter limit") {
        CHECK(convolve_jitter(10.0, 0.0, 0.0) == Approx(10.0 * std::sqrt(2.0)).epsilon(1e-14));
    }
    SECTION("monotone in each positive argument") {
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            double tau = rng.uniform() * 1e-9, j1 = rng.uniform() * 1e-10,
                   j2 = rng.uniform() * 1e-10;
            double base = convolve_jitter(tau, j1, j2);
            CHECK(convolve_jitter(tau * 1.01 + 1e-15, j1, j2) > base);
            CHECK(convolve_jitter(tau, j1 * 1.01 + 1e-15, j2) > base);
            CHECK(convolve_jitter(tau, j1, j2 * 1.01 + 1e-15) > base);
        }
    }
    SECTION("negative inputs rejected") {
        CHECK_THROWS_AS(convolve_jitter(-1.0, 0.0, 0.0), validation_error);
    }
}

TEST_CASE("jitter deconvolution", "[lifetime]") {
    SECTION("measured device values") {
        CHECK(deconvolve_jitter(239.4e-12, 74.5e-12, 53.5e-12) ==
              Approx(156.4e-12).margin(0.1e-12));
        CHECK(deconvolve_jitter(91.9e-12, 74.5e-12, 53.5e-12) ==
              Approx(4.1e-12).margin(0.1e-12));
    }
    SECTION("38-fold lifetime contrast between the two bias settings") {
        double t0 = deconvolve_jitter(239.4e-12, 74.5e-12, 53.5e-12);
        double t1 = deconvolve_jitter(91.9e-12, 74.5e-12, 53.5e-12);
        double ratio = t0 / t1;
        CHECK(ratio >= 37.0);
        CHECK(ratio <= 39.0);
    }
    SECTION("inverse identity") {
        for (double tau : {0.0, 1e-12, 50e-12, 1e-9})
            CHECK(deconvolve_jitter(std::sqrt(2.0) * tau, 0.0, 0.0) ==
                  Approx(tau).margin(1e-24));
    }
    SECTION("round trip over random valid inputs") {
        Rng rng(8);
        for (int i = 0; i < 500; ++i) {
            double tau = rng.uniform() * 1e-9;
            double j1 = rng.uniform() * 2e-10;
            double j2 = rng.uniform() * 2e-10;
            double rec = deconvolve_jitter(convolve_jitter(tau, j1, j2), j1, j2);
            CHECK(rec == Approx(tau).margin(1e-9 * 1e-9 + 1e-24));
        }
    }
    SECTION("boundary returns zero, below is an error") {
        CHECK(deconvolve_jitter(std::hypot(74.5, 53.5), 74.5, 53.5) == Approx(0.0).margin(1e-9));
        CHECK_THROWS_AS(deconvolve_jitter(80.0, 74.5, 53.5), jitter_domain_error);
    }
    SECTION("estimate struct carries the inputs") {
        LifetimeEstimate est = make_lifetime_estimate(239.4e-12, 74.5e-12, 53.5e-12);
        CHECK(est.tau == Approx(156.4e-12).margin(0.1e-12));
        CHECK(est.tau_1e == 239.4e-12);
        CHECK(est.tau_1e * est.tau_1e >= est.jitter1 * est.jitter1 + est.jitter2 * est.jitter2);
    }
}
