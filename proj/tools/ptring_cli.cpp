// ptring command-line front end: spectrum synthesis and fitting, lifetime
// prediction, detuning sweeps, photon-pair simulation, and counting analysis.
// Exit codes: 0 success, 2 input/validation failure, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ptring/counting.hpp"
#include "ptring/json_io.hpp"
#include "ptring/lifetime.hpp"
#include "ptring/pair_source.hpp"
#include "ptring/spectra_fit.hpp"
#include "ptring/spectrum.hpp"
#include "ptring/tcmt.hpp"
#include "ptring/timestamps.hpp"

namespace {

constexpr double kSpeedOfLight = 299792458.0;  // m/s

double nm_to_hz(double nm) { return kSpeedOfLight / (nm * 1e-9); }

// Flat-JSON config files: {"flag-name": value, ...}. The file is expanded
// into --flag=value arguments placed right after the subcommand name, so
// explicit command-line flags (parsed later, TakeLast policy) override it.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;

    std::ifstream is(config_path);
    if (!is) throw ptring::validation_error("cannot open config file " + config_path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ptring::validation_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ptring::validation_error("config must be a JSON object");

    std::vector<std::string> expanded;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string v;
        if (it.value().is_boolean()) {
            v = it.value().get<bool>() ? "true" : "false";
        } else if (it.value().is_string()) {
            v = it.value().get<std::string>();
        } else {
            v = it.value().dump();
        }
        expanded.push_back("--" + it.key() + "=" + v);
    }
    if (args.empty()) return expanded;
    // first argument is the subcommand name; config flags go right after it
    std::vector<std::string> out;
    out.push_back(args.front());
    out.insert(out.end(), expanded.begin(), expanded.end());
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ptring::validation_error("cannot open output file " + tmp);
        os << content;
        if (!os) throw ptring::validation_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ptring::validation_error("cannot rename " + tmp + " to " + path);
}

struct ParamFlags {
    double omega1_hz = 193.0e12;
    double delta_omega_hz = 0.0;
    double gamma1_hz = 3.0e9;
    double gamma2_hz = 3.0e9;
    double gamma_c_hz = 146.8e9;
    double kappa_hz = 45.5e9;

    void attach(CLI::App* cmd) {
        cmd->add_option("--omega1-hz", omega1_hz, "main-ring resonance frequency (Hz)")->capture_default_str();
        cmd->add_option("--delta-omega-hz", delta_omega_hz,
                        "auxiliary-minus-main detuning (Hz)")->capture_default_str();
        cmd->add_option("--gamma1-hz", gamma1_hz, "main-ring intrinsic decay (Hz)")->capture_default_str();
        cmd->add_option("--gamma2-hz", gamma2_hz, "auxiliary-ring intrinsic decay (Hz)")->capture_default_str();
        cmd->add_option("--gamma-c-hz", gamma_c_hz, "auxiliary-to-bus coupling decay (Hz)")->capture_default_str();
        cmd->add_option("--kappa-hz", kappa_hz, "inter-ring coupling strength (Hz)")->capture_default_str();
    }

    ptring::SystemParams params() const {
        return ptring::SystemParams{omega1_hz, delta_omega_hz, gamma1_hz,
                                    gamma2_hz, gamma_c_hz,     kappa_hz};
    }
};

struct GeometryFlags {
    double fsr1_hz = 100.0e9;
    double fsr2_hz = 200.0e9;
    int n_modes = 3;
    double alignment_offset_hz = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--fsr1-hz", fsr1_hz, "main-ring free spectral range (Hz)")->capture_default_str();
        cmd->add_option("--fsr2-hz", fsr2_hz, "auxiliary-ring free spectral range (Hz)")->capture_default_str();
        cmd->add_option("--n-modes", n_modes, "main-ring modes on each side of reference")->capture_default_str();
        cmd->add_option("--alignment-offset-hz", alignment_offset_hz,
                        "auxiliary comb offset at zero tuning (Hz)")->capture_default_str();
    }

    ptring::DeviceGeometry geometry() const {
        return ptring::DeviceGeometry{fsr1_hz, fsr2_hz, n_modes, alignment_offset_hz};
    }
};

struct GridFlags {
    double start_hz = 0.0;
    double stop_hz = 0.0;
    double start_nm = 0.0;
    double stop_nm = 0.0;
    std::size_t points = 2001;

    void attach(CLI::App* cmd) {
        cmd->add_option("--start-hz", start_hz, "grid start (Hz)");
        cmd->add_option("--stop-hz", stop_hz, "grid stop (Hz)");
        cmd->add_option("--start-nm", start_nm, "grid start (nm, converted to Hz)");
        cmd->add_option("--stop-nm", stop_nm, "grid stop (nm, converted to Hz)");
        cmd->add_option("--points", points, "number of grid points")->capture_default_str();
    }

    std::vector<double> grid() const {
        double lo = start_hz, hi = stop_hz;
        if (start_nm > 0.0 || stop_nm > 0.0) {
            ptring::require(start_nm > 0.0 && stop_nm > 0.0 && start_nm < stop_nm,
                            "grid: need 0 < start-nm < stop-nm");
            lo = nm_to_hz(stop_nm);  // longer wavelength = lower frequency
            hi = nm_to_hz(start_nm);
        }
        ptring::require(lo < hi, "grid: need start < stop");
        ptring::require(points >= 2, "grid: need at least 2 points");
        std::vector<double> g(points);
        double step = (hi - lo) / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i) g[i] = lo + step * static_cast<double>(i);
        return g;
    }
};

void add_config_option(CLI::App* cmd) {
    // consumed in expand_config before parsing; registered so --help lists it
    cmd->add_option("--config", "JSON config file with flag names as keys; "
                                "command-line flags override it");
}

std::string format_spectrum_csv(const ptring::Spectrum& spec) {
    std::ostringstream os;
    ptring::write_spectrum_csv(spec, os);
    return os.str();
}

std::string format_timestamps_csv(const ptring::TimestampStream& s) {
    std::ostringstream os;
    ptring::write_timestamps_csv(s, os);
    return os.str();
}

const ptring::TimestampStream& single_channel(const std::vector<ptring::TimestampStream>& v,
                                              const std::string& path) {
    ptring::require(v.size() == 1, "expected exactly one channel in " + path);
    return v.front();
}

// ---------------------------------------------------------------------------

int cmd_simulate_spectrum(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate-spectrum",
                                   "synthesize a transmission or DOS spectrum CSV");
    auto params = std::make_shared<ParamFlags>();
    auto geom = std::make_shared<GeometryFlags>();
    auto grid = std::make_shared<GridFlags>();
    auto out = std::make_shared<std::string>();
    auto tuning = std::make_shared<double>(0.0);
    auto comb = std::make_shared<bool>(false);
    auto dos = std::make_shared<bool>(false);
    auto normalize = std::make_shared<bool>(false);
    params->attach(cmd);
    geom->attach(cmd);
    grid->attach(cmd);
    cmd->add_option("--tuning-hz", *tuning, "auxiliary comb tuning shift (Hz)")->capture_default_str();
    cmd->add_flag("--comb", *comb, "model the multi-resonance band (comb of modes)");
    cmd->add_flag("--dos", *dos, "emit main-ring DOS instead of transmission");
    cmd->add_flag("--normalize", *normalize, "scale DOS so the maximum is 1");
    cmd->add_option("--out", *out, "output CSV path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::require(!(*comb && *dos), "simulate-spectrum: --dos is single-resonance only");
        ptring::Spectrum spec;
        if (*comb) {
            spec = ptring::comb_spectrum(params->params(), geom->geometry(), *tuning,
                                         grid->grid());
        } else if (*dos) {
            spec = ptring::dos_spectrum(params->params(), grid->grid(), *normalize);
        } else {
            spec = ptring::transmission_spectrum(params->params(), grid->grid());
        }
        atomic_write(*out, format_spectrum_csv(spec));
    });
    return 0;
}

int cmd_sweep_detuning(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "sweep-detuning", "DOS map over detuning (rows) x probe frequency (columns), "
                          "with per-row eigenvalues");
    auto params = std::make_shared<ParamFlags>();
    auto grid = std::make_shared<GridFlags>();
    auto out = std::make_shared<std::string>();
    auto d_start = std::make_shared<double>(-100.0e9);
    auto d_stop = std::make_shared<double>(100.0e9);
    auto d_points = std::make_shared<std::size_t>(81);
    auto normalize = std::make_shared<bool>(false);
    auto volt_coeff = std::make_shared<double>(0.0);
    params->attach(cmd);
    grid->attach(cmd);
    cmd->add_option("--detuning-start-hz", *d_start, "detuning sweep start (Hz)")->capture_default_str();
    cmd->add_option("--detuning-stop-hz", *d_stop, "detuning sweep stop (Hz)")->capture_default_str();
    cmd->add_option("--detuning-points", *d_points, "detuning sweep points")->capture_default_str();
    cmd->add_flag("--normalize", *normalize, "normalize each row to its maximum");
    cmd->add_option("--volt-coefficient", *volt_coeff,
                    "optional thermal-tuning coefficient c in detuning = c * V^2; adds a "
                    "voltage_v label column")->capture_default_str();
    cmd->add_option("--out", *out, "output CSV path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::require(*d_points >= 2, "sweep: need at least 2 detuning points");
        ptring::require(*d_stop > *d_start, "sweep: need detuning stop > start");
        std::vector<double> g = grid->grid();
        std::ostringstream os;
        char buf[64];
        os << "detuning_hz";
        if (*volt_coeff > 0.0) os << ",voltage_v";
        os << ",omega_plus_re_hz,omega_plus_im_hz,omega_minus_re_hz,omega_minus_im_hz";
        for (double f : g) {
            std::snprintf(buf, sizeof(buf), ",dos_at_%.15g", f);
            os << buf;
        }
        os << "\n";
        double step = (*d_stop - *d_start) / static_cast<double>(*d_points - 1);
        for (std::size_t r = 0; r < *d_points; ++r) {
            ptring::SystemParams p = params->params();
            p.delta_omega = *d_start + step * static_cast<double>(r);
            ptring::EigenSolution sol = ptring::eigenfrequencies(p);
            ptring::Spectrum dos = ptring::dos_spectrum(p, g, *normalize);
            std::snprintf(buf, sizeof(buf), "%.15g", p.delta_omega);
            os << buf;
            if (*volt_coeff > 0.0) {
                // detuning = c * V^2; negative detunings have no voltage preimage
                if (p.delta_omega >= 0.0) {
                    std::snprintf(buf, sizeof(buf), ",%.15g",
                                  std::sqrt(p.delta_omega / *volt_coeff));
                    os << buf;
                } else {
                    os << ",nan";
                }
            }
            std::snprintf(buf, sizeof(buf), ",%.15g,%.15g,%.15g,%.15g", sol.omega_plus.real(),
                          sol.omega_plus.imag(), sol.omega_minus.real(), sol.omega_minus.imag());
            os << buf;
            for (double v : dos.values) {
                std::snprintf(buf, sizeof(buf), ",%.15g", v);
                os << buf;
            }
            os << "\n";
        }
        atomic_write(*out, os.str());
    });
    return 0;
}

int cmd_fit_spectrum(CLI::App& app) {
    auto* cmd = app.add_subcommand("fit-spectrum",
                                   "recover system parameters from a transmission band");
    auto geom = std::make_shared<GeometryFlags>();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto g1 = std::make_shared<double>(3.0e9);
    auto g2 = std::make_shared<double>(3.0e9);
    auto gc = std::make_shared<double>(146.8e9);
    auto kp = std::make_shared<double>(45.5e9);
    auto w1 = std::make_shared<double>(0.0);
    auto tun = std::make_shared<double>(0.0);
    auto equal_gamma = std::make_shared<bool>(false);
    auto prominence = std::make_shared<double>(0.1);
    geom->attach(cmd);
    cmd->add_option("--input", *input, "input spectrum CSV")->required();
    cmd->add_option("--gamma1-init-hz", *g1, "initial gamma1 (Hz)")->capture_default_str();
    cmd->add_option("--gamma2-init-hz", *g2, "initial gamma2 (Hz)")->capture_default_str();
    cmd->add_option("--gamma-c-init-hz", *gc, "initial gamma_c (Hz)")->capture_default_str();
    cmd->add_option("--kappa-init-hz", *kp, "initial kappa (Hz)")->capture_default_str();
    cmd->add_option("--omega1-init-hz", *w1,
                    "initial main-ring reference frequency (0 = auto from dips)")->capture_default_str();
    cmd->add_option("--tuning-init-hz", *tun, "initial tuning (Hz)")->capture_default_str();
    cmd->add_flag("--equal-gamma", *equal_gamma, "constrain gamma1 == gamma2");
    cmd->add_option("--prominence", *prominence, "dip prominence for resonance listing")->capture_default_str();
    cmd->add_option("--out", *out, "output JSON path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::Spectrum spec = ptring::read_spectrum_csv_file(*input);
        std::vector<ptring::ResonanceWindow> dips = ptring::find_resonances(spec, *prominence);

        ptring::DeviceGeometry geometry = geom->geometry();
        double w1_init = *w1;
        if (w1_init <= 0.0) {
            // coarse 1-D scan over the reference-mode frequency: the descent
            // basin for omega1 is only a few linewidths wide, so a dip center
            // alone is not a safe starting point
            double mid = (spec.freqs.front() + spec.freqs.back()) / 2.0;
            double best_cost = std::numeric_limits<double>::max();
            const double step = 0.5e9;
            const int n_steps = static_cast<int>(geometry.fsr1 / 2.0 / step);
            for (int k = -n_steps; k <= n_steps; ++k) {
                double cand = mid + static_cast<double>(k) * step;
                ptring::SystemParams trial{cand, 0.0, *g1, *g2, *gc, *kp};
                ptring::Spectrum model =
                    ptring::comb_spectrum(trial, geometry, *tun, spec.freqs);
                double cost = 0.0;
                for (std::size_t i = 0; i < model.values.size(); ++i) {
                    double r = model.values[i] - spec.values[i];
                    cost += r * r;
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    w1_init = cand;
                }
            }
        }

        ptring::SystemParams guess{w1_init, 0.0, *g1, *g2, *gc, *kp};
        ptring::ParamFitOptions opt;
        opt.equal_gamma = *equal_gamma;
        opt.tuning_guess = *tun;
        ptring::ParamFitResult fit = ptring::extract_system_params(spec, geometry, guess, opt);

        nlohmann::json j;
        j["fit"] = fit;
        std::vector<ptring::ResonanceFit> rfits;
        for (const auto& d : dips) {
            if (d.hi - d.lo + 1 < 5) continue;
            rfits.push_back(ptring::fit_lorentzian(spec, d));
        }
        j["resonances"] = rfits;
        nlohmann::json pred;
        pred["tau_high_q"] = ptring::tau_high_q(fit.params);
        pred["tau_low_q"] = ptring::tau_low_q(fit.params);
        auto branches = ptring::tau_exact(fit.params);
        pred["tau_exact_plus"] = branches.first;
        pred["tau_exact_minus"] = branches.second;
        pred["contrast"] = ptring::lifetime_contrast(fit.params);
        j["predicted"] = pred;
        atomic_write(*out, j.dump(2) + "\n");

        std::printf("gamma1 = %.6g Hz\ngamma2 = %.6g Hz\ngamma_c = %.6g Hz\nkappa = %.6g Hz\n",
                    fit.params.gamma1, fit.params.gamma2, fit.params.gamma_c, fit.params.kappa);
        std::printf("tau_high_q = %.6g ps (1/(2 gamma1))\n",
                    1e12 * pred["tau_high_q"].get<double>());
        std::printf("tau_low_q = %.6g ps (1/gamma_c)\n", 1e12 * pred["tau_low_q"].get<double>());
        std::printf("contrast = %.6g\n", pred["contrast"].get<double>());
    });
    return 0;
}

int cmd_predict_lifetime(CLI::App& app) {
    auto* cmd = app.add_subcommand("predict-lifetime",
                                   "lifetime estimators and tuning contrast for given params");
    auto params = std::make_shared<ParamFlags>();
    auto out = std::make_shared<std::string>();
    params->attach(cmd);
    cmd->add_option("--out", *out, "optional output JSON path");
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::SystemParams p = params->params();
        nlohmann::json j;
        j["tau_high_q"] = ptring::tau_high_q(p);
        j["tau_low_q"] = ptring::tau_low_q(p);
        auto branches = ptring::tau_exact(p);
        j["tau_exact_plus"] = branches.first;
        j["tau_exact_minus"] = branches.second;
        j["contrast"] = ptring::lifetime_contrast(p);
        std::string text = j.dump(2) + "\n";
        if (!out->empty()) atomic_write(*out, text);
        std::fputs(text.c_str(), stdout);
    });
    return 0;
}

struct PairFlags {
    double pgr_coefficient = 1.0e3;
    double pump_power_mw = 1.0;
    double tau_signal_ps = 156.4;
    double tau_idler_ps = 156.4;
    double eff_signal = 0.9;
    double eff_idler = 0.9;
    double dark_signal_hz = 30.0;
    double dark_idler_hz = 30.0;
    double jitter_signal_ps = 74.5;
    double jitter_idler_ps = 53.5;
    double duration_s = 1.0;
    std::uint64_t seed = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--pgr-coefficient", pgr_coefficient,
                        "pair generation coefficient (pairs/s/mW^2)")->capture_default_str();
        cmd->add_option("--pump-power-mw", pump_power_mw, "on-chip pump power (mW)")->capture_default_str();
        cmd->add_option("--tau-signal-ps", tau_signal_ps, "signal cavity lifetime (ps)")->capture_default_str();
        cmd->add_option("--tau-idler-ps", tau_idler_ps, "idler cavity lifetime (ps)")->capture_default_str();
        cmd->add_option("--eff-signal", eff_signal, "signal detection efficiency")->capture_default_str();
        cmd->add_option("--eff-idler", eff_idler, "idler detection efficiency")->capture_default_str();
        cmd->add_option("--dark-signal-hz", dark_signal_hz, "signal dark-count rate (Hz)")->capture_default_str();
        cmd->add_option("--dark-idler-hz", dark_idler_hz, "idler dark-count rate (Hz)")->capture_default_str();
        cmd->add_option("--jitter-signal-ps", jitter_signal_ps, "signal channel jitter (ps)")->capture_default_str();
        cmd->add_option("--jitter-idler-ps", jitter_idler_ps, "idler channel jitter (ps)")->capture_default_str();
        cmd->add_option("--duration-s", duration_s, "acquisition time (s)")->capture_default_str();
        cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
    }

    ptring::PairSourceConfig config() const {
        ptring::PairSourceConfig c;
        c.pgr_coefficient = pgr_coefficient;
        c.pump_power = pump_power_mw;
        c.tau_signal = tau_signal_ps * 1e-12;
        c.tau_idler = tau_idler_ps * 1e-12;
        c.eff_signal = eff_signal;
        c.eff_idler = eff_idler;
        c.dark_signal = dark_signal_hz;
        c.dark_idler = dark_idler_hz;
        c.jitter_signal = jitter_signal_ps * 1e-12;
        c.jitter_idler = jitter_idler_ps * 1e-12;
        c.duration = duration_s;
        c.seed = seed;
        return c;
    }
};

int cmd_simulate_pairs(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate-pairs",
                                   "generate signal/idler timestamp CSV files");
    auto pf = std::make_shared<PairFlags>();
    auto out_s = std::make_shared<std::string>();
    auto out_i = std::make_shared<std::string>();
    pf->attach(cmd);
    cmd->add_option("--out-signal", *out_s, "signal timestamps CSV path")->required();
    cmd->add_option("--out-idler", *out_i, "idler timestamps CSV path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::PairSourceConfig c = pf->config();
        auto [sig, idl] = ptring::generate_pair_streams(c);
        atomic_write(*out_s, format_timestamps_csv(sig));
        atomic_write(*out_i, format_timestamps_csv(idl));
        double rate = ptring::pair_rate(c);
        nlohmann::json j;
        j["pair_rate"] = rate;
        j["expected_singles_signal"] = rate * c.eff_signal + c.dark_signal;
        j["expected_singles_idler"] = rate * c.eff_idler + c.dark_idler;
        j["n_signal"] = sig.times_ps.size();
        j["n_idler"] = idl.times_ps.size();
        std::fputs((j.dump(2) + "\n").c_str(), stdout);
    });
    return 0;
}

int cmd_analyze(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "analyze", "idler-start/signal-stop coincidence analysis of timestamp files");
    auto sig_path = std::make_shared<std::string>();
    auto idl_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto out_hist = std::make_shared<std::string>();
    auto bin_ps = std::make_shared<double>(10.0);
    auto span_ps = std::make_shared<double>(10000.0);
    auto j1_ps = std::make_shared<double>(0.0);
    auto j2_ps = std::make_shared<double>(0.0);
    auto peak_ps = std::make_shared<double>(0.0);
    auto acc_ps = std::make_shared<double>(0.0);
    cmd->add_option("--signal", *sig_path, "signal timestamps CSV (stop channel)")->required();
    cmd->add_option("--idler", *idl_path, "idler timestamps CSV (start channel)")->required();
    cmd->add_option("--bin-width-ps", *bin_ps, "histogram bin width (ps)")->capture_default_str();
    cmd->add_option("--span-ps", *span_ps, "histogram span (ps)")->capture_default_str();
    cmd->add_option("--jitter1-ps", *j1_ps, "channel-1 jitter for deconvolution (ps)")->capture_default_str();
    cmd->add_option("--jitter2-ps", *j2_ps, "channel-2 jitter for deconvolution (ps)")->capture_default_str();
    cmd->add_option("--peak-window-ps", *peak_ps,
                    "CAR peak window width (0 = auto, 6 tau_1e)")->capture_default_str();
    cmd->add_option("--accidental-window-ps", *acc_ps,
                    "CAR accidental exclusion width (0 = auto, 20 tau_1e)")->capture_default_str();
    cmd->add_option("--out", *out, "analysis JSON path")->required();
    cmd->add_option("--out-histogram", *out_hist, "histogram JSON path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        auto sig = single_channel(ptring::read_timestamps_csv_file(*sig_path), *sig_path);
        auto idl = single_channel(ptring::read_timestamps_csv_file(*idl_path), *idl_path);
        ptring::CoincidenceHistogram h =
            ptring::coincidence_histogram(idl, sig, *bin_ps, *span_ps);
        ptring::DoubleExpFit fit = ptring::fit_double_exponential(h);
        ptring::LifetimeEstimate est = ptring::make_lifetime_estimate(
            fit.tau_1e_ps * 1e-12, *j1_ps * 1e-12, *j2_ps * 1e-12);

        double pw = *peak_ps > 0.0 ? *peak_ps : 6.0 * fit.tau_1e_ps;
        double aw = *acc_ps > 0.0 ? *acc_ps : 20.0 * fit.tau_1e_ps;
        double span_limit = 2.0 * std::abs(h.offsets_ps.back());
        aw = std::min(aw, span_limit);
        ptring::require(aw > pw, "analyze: accidental window must exceed peak window; "
                                 "increase --span-ps or set windows explicitly");
        ptring::CarResult cr = ptring::car(h, pw, aw);

        nlohmann::json jh = h;
        atomic_write(*out_hist, jh.dump() + "\n");
        nlohmann::json j = est;
        j["car"] = cr.car;
        j["car_sigma"] = cr.sigma;
        j["car_lower_bound"] = cr.lower_bound;
        j["histogram_path"] = *out_hist;
        j["exp_scale_ps"] = fit.exp_scale_ps;
        atomic_write(*out, j.dump(2) + "\n");
        std::printf("tau_1e = %.4g ps, tau = %.4g ps, CAR = %.4g +- %.2g\n", est.tau_1e * 1e12,
                    est.tau * 1e12, cr.car, cr.sigma);
    });
    return 0;
}

int cmd_franson(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "franson", "two-photon interference fringe: phase sweep + visibility fit + Bell check");
    auto v_true = std::make_shared<double>(0.871);
    auto n_phases = std::make_shared<std::size_t>(20);
    auto phase_span = std::make_shared<double>(6.283185307179586);
    auto base_rate = std::make_shared<double>(40.0);
    auto singles_s = std::make_shared<double>(40100.0);
    auto singles_i = std::make_shared<double>(40000.0);
    auto t_int = std::make_shared<double>(20.0);
    auto n_trials = std::make_shared<std::int64_t>(1000);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--visibility-true", *v_true, "underlying fringe visibility")->capture_default_str();
    cmd->add_option("--phases", *n_phases, "number of phase points")->capture_default_str();
    cmd->add_option("--phase-span", *phase_span, "swept phase range (radians)")->capture_default_str();
    cmd->add_option("--base-rate-hz", *base_rate, "coincidence base rate (Hz)")->capture_default_str();
    cmd->add_option("--singles-signal-hz", *singles_s, "signal singles rate (Hz)")->capture_default_str();
    cmd->add_option("--singles-idler-hz", *singles_i, "idler singles rate (Hz)")->capture_default_str();
    cmd->add_option("--integration-time-s", *t_int, "integration time per point (s)")->capture_default_str();
    cmd->add_option("--n-trials", *n_trials, "Monte Carlo resampling trials")->capture_default_str();
    cmd->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    cmd->add_option("--out", *out, "fringe JSON path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::require(*n_phases >= 5, "franson: need at least 5 phase points");
        std::vector<double> phases(*n_phases), ccs(*n_phases);
        std::vector<std::int64_t> ss(*n_phases), si(*n_phases);
        for (std::size_t k = 0; k < *n_phases; ++k) {
            ptring::FransonConfig fc;
            fc.phase = *phase_span * static_cast<double>(k) / static_cast<double>(*n_phases);
            fc.visibility_true = *v_true;
            fc.base_rate = *base_rate;
            fc.singles_rate_signal = *singles_s;
            fc.singles_rate_idler = *singles_i;
            fc.integration_time = *t_int;
            fc.seed = ptring::Rng::derive_seed(*seed, k);
            ptring::FransonCounts counts = ptring::simulate_franson(fc);
            phases[k] = fc.phase;
            ccs[k] = static_cast<double>(counts.coincidences);
            ss[k] = counts.singles_signal;
            si[k] = counts.singles_idler;
        }
        ptring::VisibilityResult vis =
            ptring::visibility_fit(phases, ccs, *n_trials, ptring::Rng::derive_seed(*seed, 1u << 20));
        ptring::BellCheck bell = ptring::bell_threshold_check(vis);
        nlohmann::json j = vis;
        j["phases"] = phases;
        j["coincidences"] = ccs;
        j["singles_signal"] = ss;
        j["singles_idler"] = si;
        j["bell_violation"] = bell.violates;
        j["bell_margin"] = bell.margin;
        atomic_write(*out, j.dump(2) + "\n");
        std::printf("visibility = %.4f +- %.4f, bell: %s (margin %+.4f)\n", vis.visibility,
                    vis.sigma, bell.violates ? "violated" : "not violated", bell.margin);
    });
    return 0;
}

int cmd_g2(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "g2", "heralded HBT simulation + heralded second-order autocorrelation");
    auto mean_pairs = std::make_shared<double>(0.03);
    auto splitter = std::make_shared<double>(0.5);
    auto n_windows = std::make_shared<std::int64_t>(1000000);
    auto period_ps = std::make_shared<double>(10000.0);
    auto window_ps = std::make_shared<double>(1000.0);
    auto delay_steps = std::make_shared<int>(3);
    auto tau_s_ps = std::make_shared<double>(156.4);
    auto tau_i_ps = std::make_shared<double>(156.4);
    auto jit_s_ps = std::make_shared<double>(74.5);
    auto jit_i_ps = std::make_shared<double>(53.5);
    auto eff_s = std::make_shared<double>(0.9);
    auto eff_i = std::make_shared<double>(0.9);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--mean-pairs-per-window", *mean_pairs, "mean pairs per coherence window")->capture_default_str();
    cmd->add_option("--splitter-ratio", *splitter, "idler beamsplitter ratio to arm 1")->capture_default_str();
    cmd->add_option("--n-windows", *n_windows, "number of coherence windows")->capture_default_str();
    cmd->add_option("--window-period-ps", *period_ps, "window spacing (ps)")->capture_default_str();
    cmd->add_option("--coincidence-window-ps", *window_ps, "coincidence window (ps)")->capture_default_str();
    cmd->add_option("--delay-steps", *delay_steps,
                    "delays at multiples of the window period, -N..N")->capture_default_str();
    cmd->add_option("--tau-signal-ps", *tau_s_ps, "signal cavity lifetime (ps)")->capture_default_str();
    cmd->add_option("--tau-idler-ps", *tau_i_ps, "idler cavity lifetime (ps)")->capture_default_str();
    cmd->add_option("--jitter-signal-ps", *jit_s_ps, "signal channel jitter (ps)")->capture_default_str();
    cmd->add_option("--jitter-idler-ps", *jit_i_ps, "idler channel jitter (ps)")->capture_default_str();
    cmd->add_option("--eff-signal", *eff_s, "signal detection efficiency")->capture_default_str();
    cmd->add_option("--eff-idler", *eff_i, "idler detection efficiency")->capture_default_str();
    cmd->add_option("--seed", *seed, "RNG seed")->capture_default_str();
    cmd->add_option("--out", *out, "G2 result JSON path")->required();
    add_config_option(cmd);

    cmd->callback([=]() {
        ptring::require(*delay_steps >= 0, "g2: delay steps must be >= 0");
        ptring::PairSourceConfig c;
        c.pgr_coefficient = 0.0;
        c.pump_power = 0.0;
        c.tau_signal = *tau_s_ps * 1e-12;
        c.tau_idler = *tau_i_ps * 1e-12;
        c.eff_signal = *eff_s;
        c.eff_idler = *eff_i;
        c.jitter_signal = *jit_s_ps * 1e-12;
        c.jitter_idler = *jit_i_ps * 1e-12;
        c.duration = 1.0;
        ptring::HbtStreams streams =
            ptring::simulate_hbt(c, *mean_pairs, *splitter, *n_windows, *seed, *period_ps);
        std::vector<double> delays;
        for (int k = -*delay_steps; k <= *delay_steps; ++k)
            delays.push_back(static_cast<double>(k) * *period_ps);
        ptring::G2Result g2 = ptring::heralded_g2(streams.herald, streams.arm1, streams.arm2,
                                                  *window_ps, delays);
        nlohmann::json j = g2;
        j["n_heralds"] = streams.herald.times_ps.size();
        atomic_write(*out, j.dump(2) + "\n");
        std::printf("g2_zero = %.4f +- %.4f (%zu heralds)\n", g2.g2_zero, g2.sigma_zero,
                    streams.herald.times_ps.size());
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PT-symmetric dual-microring quantum light source toolkit"};
    app.require_subcommand(1);
    cmd_simulate_spectrum(app);
    cmd_sweep_detuning(app);
    cmd_fit_spectrum(app);
    cmd_predict_lifetime(app);
    cmd_simulate_pairs(app);
    cmd_analyze(app);
    cmd_franson(app);
    cmd_g2(app);

    // config-file values are injected before explicit flags; TakeLast makes
    // the explicit flags win
    for (CLI::App* sub : app.get_subcommands(nullptr))
        for (CLI::Option* opt : sub->get_options())
            opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: invalid-arguments: %s\n", e.what());
        return 2;
    } catch (const ptring::validation_error& e) {
        std::fprintf(stderr, "error: validation: %s\n", e.what());
        return 2;
    } catch (const ptring::numeric_error& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 3;
    }
    return 0;
}
