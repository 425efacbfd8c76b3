#pragma once

#include <json.hpp>

#include "ptring/counting.hpp"
#include "ptring/lifetime.hpp"
#include "ptring/spectra_fit.hpp"
#include "ptring/tcmt.hpp"

// JSON field names track the domain-type field names exactly; downstream
// tooling keys on them.

namespace ptring {

inline void to_json(nlohmann::json& j, const SystemParams& p) {
    j = nlohmann::json{{"omega1", p.omega1},   {"delta_omega", p.delta_omega},
                       {"gamma1", p.gamma1},   {"gamma2", p.gamma2},
                       {"gamma_c", p.gamma_c}, {"kappa", p.kappa}};
}

inline void from_json(const nlohmann::json& j, SystemParams& p) {
    j.at("omega1").get_to(p.omega1);
    j.at("delta_omega").get_to(p.delta_omega);
    j.at("gamma1").get_to(p.gamma1);
    j.at("gamma2").get_to(p.gamma2);
    j.at("gamma_c").get_to(p.gamma_c);
    j.at("kappa").get_to(p.kappa);
}

inline void to_json(nlohmann::json& j, const ResonanceFit& f) {
    j = nlohmann::json{{"center", f.center},
                       {"fwhm", f.fwhm},
                       {"extinction", f.extinction},
                       {"q_factor", f.q_factor},
                       {"residual", f.residual}};
}

inline void to_json(nlohmann::json& j, const ParamFitResult& r) {
    j = nlohmann::json{{"params", r.params},
                       {"tuning", r.tuning},
                       {"covariance_diag", r.covariance_diag},
                       {"cost", r.cost},
                       {"iterations", r.iterations},
                       {"non_identifiable", r.non_identifiable}};
}

inline void to_json(nlohmann::json& j, const CoincidenceHistogram& h) {
    j = nlohmann::json{{"bin_width_ps", h.bin_width_ps}, {"offsets_ps", h.offsets_ps},
                       {"counts", h.counts},             {"start_channel", h.start_channel},
                       {"stop_channel", h.stop_channel}, {"total_starts", h.total_starts}};
}

inline void to_json(nlohmann::json& j, const VisibilityResult& v) {
    j = nlohmann::json{{"visibility", v.visibility},
                       {"sigma", v.sigma},
                       {"fit_amplitude", v.fit_amplitude},
                       {"fit_offset", v.fit_offset},
                       {"fit_phase", v.fit_phase},
                       {"n_trials", v.n_trials}};
}

inline void to_json(nlohmann::json& j, const G2Result& g) {
    j = nlohmann::json{{"delays_ps", g.delays_ps},
                       {"g2", g.g2},
                       {"g2_zero", g.g2_zero},
                       {"sigma_zero", g.sigma_zero}};
}

inline void to_json(nlohmann::json& j, const LifetimeEstimate& e) {
    j = nlohmann::json{
        {"tau_1e", e.tau_1e}, {"jitter1", e.jitter1}, {"jitter2", e.jitter2}, {"tau", e.tau}};
}

}  // namespace ptring
