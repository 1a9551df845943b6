#ifndef GENDSE_CONFIG_HPP
#define GENDSE_CONFIG_HPP

// Scenario configuration: JSON with units in key names, strict key checking,
// and the two shipped presets.

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendse/attacks.hpp"
#include "gendse/dynamics.hpp"
#include "gendse/estimators.hpp"
#include "gendse/measurement.hpp"

namespace gendse {

using nlohmann::json;

enum class AttackType { None, Fdi, Dos };
enum class CalibrationSource { IndependentClean, PreAttack };

struct AttackBlock {
    AttackType type = AttackType::None;
    FdiConfig fdi;
    DosConfig dos;

    AttackWindow window() const { return type == AttackType::Dos ? dos.window : fdi.window; }
};

struct ScenarioConfig {
    std::string name = "default";
    std::uint64_t seed = 1;
    TruthScenario truth;
    double sample_rate_hz = 50.0;
    NoiseModel noise;
    AttackBlock attack;
    FilterSettings filter;
    CalibrationSource calibration = CalibrationSource::IndependentClean;

    void validate() const {
        require(!name.empty(), "config: name must not be empty");
        truth.gen.validate();
        truth.gov.validate();
        truth.smib.validate();
        ExciterParams e = truth.exc;
        e.validate();
        require(truth.duration > 0.0, "config: duration_s must be > 0");
        require(truth.dt > 0.0, "config: dt_s must be > 0");
        sampling_stride(sample_rate_hz, truth.dt);
        noise.validate();
        filter.validate();
        if (attack.type == AttackType::Fdi) attack.fdi.validate();
        if (attack.type == AttackType::Dos) attack.dos.validate();
        if (attack.type != AttackType::None) {
            const auto w = attack.window();
            require(w.t_start >= 0.0 && w.t_end <= truth.duration + 1e-9,
                    "config: attack window must lie inside the simulated horizon");
        }
        smib_operating_point(truth);
    }
};

// Sub-seed identifiers derived from the master seed.
enum SeedStream : std::uint64_t {
    kSeedNoise = 1,
    kSeedFdi = 2,
    kSeedDos = 3,
    kSeedFilterInit = 4,
    kSeedCalibrationNoise = 5,
};

namespace detail {

inline const char* fault_name(FaultKind f) {
    switch (f) {
        case FaultKind::None: return "none";
        case FaultKind::VinfDip: return "vinf_dip";
        case FaultKind::XeChange: return "xe_change";
    }
    return "none";
}

inline FaultKind parse_fault(const std::string& s) {
    if (s == "none") return FaultKind::None;
    if (s == "vinf_dip") return FaultKind::VinfDip;
    if (s == "xe_change") return FaultKind::XeChange;
    throw ValidationError("config: unknown fault kind '" + s + "'");
}

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ValidationError("config: unknown key '" + where + "." + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
    }
}

inline void read_vec4(const json& j, const char* key, StateVector& out, const std::string& where) {
    if (!j.contains(key)) return;
    std::vector<double> v;
    read(j, key, v, where);
    if (v.size() != 4) throw ValidationError("config: '" + where + "." + key + "' must have 4 entries");
    out = StateVector(v[0], v[1], v[2], v[3]);
}

inline std::vector<double> vec4(const StateVector& v) { return {v(0), v(1), v(2), v(3)}; }

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
    const auto& g = c.truth.gen;
    const auto& gv = c.truth.gov;
    const auto& ex = c.truth.exc;
    const auto& n = c.truth.smib;
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["duration_s"] = c.truth.duration;
    j["dt_s"] = c.truth.dt;
    j["sample_rate_hz"] = c.sample_rate_hz;
    j["controllers_enabled"] = c.truth.controllers;
    j["operating_point"] = {{"P0_pu", c.truth.P0}, {"U0_pu", c.truth.U0}};
    j["generator"] = {{"T_j_s", g.T_j}, {"D_pu", g.D},       {"T_d0p_s", g.T_d0p}, {"T_q0p_s", g.T_q0p},
                      {"X_d_pu", g.X_d}, {"X_dp_pu", g.X_dp}, {"X_q_pu", g.X_q},    {"X_qp_pu", g.X_qp}};
    j["governor"] = {{"omega_ref_pu", gv.omega_ref}, {"r_inv_pu", gv.r_inv}, {"T_max_pu", gv.T_max},
                     {"T_s_s", gv.T_s},              {"T_c_s", gv.T_c},      {"T_3_s", gv.T_3},
                     {"T_4_s", gv.T_4},              {"T_5_s", gv.T_5}};
    j["exciter"] = {{"K_a", ex.K_a},          {"T_a_s", ex.T_a},           {"K_g", ex.K_g},
                    {"V_b_pu", ex.V_b},       {"E_f_min_pu", ex.E_f_min}, {"E_f_max_pu", ex.E_f_max}};
    j["network"] = {{"V_inf_pu", n.V_inf},
                    {"X_e_pu", n.X_e},
                    {"fault", detail::fault_name(n.fault)},
                    {"fault_on_s", n.t_on},
                    {"fault_off_s", n.t_off},
                    {"fault_V_inf_factor", n.fault_V_inf_factor},
                    {"fault_X_e_pu", n.fault_X_e}};
    const auto& nm = c.noise;
    j["noise"] = {{"sigma_delta_rad", nm.sigma_delta},
                  {"sigma_omega_pu", nm.sigma_omega},
                  {"sigma_U_frac", nm.sigma_U},
                  {"sigma_phi_rad", nm.sigma_phi},
                  {"R_sigma_delta_rad", nm.sigma_delta_R},
                  {"R_sigma_omega_pu", nm.sigma_omega_R},
                  {"R_sigma_U_frac", nm.sigma_U_R},
                  {"R_sigma_phi_rad", nm.sigma_phi_R}};
    json a;
    switch (c.attack.type) {
        case AttackType::None: a = {{"type", "none"}}; break;
        case AttackType::Fdi:
            a = {{"type", "fdi"},
                 {"sigma_c", c.attack.fdi.sigma_c},
                 {"t_start_s", c.attack.fdi.window.t_start},
                 {"t_end_s", c.attack.fdi.window.t_end},
                 {"B_j", c.attack.fdi.B_j},
                 {"linearization",
                  c.attack.fdi.linearization == Linearization::PerSample ? "per_sample" : "window_start"}};
            break;
        case AttackType::Dos:
            a = {{"type", "dos"},
                 {"rho", c.attack.dos.rho},
                 {"d_samples", c.attack.dos.d},
                 {"limit_consecutive", c.attack.dos.limit_consecutive},
                 {"t_start_s", c.attack.dos.window.t_start},
                 {"t_end_s", c.attack.dos.window.t_end},
                 {"semantics", c.attack.dos.semantics == LossSemantics::Zeroed ? "zeroed" : "hold_last"}};
            break;
    }
    j["attack"] = a;
    const auto& f = c.filter;
    j["filter"] = {{"Q_diag", detail::vec4(f.q_diag)},
                   {"P0_diag", detail::vec4(f.p0_diag)},
                   {"init_sigma", detail::vec4(f.init_sigma)},
                   {"huber_C", f.huber_C},
                   {"dj_safety", f.dj_safety},
                   {"dj_warmup_samples", f.dj_warmup},
                   {"dj_calibration",
                    c.calibration == CalibrationSource::IndependentClean ? "independent_clean" : "pre_attack"}};
    return j;
}

// Applies the keys present in j on top of base.
inline ScenarioConfig from_json(const json& j, ScenarioConfig c = {}) {
    using namespace detail;
    check_keys(j, "config",
               {"name", "seed", "duration_s", "dt_s", "sample_rate_hz", "controllers_enabled", "operating_point",
                "generator", "governor", "exciter", "network", "noise", "attack", "filter"});
    read(j, "name", c.name, "config");
    read(j, "seed", c.seed, "config");
    read(j, "duration_s", c.truth.duration, "config");
    read(j, "dt_s", c.truth.dt, "config");
    read(j, "sample_rate_hz", c.sample_rate_hz, "config");
    read(j, "controllers_enabled", c.truth.controllers, "config");
    if (j.contains("operating_point")) {
        const auto& o = j["operating_point"];
        check_keys(o, "operating_point", {"P0_pu", "U0_pu"});
        read(o, "P0_pu", c.truth.P0, "operating_point");
        read(o, "U0_pu", c.truth.U0, "operating_point");
    }
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        auto& p = c.truth.gen;
        check_keys(g, "generator", {"T_j_s", "D_pu", "T_d0p_s", "T_q0p_s", "X_d_pu", "X_dp_pu", "X_q_pu", "X_qp_pu"});
        read(g, "T_j_s", p.T_j, "generator");
        read(g, "D_pu", p.D, "generator");
        read(g, "T_d0p_s", p.T_d0p, "generator");
        read(g, "T_q0p_s", p.T_q0p, "generator");
        read(g, "X_d_pu", p.X_d, "generator");
        read(g, "X_dp_pu", p.X_dp, "generator");
        read(g, "X_q_pu", p.X_q, "generator");
        read(g, "X_qp_pu", p.X_qp, "generator");
    }
    if (j.contains("governor")) {
        const auto& g = j["governor"];
        auto& p = c.truth.gov;
        check_keys(g, "governor",
                   {"omega_ref_pu", "r_inv_pu", "T_max_pu", "T_s_s", "T_c_s", "T_3_s", "T_4_s", "T_5_s"});
        read(g, "omega_ref_pu", p.omega_ref, "governor");
        read(g, "r_inv_pu", p.r_inv, "governor");
        read(g, "T_max_pu", p.T_max, "governor");
        read(g, "T_s_s", p.T_s, "governor");
        read(g, "T_c_s", p.T_c, "governor");
        read(g, "T_3_s", p.T_3, "governor");
        read(g, "T_4_s", p.T_4, "governor");
        read(g, "T_5_s", p.T_5, "governor");
    }
    if (j.contains("exciter")) {
        const auto& e = j["exciter"];
        auto& p = c.truth.exc;
        check_keys(e, "exciter", {"K_a", "T_a_s", "K_g", "V_b_pu", "E_f_min_pu", "E_f_max_pu"});
        read(e, "K_a", p.K_a, "exciter");
        read(e, "T_a_s", p.T_a, "exciter");
        read(e, "K_g", p.K_g, "exciter");
        read(e, "V_b_pu", p.V_b, "exciter");
        read(e, "E_f_min_pu", p.E_f_min, "exciter");
        read(e, "E_f_max_pu", p.E_f_max, "exciter");
    }
    if (j.contains("network")) {
        const auto& n = j["network"];
        auto& p = c.truth.smib;
        check_keys(n, "network",
                   {"V_inf_pu", "X_e_pu", "fault", "fault_on_s", "fault_off_s", "fault_V_inf_factor", "fault_X_e_pu"});
        read(n, "V_inf_pu", p.V_inf, "network");
        read(n, "X_e_pu", p.X_e, "network");
        if (n.contains("fault")) {
            std::string f;
            read(n, "fault", f, "network");
            p.fault = parse_fault(f);
        }
        read(n, "fault_on_s", p.t_on, "network");
        read(n, "fault_off_s", p.t_off, "network");
        read(n, "fault_V_inf_factor", p.fault_V_inf_factor, "network");
        read(n, "fault_X_e_pu", p.fault_X_e, "network");
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        auto& m = c.noise;
        check_keys(n, "noise",
                   {"sigma_delta_rad", "sigma_omega_pu", "sigma_U_frac", "sigma_phi_rad", "R_sigma_delta_rad",
                    "R_sigma_omega_pu", "R_sigma_U_frac", "R_sigma_phi_rad"});
        read(n, "sigma_delta_rad", m.sigma_delta, "noise");
        read(n, "sigma_omega_pu", m.sigma_omega, "noise");
        read(n, "sigma_U_frac", m.sigma_U, "noise");
        read(n, "sigma_phi_rad", m.sigma_phi, "noise");
        read(n, "R_sigma_delta_rad", m.sigma_delta_R, "noise");
        read(n, "R_sigma_omega_pu", m.sigma_omega_R, "noise");
        read(n, "R_sigma_U_frac", m.sigma_U_R, "noise");
        read(n, "R_sigma_phi_rad", m.sigma_phi_R, "noise");
    }
    if (j.contains("attack")) {
        const auto& a = j["attack"];
        std::string type = "none";
        if (!a.is_object()) throw ValidationError("config: 'attack' must be an object");
        read(a, "type", type, "attack");
        if (type == "none") {
            check_keys(a, "attack", {"type"});
            c.attack.type = AttackType::None;
        } else if (type == "fdi") {
            check_keys(a, "attack", {"type", "sigma_c", "t_start_s", "t_end_s", "B_j", "linearization"});
            c.attack.type = AttackType::Fdi;
            read(a, "sigma_c", c.attack.fdi.sigma_c, "attack");
            read(a, "t_start_s", c.attack.fdi.window.t_start, "attack");
            read(a, "t_end_s", c.attack.fdi.window.t_end, "attack");
            read(a, "B_j", c.attack.fdi.B_j, "attack");
            if (a.contains("linearization")) {
                std::string l;
                read(a, "linearization", l, "attack");
                if (l == "per_sample")
                    c.attack.fdi.linearization = Linearization::PerSample;
                else if (l == "window_start")
                    c.attack.fdi.linearization = Linearization::WindowStart;
                else
                    throw ValidationError("config: unknown linearization '" + l + "'");
            }
        } else if (type == "dos") {
            check_keys(a, "attack", {"type", "rho", "d_samples", "limit_consecutive", "t_start_s", "t_end_s", "semantics"});
            c.attack.type = AttackType::Dos;
            read(a, "rho", c.attack.dos.rho, "attack");
            read(a, "d_samples", c.attack.dos.d, "attack");
            read(a, "limit_consecutive", c.attack.dos.limit_consecutive, "attack");
            read(a, "t_start_s", c.attack.dos.window.t_start, "attack");
            read(a, "t_end_s", c.attack.dos.window.t_end, "attack");
            if (a.contains("semantics")) {
                std::string s;
                read(a, "semantics", s, "attack");
                if (s == "zeroed")
                    c.attack.dos.semantics = LossSemantics::Zeroed;
                else if (s == "hold_last")
                    c.attack.dos.semantics = LossSemantics::HoldLast;
                else
                    throw ValidationError("config: unknown loss semantics '" + s + "'");
            }
        } else {
            throw ValidationError("config: unknown attack type '" + type + "'");
        }
    }
    if (j.contains("filter")) {
        const auto& f = j["filter"];
        auto& s = c.filter;
        check_keys(f, "filter",
                   {"Q_diag", "P0_diag", "init_sigma", "huber_C", "dj_safety", "dj_warmup_samples", "dj_calibration"});
        read_vec4(f, "Q_diag", s.q_diag, "filter");
        read_vec4(f, "P0_diag", s.p0_diag, "filter");
        read_vec4(f, "init_sigma", s.init_sigma, "filter");
        read(f, "huber_C", s.huber_C, "filter");
        read(f, "dj_safety", s.dj_safety, "filter");
        read(f, "dj_warmup_samples", s.dj_warmup, "filter");
        if (f.contains("dj_calibration")) {
            std::string src;
            read(f, "dj_calibration", src, "filter");
            if (src == "independent_clean")
                c.calibration = CalibrationSource::IndependentClean;
            else if (src == "pre_attack")
                c.calibration = CalibrationSource::PreAttack;
            else
                throw ValidationError("config: unknown dj_calibration '" + src + "'");
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Presets.

struct PresetFamily {
    std::string name;
    ScenarioConfig base;
    std::vector<double> fdi_sigmas;
    std::vector<double> dos_rhos;
    double B_j = 2.1;
    AttackWindow window;
};

inline ScenarioConfig default_config() {
    ScenarioConfig c;
    c.truth.smib.fault = FaultKind::VinfDip;
    return c;
}

inline PresetFamily preset(const std::string& name) {
    PresetFamily p;
    p.base = default_config();
    if (name == "ninebus") {
        p.name = name;
        p.base.truth.duration = 20.0;
        p.base.truth.smib.t_on = 1.2;
        p.base.truth.smib.t_off = 1.5;
        p.B_j = 2.1;
        p.window = {4.0, 12.0};
        p.fdi_sigmas = {1e-4, 1e-3, 1e-2};
        p.dos_rhos = {1.0, 0.95, 0.85, 0.75};
    } else if (name == "sixtyeightbus") {
        p.name = name;
        p.base.truth.duration = 10.0;
        p.base.truth.smib.t_on = 1.0;
        p.base.truth.smib.t_off = 1.2;
        p.B_j = 1.6;
        p.window = {4.0, 8.0};
        p.fdi_sigmas = {0.01, 0.1, 1.0};
        p.dos_rhos = {1.0, 0.95, 0.85, 0.75};
    } else {
        throw ValidationError("unknown preset '" + name + "' (expected ninebus or sixtyeightbus)");
    }
    p.base.name = name + "-clean";
    p.base.attack.fdi.B_j = p.B_j;
    p.base.attack.fdi.window = p.window;
    p.base.attack.dos.window = p.window;
    return p;
}

inline ScenarioConfig with_fdi(const PresetFamily& p, std::size_t scenario) {
    require(scenario >= 1 && scenario <= p.fdi_sigmas.size(), "preset: FDI scenario out of range");
    ScenarioConfig c = p.base;
    c.name = p.name + "-fdi-" + std::to_string(scenario);
    c.attack.type = AttackType::Fdi;
    c.attack.fdi.sigma_c = p.fdi_sigmas[scenario - 1];
    return c;
}

inline ScenarioConfig with_dos(const PresetFamily& p, std::size_t scenario) {
    require(scenario >= 1 && scenario <= p.dos_rhos.size(), "preset: DoS scenario out of range");
    ScenarioConfig c = p.base;
    c.name = p.name + "-dos-" + std::to_string(scenario);
    c.attack.type = AttackType::Dos;
    c.attack.dos.rho = p.dos_rhos[scenario - 1];
    return c;
}

// "clean", "fdi-<n>" or "dos-<n>" within a preset family.
inline ScenarioConfig preset_scenario(const std::string& preset_name, const std::string& scenario) {
    const PresetFamily p = preset(preset_name);
    if (scenario.empty() || scenario == "clean") return p.base;
    auto num = [&](std::size_t prefix) {
        try {
            return static_cast<std::size_t>(std::stoul(scenario.substr(prefix)));
        } catch (const std::exception&) {
            throw ValidationError("unknown scenario '" + scenario + "'");
        }
    };
    if (scenario.rfind("fdi-", 0) == 0) return with_fdi(p, num(4));
    if (scenario.rfind("dos-", 0) == 0) return with_dos(p, num(4));
    throw ValidationError("unknown scenario '" + scenario + "' (expected clean, fdi-<n> or dos-<n>)");
}

inline std::vector<ScenarioConfig> preset_family_configs(const std::string& preset_name) {
    const PresetFamily p = preset(preset_name);
    std::vector<ScenarioConfig> out{p.base};
    for (std::size_t i = 1; i <= p.fdi_sigmas.size(); ++i) out.push_back(with_fdi(p, i));
    for (std::size_t i = 1; i <= p.dos_rhos.size(); ++i) out.push_back(with_dos(p, i));
    return out;
}

inline ScenarioConfig load_config(const std::string& path, ScenarioConfig base = default_config()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    ScenarioConfig c = from_json(j, std::move(base));
    c.validate();
    return c;
}

}  // namespace gendse

#endif  // GENDSE_CONFIG_HPP
