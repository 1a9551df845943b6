#ifndef GENDSE_ATTACKS_HPP
#define GENDSE_ATTACKS_HPP

// False-data injection against the linearized measurement model and a
// Bernoulli packet-loss (denial-of-service) channel.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gendse/dynamics.hpp"
#include "gendse/io.hpp"
#include "gendse/measurement.hpp"
#include "gendse/types.hpp"

namespace gendse {

struct JacobianH {
    JacobianMatrix H = JacobianMatrix::Zero();
    GeneratorState point;
    TerminalPhasor terminal;

    double L1() const { return H(kPeZ, kDelta); }
    double L2() const { return H(kPeZ, kEqp); }
    double L3() const { return H(kPeZ, kEdp); }
};

inline JacobianH jacobian_h(const GeneratorState& point, TerminalPhasor term, const GeneratorParams& p) {
    const PowerPartials d = power_partials(point, term, p);
    JacobianH J;
    J.point = point;
    J.terminal = term;
    J.H(kDeltaZ, kDelta) = 1.0;
    J.H(kOmegaZ, kOmega) = 1.0;
    J.H(kPeZ, kDelta) = d.ddelta;
    J.H(kPeZ, kEqp) = d.dEqp;
    J.H(kPeZ, kEdp) = d.dEdp;
    return J;
}

inline MeasVector build_fdi(const StateVector& c, const JacobianH& J) { return J.H * c; }

inline StateVector draw_attack_vector(double sigma_c, std::mt19937_64& rng) {
    require(sigma_c >= 0.0, "draw_attack_vector: sigma_c must be >= 0");
    std::normal_distribution<double> gauss(0.0, 1.0);
    StateVector c;
    for (int i = 0; i < kStateDim; ++i) c(i) = sigma_c * gauss(rng);
    return c;
}

inline double residual_norm(const MeasVector& z, const StateVector& x_hat, const JacobianH& J) {
    return (z - J.H * x_hat).norm();
}

struct StealthResult {
    bool pass = false;
    double residual = 0.0;
};

// Bad-data detection: the sample passes when its linearized residual norm
// does not exceed the threshold.
inline StealthResult stealth_check(const MeasVector& z_a, const StateVector& x_hat_a, const JacobianH& J,
                                   double B_j) {
    const double r = residual_norm(z_a, x_hat_a, J);
    return {r <= B_j, r};
}

// ---------------------------------------------------------------------------

struct AttackWindow {
    double t_start = 4.0;
    double t_end = 12.0;

    bool contains(double t) const { return t >= t_start - 1e-9 && t <= t_end + 1e-9; }
};

// Where the attacker's H comes from: re-linearized at every attacked sample,
// or linearized once at the first sample of the window and held.
enum class Linearization { PerSample, WindowStart };

struct FdiConfig {
    double sigma_c = 0.01;
    AttackWindow window;
    double B_j = 2.1;
    Linearization linearization = Linearization::PerSample;
    std::uint64_t seed = 2;

    void validate() const {
        require(std::isfinite(sigma_c) && sigma_c >= 0.0, "FdiConfig: sigma_c must be >= 0");
        require(window.t_start < window.t_end, "FdiConfig: require t_start < t_end");
        require(B_j > 0.0, "FdiConfig: B_j must be > 0");
    }
};

enum class LossSemantics { Zeroed, HoldLast };

struct DosConfig {
    double rho = 1.0;
    int d = 1;
    bool limit_consecutive = false;  // cap consecutive losses at d
    AttackWindow window;
    LossSemantics semantics = LossSemantics::Zeroed;
    std::uint64_t seed = 3;

    void validate() const {
        require(rho > 0.0 && rho <= 1.0, "DosConfig: rho must be in (0, 1]");
        require(d >= 1, "DosConfig: d must be >= 1");
        require(window.t_start < window.t_end, "DosConfig: require t_start < t_end");
    }
};

struct AttackLogRow {
    std::size_t index = 0;
    double t = 0.0;
    bool injected = false;
    StateVector c = StateVector::Zero();
    MeasVector a = MeasVector::Zero();
    std::vector<int> mask;
    double residual_before = 0.0;
    double residual_after = 0.0;
    bool stealth_pass = true;
};

struct AttackLog {
    std::string kind;  // "fdi" | "dos"
    std::vector<AttackLogRow> rows;

    std::size_t injected_count() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.injected;
        return n;
    }
};

struct AttackResult {
    MeasurementStream stream;
    AttackLog log;
};

inline std::vector<std::size_t> window_indices(const MeasurementStream& s, const AttackWindow& w) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (w.contains(s[k].t)) idx.push_back(k);
    return idx;
}

// Injects a = H c (fresh c per sample) inside the window. The estimate x_hat
// is the per-sample feedback point; H is that sample's Jacobian or the one at
// the window start. Draws that fail bad-data detection are skipped.
inline AttackResult apply_fdi(const MeasurementStream& in, const FdiConfig& cfg,
                              const std::vector<std::optional<JacobianH>>& feedback) {
    cfg.validate();
    require(feedback.size() == in.size(), "apply_fdi: feedback length must match the stream");
    AttackResult out{in, {"fdi", {}}};
    std::mt19937_64 rng(cfg.seed);
    std::optional<JacobianH> held;
    for (std::size_t k : window_indices(in, cfg.window)) {
        if (!feedback[k])
            throw ValidationError("apply_fdi: missing filter feedback at sample " + std::to_string(k));
        if (!held || cfg.linearization == Linearization::PerSample) held = feedback[k];
        const JacobianH& J = *held;
        const StateVector x_hat = feedback[k]->point.vec();
        AttackLogRow row;
        row.index = k;
        row.t = in[k].t;
        row.c = draw_attack_vector(cfg.sigma_c, rng);
        row.a = build_fdi(row.c, J);
        row.residual_before = residual_norm(in[k].z, x_hat, J);
        const MeasVector z_a = in[k].z + row.a;
        const StealthResult chk = stealth_check(z_a, x_hat + row.c, J, cfg.B_j);
        row.residual_after = chk.residual;
        row.stealth_pass = chk.pass;
        row.injected = chk.pass;
        if (chk.pass) out.stream[k].z = z_a;
        out.log.rows.push_back(std::move(row));
    }
    return out;
}

// Transmission states for z_k, z_{k-1}, ..., z_{k-d}: 0 = lost with
// probability rho, 1 = delivered.
inline std::vector<int> draw_dos_mask(const DosConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<int> mu(static_cast<std::size_t>(cfg.d) + 1);
    for (auto& m : mu) m = uni(rng) < cfg.rho ? 0 : 1;
    return mu;
}

inline AttackResult apply_dos(const MeasurementStream& in, const DosConfig& cfg) {
    cfg.validate();
    AttackResult out{in, {"dos", {}}};
    std::mt19937_64 rng(cfg.seed);
    std::optional<std::size_t> last_good;
    int run = 0;
    const auto window = window_indices(in, cfg.window);
    std::size_t w = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
        const bool in_window = w < window.size() && window[w] == k;
        if (!in_window) {
            last_good = k;
            run = 0;
            continue;
        }
        ++w;
        AttackLogRow row;
        row.index = k;
        row.t = in[k].t;
        row.mask = draw_dos_mask(cfg, rng);
        if (cfg.limit_consecutive && row.mask[0] == 0 && run >= cfg.d) row.mask[0] = 1;
        const bool lost = row.mask[0] == 0;
        row.injected = lost;
        if (lost) {
            ++run;
            auto& s = out.stream[k];
            if (cfg.semantics == LossSemantics::HoldLast && last_good)
                s.z = out.stream[*last_good].z;
            else
                s.z.setZero();
            s.valid = {false, false, false};
            row.a = s.z - in[k].z;
        } else {
            run = 0;
            last_good = k;
        }
        out.log.rows.push_back(std::move(row));
    }
    return out;
}

inline void write_attack_log(std::ostream& out, const AttackLog& log) {
    out << "index,t,injected,c_delta,c_omega,c_Eqp,c_Edp,a_delta,a_omega,a_Pe,mask,residual_before,residual_after,"
           "stealth_pass\n";
    for (const auto& r : log.rows) {
        std::string mask;
        for (int m : r.mask) mask += char('0' + m);
        out << r.index << ',' << io::fmt(r.t) << ',' << int(r.injected);
        for (int i = 0; i < kStateDim; ++i) out << ',' << io::fmt(r.c(i));
        for (int i = 0; i < kMeasDim; ++i) out << ',' << io::fmt(r.a(i));
        out << ',' << (mask.empty() ? "-" : mask) << ',' << io::fmt(r.residual_before) << ','
            << io::fmt(r.residual_after) << ',' << int(r.stealth_pass) << '\n';
    }
}

}  // namespace gendse

#endif  // GENDSE_ATTACKS_HPP
