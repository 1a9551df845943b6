#ifndef GENDSE_DYNAMICS_HPP
#define GENDSE_DYNAMICS_HPP

// Two-axis (fourth-order) synchronous generator model, its governor and
// exciter loops, and a single-machine / infinite-bus truth simulator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gendse/types.hpp"

namespace gendse {

struct GeneratorParams {
    double T_j = 4.0;     // inertia time constant, s
    double D = 2.0;       // damping, pu
    double T_d0p = 6.0;   // s
    double T_q0p = 0.5;   // s
    double X_d = 1.2;
    double X_dp = 0.3;
    double X_q = 0.55;
    double X_qp = 0.35;

    void validate() const {
        require(std::isfinite(T_j) && T_j > 0.0, "GeneratorParams: T_j must be > 0");
        require(std::isfinite(D) && D >= 0.0, "GeneratorParams: D must be >= 0");
        require(std::isfinite(T_d0p) && T_d0p > 0.0, "GeneratorParams: T_d0p must be > 0");
        require(std::isfinite(T_q0p) && T_q0p > 0.0, "GeneratorParams: T_q0p must be > 0");
        require(std::isfinite(X_dp) && X_dp > 0.0 && X_d > X_dp,
                "GeneratorParams: require X_d > X_dp > 0");
        require(std::isfinite(X_qp) && X_qp > 0.0 && X_q > X_qp,
                "GeneratorParams: require X_q > X_qp > 0");
    }
};

struct GeneratorState {
    double delta = 0.0;  // rad
    double omega = 1.0;  // pu
    double Eqp = 1.0;
    double Edp = 0.0;

    StateVector vec() const { return StateVector(delta, omega, Eqp, Edp); }
    static GeneratorState from(const StateVector& x) { return {x(kDelta), x(kOmega), x(kEqp), x(kEdp)}; }
    bool finite() const {
        return std::isfinite(delta) && std::isfinite(omega) && std::isfinite(Eqp) && std::isfinite(Edp);
    }
};

struct TerminalPhasor {
    double U = 1.0;    // pu
    double phi = 0.0;  // rad
};

struct ControlInput {
    double T_m = 0.0;
    double E_f = 1.0;
    double U = 1.0;
    double phi = 0.0;

    TerminalPhasor terminal() const { return {U, phi}; }
};

struct StatorSolution {
    double i_d = 0.0;
    double i_q = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;
    double P_e = 0.0;
    double T_e = 0.0;
};

// Electrical power from the closed-form terminal expression.
inline double electrical_power(double delta, double Eqp, double Edp, TerminalPhasor term,
                               const GeneratorParams& p) {
    const double th = delta - term.phi;
    const double U = term.U;
    return 0.5 * U * U * std::sin(2.0 * th) * (1.0 / p.X_qp - 1.0 / p.X_dp) +
           U * std::sin(th) * Eqp / p.X_dp + U * std::cos(th) * Edp / p.X_qp;
}

inline double electrical_power(const GeneratorState& s, TerminalPhasor term, const GeneratorParams& p) {
    return electrical_power(s.delta, s.Eqp, s.Edp, term, p);
}

// Stator algebra with the terminal phasor imposed. Closure:
// v_q = E'q - X'd i_d, v_d = X'q i_q - E'd, which reproduces electrical_power().
inline StatorSolution stator_solve(const GeneratorState& s, TerminalPhasor term, const GeneratorParams& p) {
    if (!s.finite() || !std::isfinite(term.U) || !std::isfinite(term.phi))
        throw ValidationError("stator_solve: non-finite input");
    require(term.U >= 0.0, "stator_solve: U must be >= 0");
    StatorSolution out;
    const double th = s.delta - term.phi;
    out.v_d = term.U * std::sin(th);
    out.v_q = term.U * std::cos(th);
    out.i_d = (s.Eqp - out.v_q) / p.X_dp;
    out.i_q = (out.v_d + s.Edp) / p.X_qp;
    out.P_e = out.v_d * out.i_d + out.v_q * out.i_q;
    out.T_e = out.P_e;
    return out;
}

// Time derivatives given the stator currents and electromagnetic torque.
inline StateVector derivative_from_stator(const GeneratorState& s, double T_m, double E_f,
                                          const StatorSolution& st, const GeneratorParams& p) {
    StateVector d;
    d(kDelta) = s.omega - 1.0;
    d(kOmega) = (T_m - st.T_e - p.D * (s.omega - 1.0)) / p.T_j;
    d(kEqp) = (E_f - s.Eqp - (p.X_d - p.X_dp) * st.i_d) / p.T_d0p;
    d(kEdp) = (-s.Edp + (p.X_q - p.X_qp) * st.i_q) / p.T_q0p;
    return d;
}

inline StateVector state_derivative(const GeneratorState& s, const ControlInput& u, const GeneratorParams& p) {
    return derivative_from_stator(s, u.T_m, u.E_f, stator_solve(s, u.terminal(), p), p);
}

// Classical four-stage Runge-Kutta on an arbitrary vector field.
template <class Vec, class F>
Vec rk4_advance(const Vec& x, F&& f, double dt) {
    const Vec k1 = f(x);
    const Vec k2 = f(Vec(x + 0.5 * dt * k1));
    const Vec k3 = f(Vec(x + 0.5 * dt * k2));
    const Vec k4 = f(Vec(x + dt * k3));
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One RK4 step with the control input (including the terminal phasor) held.
inline GeneratorState rk4_step(const GeneratorState& s, const ControlInput& u, const GeneratorParams& p, double dt,
                               long step_index = -1) {
    require(dt > 0.0, "rk4_step: dt must be > 0");
    auto f = [&](const StateVector& x) { return state_derivative(GeneratorState::from(x), u, p); };
    StateVector next;
    try {
        next = rk4_advance(s.vec(), f, dt);
    } catch (const ValidationError&) {
        next.setConstant(std::nan(""));
    }
    if (!next.allFinite()) {
        std::ostringstream msg;
        msg << "rk4_step: non-finite state";
        if (step_index >= 0) msg << " at step " << step_index;
        throw NumericalError(msg.str());
    }
    return GeneratorState::from(next);
}

// ---------------------------------------------------------------------------
// Governor: droop order -> servo lag -> (1+sT3)/(1+sTc) -> (1+sT4)/(1+sT5)

struct GovernorParams {
    double omega_ref = 1.0;
    double r_inv = 5.0;
    double T_max = 1.5;
    double T_s = 0.1;
    double T_c = 0.5;
    double T_3 = 0.0;
    double T_4 = 0.0;
    double T_5 = 0.0;

    void validate() const {
        require(T_s > 0.0 && T_c > 0.0, "GovernorParams: T_s and T_c must be > 0");
        require(T_max > 0.0, "GovernorParams: T_max must be > 0");
        require(T_3 >= 0.0 && T_4 >= 0.0 && T_5 >= 0.0, "GovernorParams: T_3, T_4, T_5 must be >= 0");
        require(std::isfinite(r_inv) && r_inv >= 0.0, "GovernorParams: r_inv must be >= 0");
    }
};

struct GovernorState {
    double scheduled = 0.0;  // power reference that gives T_m0 at omega = 1
    double servo = 0.0;
    double turbine = 0.0;    // internal state of the T_3/T_c lead-lag
    double reheat = 0.0;     // internal state of the T_4/T_5 lead-lag
};

namespace detail {

// Exact zero-order-hold update of y' = (u - y) / T.
inline double lag_update(double y, double u, double T, double dt) {
    if (T <= 0.0) return u;
    return y + (1.0 - std::exp(-dt / T)) * (u - y);
}

inline double lead_lag_out(double u, double z, double T_lead, double T_lag) {
    if (T_lag <= 0.0) return u;
    const double a = T_lead / T_lag;
    return a * u + (1.0 - a) * z;
}

}  // namespace detail

inline double governor_output(const GovernorState& g, const GovernorParams& p) {
    const double y2 = detail::lead_lag_out(g.servo, g.turbine, p.T_3, p.T_c);
    return detail::lead_lag_out(y2, g.reheat, p.T_4, p.T_5);
}

inline GovernorState governor_settled(double T_m0, const GovernorParams& p) {
    return {T_m0 - p.r_inv * (p.omega_ref - 1.0), T_m0, T_m0, T_m0};
}

inline std::pair<double, GovernorState> governor_step(double omega, GovernorState g, const GovernorParams& p,
                                                      double dt) {
    require(dt > 0.0, "governor_step: dt must be > 0");
    const double order = std::clamp(g.scheduled + p.r_inv * (p.omega_ref - omega), 0.0, p.T_max);
    g.servo = detail::lag_update(g.servo, order, p.T_s, dt);
    g.turbine = detail::lag_update(g.turbine, g.servo, p.T_c, dt);
    const double y2 = detail::lead_lag_out(g.servo, g.turbine, p.T_3, p.T_c);
    if (p.T_5 > 0.0) g.reheat = detail::lag_update(g.reheat, y2, p.T_5, dt);
    return {governor_output(g, p), g};
}

// ---------------------------------------------------------------------------
// Static exciter: K_a / (1 + s T_a) on (V_ref - U - K_g E_f), non-windup limits.

struct ExciterParams {
    double K_a = 20.0;
    double T_a = 0.2;
    double K_g = 0.0;
    double V_b = 1.0;   // potential-circuit output, scales the upper ceiling
    double V_ref = 1.0; // overwritten by steady-state initialization
    double E_f_min = 0.0;
    double E_f_max = 5.0;

    double upper() const { return V_b * E_f_max; }

    void validate() const {
        require(K_a > 0.0, "ExciterParams: K_a must be > 0");
        require(T_a > 0.0, "ExciterParams: T_a must be > 0");
        require(V_b > 0.0, "ExciterParams: V_b must be > 0");
        require(E_f_min < upper(), "ExciterParams: require E_f_min < V_b * E_f_max");
    }
};

struct ExciterState {
    double V_r = 1.0;
};

inline double exciter_output(const ExciterState& e, const ExciterParams& p) {
    return std::clamp(e.V_r, p.E_f_min, p.upper());
}

inline std::pair<double, ExciterState> exciter_step(double U, ExciterState e, const ExciterParams& p, double dt) {
    require(dt > 0.0, "exciter_step: dt must be > 0");
    const double fb = exciter_output(e, p);
    const double target = p.K_a * (p.V_ref - U - p.K_g * fb);
    e.V_r = std::clamp(detail::lag_update(e.V_r, target, p.T_a, dt), p.E_f_min, p.upper());
    return {exciter_output(e, p), e};
}

// ---------------------------------------------------------------------------
// Steady-state initialization from a terminal operating point.

struct TerminalTarget {
    double P0 = 0.8;
    double Q0 = 0.0;
    double U0 = 1.0;
    double phi0 = 0.0;
};

struct OperatingPoint {
    GeneratorState state;
    ControlInput input;
    GovernorState governor;
    ExciterState exciter;
    double V_ref = 1.0;
    double Q0 = 0.0;
};

inline OperatingPoint steady_state_init(const TerminalTarget& tgt, const GeneratorParams& p,
                                        const GovernorParams& gov, const ExciterParams& exc) {
    using cplx = std::complex<double>;
    p.validate();
    require(std::isfinite(tgt.P0) && std::isfinite(tgt.Q0) && std::isfinite(tgt.phi0),
            "steady_state_init: non-finite target");
    require(tgt.U0 > 0.0, "steady_state_init: U0 must be > 0");

    const cplx V = std::polar(tgt.U0, tgt.phi0);
    const cplx I = std::conj(cplx(tgt.P0, tgt.Q0) / V);
    // With the chosen closure and E'd settled, v_d = (2 X'q - X_q) i_q.
    const double x_eff = 2.0 * p.X_qp - p.X_q;
    const cplx E = V + cplx(0.0, x_eff) * I;
    const double delta = std::arg(E);
    const cplx rot = cplx(0.0, 1.0) * std::polar(1.0, -delta);
    const cplx vdq = rot * V;
    const cplx idq = rot * I;

    OperatingPoint op;
    op.state.delta = delta;
    op.state.omega = 1.0;
    op.state.Edp = (p.X_q - p.X_qp) * idq.imag();
    op.state.Eqp = vdq.imag() + p.X_dp * idq.real();
    if (!(op.state.Eqp > 0.0)) {
        std::ostringstream msg;
        msg << "steady_state_init: infeasible target, required E'q = " << op.state.Eqp << " <= 0";
        throw ValidationError(msg.str());
    }
    const double E_f0 = op.state.Eqp + (p.X_d - p.X_dp) * idq.real();
    if (E_f0 < exc.E_f_min || E_f0 > exc.upper()) {
        std::ostringstream msg;
        msg << "steady_state_init: infeasible target, E_f0 = " << E_f0 << " outside exciter limits";
        throw ValidationError(msg.str());
    }
    const double T_m0 = tgt.P0;
    if (T_m0 < 0.0 || T_m0 > gov.T_max) {
        std::ostringstream msg;
        msg << "steady_state_init: infeasible target, T_m0 = " << T_m0 << " outside [0, T_max]";
        throw ValidationError(msg.str());
    }
    op.input = {T_m0, E_f0, tgt.U0, tgt.phi0};
    op.governor = governor_settled(T_m0, gov);
    op.exciter.V_r = E_f0;
    op.V_ref = tgt.U0 + E_f0 * (1.0 / exc.K_a + exc.K_g);
    op.Q0 = tgt.Q0;
    return op;
}

// ---------------------------------------------------------------------------
// Single machine / infinite bus network.

enum class FaultKind { None, VinfDip, XeChange };

struct SmibParams {
    double V_inf = 1.0;
    double X_e = 0.4;
    FaultKind fault = FaultKind::None;
    double t_on = 1.2;
    double t_off = 1.5;
    double fault_V_inf_factor = 0.4;  // V_inf during the fault, as a fraction
    double fault_X_e = 1.0;           // X_e during the fault

    void validate() const {
        require(V_inf > 0.0, "SmibParams: V_inf must be > 0");
        require(X_e > 0.0, "SmibParams: X_e must be > 0");
        if (fault != FaultKind::None) {
            require(t_on < t_off, "SmibParams: require t_on < t_off");
            require(fault_V_inf_factor >= 0.0, "SmibParams: fault V_inf factor must be >= 0");
            require(fault_X_e > 0.0, "SmibParams: faulted X_e must be > 0");
        }
    }
};

struct NetworkState {
    double V_inf = 1.0;
    double X_e = 0.4;
};

struct SmibSolution {
    StatorSolution stator;
    TerminalPhasor terminal;
};

// Generator stator closure tied to V_inf at angle 0 through reactance X_e.
inline SmibSolution smib_solve(const GeneratorState& s, NetworkState net, const GeneratorParams& p) {
    SmibSolution out;
    auto& st = out.stator;
    st.i_d = (s.Eqp - net.V_inf * std::cos(s.delta)) / (p.X_dp + net.X_e);
    st.i_q = (net.V_inf * std::sin(s.delta) + s.Edp) / (p.X_qp + net.X_e);
    st.v_d = p.X_qp * st.i_q - s.Edp;
    st.v_q = s.Eqp - p.X_dp * st.i_d;
    st.P_e = st.v_d * st.i_d + st.v_q * st.i_q;
    st.T_e = st.P_e;
    out.terminal.U = std::hypot(st.v_d, st.v_q);
    out.terminal.phi = s.delta - std::atan2(st.v_d, st.v_q);
    return out;
}

inline StateVector smib_derivative(const GeneratorState& s, double T_m, double E_f, NetworkState net,
                                   const GeneratorParams& p) {
    return derivative_from_stator(s, T_m, E_f, smib_solve(s, net, p).stator, p);
}

// Terminal operating point for a given (P0, U0) against the infinite bus.
inline TerminalTarget smib_terminal_target(double P0, double U0, const SmibParams& net) {
    using cplx = std::complex<double>;
    require(U0 > 0.0, "smib_terminal_target: U0 must be > 0");
    const double s = P0 * net.X_e / (U0 * net.V_inf);
    require(std::abs(s) < 1.0, "smib_terminal_target: P0 exceeds the transfer limit");
    const double phi0 = std::asin(s);
    const cplx V = std::polar(U0, phi0);
    const cplx I = (V - cplx(net.V_inf, 0.0)) / cplx(0.0, net.X_e);
    const cplx S = V * std::conj(I);
    return {S.real(), S.imag(), U0, phi0};
}

// ---------------------------------------------------------------------------
// Truth trajectories.

struct TruthScenario {
    GeneratorParams gen;
    GovernorParams gov;
    ExciterParams exc;
    SmibParams smib;
    double P0 = 0.8;
    double U0 = 1.0;
    double duration = 20.0;
    double dt = 0.02;
    bool controllers = true;  // false holds T_m and E_f at their initial values
};

struct TruthTrajectory {
    double dt = 0.02;
    std::vector<double> t;
    std::vector<GeneratorState> states;
    std::vector<ControlInput> inputs;
    std::vector<StatorSolution> stator;

    std::size_t size() const { return t.size(); }
};

inline long grid_index(double t, double dt) { return std::lround(t / dt); }

inline NetworkState network_at(const SmibParams& smib, long k, double dt) {
    NetworkState net{smib.V_inf, smib.X_e};
    if (smib.fault == FaultKind::None) return net;
    if (k >= grid_index(smib.t_on, dt) && k < grid_index(smib.t_off, dt)) {
        if (smib.fault == FaultKind::VinfDip)
            net.V_inf = smib.fault_V_inf_factor * smib.V_inf;
        else
            net.X_e = smib.fault_X_e;
    }
    return net;
}

inline std::size_t sample_count(double duration, double dt) {
    require(dt > 0.0 && duration >= 0.0, "sample_count: need dt > 0 and duration >= 0");
    return static_cast<std::size_t>(std::llround(duration / dt)) + 1;
}

inline OperatingPoint smib_operating_point(const TruthScenario& sc) {
    return steady_state_init(smib_terminal_target(sc.P0, sc.U0, sc.smib), sc.gen, sc.gov, sc.exc);
}

inline TruthTrajectory simulate_truth(const TruthScenario& sc) {
    sc.gen.validate();
    sc.gov.validate();
    sc.smib.validate();
    const OperatingPoint op = smib_operating_point(sc);
    ExciterParams exc = sc.exc;
    exc.V_ref = op.V_ref;
    exc.validate();

    const std::size_t n = sample_count(sc.duration, sc.dt);
    TruthTrajectory tr;
    tr.dt = sc.dt;
    tr.t.reserve(n);
    tr.states.reserve(n);
    tr.inputs.reserve(n);
    tr.stator.reserve(n);

    GeneratorState x = op.state;
    GovernorState gov = op.governor;
    ExciterState ex = op.exciter;
    double T_m = op.input.T_m;
    double E_f = op.input.E_f;

    for (std::size_t k = 0; k < n; ++k) {
        const NetworkState net = network_at(sc.smib, static_cast<long>(k), sc.dt);
        const SmibSolution sol = smib_solve(x, net, sc.gen);
        if (k > 0 && sc.controllers) {
            std::tie(T_m, gov) = governor_step(x.omega, gov, sc.gov, sc.dt);
            std::tie(E_f, ex) = exciter_step(sol.terminal.U, ex, exc, sc.dt);
        }
        tr.t.push_back(static_cast<double>(k) * sc.dt);
        tr.states.push_back(x);
        tr.inputs.push_back({T_m, E_f, sol.terminal.U, sol.terminal.phi});
        tr.stator.push_back(sol.stator);
        if (k + 1 == n) break;

        auto f = [&](const StateVector& v) { return smib_derivative(GeneratorState::from(v), T_m, E_f, net, sc.gen); };
        const StateVector next = rk4_advance(x.vec(), f, sc.dt);
        if (!next.allFinite() || !(next(kOmega) > 0.0)) {
            std::ostringstream msg;
            msg << "simulate_truth: divergence at t = " << static_cast<double>(k + 1) * sc.dt << " s";
            throw NumericalError(msg.str());
        }
        x = GeneratorState::from(next);
    }
    return tr;
}

// Integrates the generator against a recorded terminal-voltage trace, holding
// (U, phi) over each step.
inline TruthTrajectory simulate_open_terminal(std::span<const double> t, std::span<const TerminalPhasor> terminal,
                                              const OperatingPoint& op, const GeneratorParams& gen,
                                              const GovernorParams& gov_p, ExciterParams exc, bool controllers) {
    require(t.size() == terminal.size() && t.size() >= 2, "simulate_open_terminal: need >= 2 matching samples");
    const double dt = t[1] - t[0];
    exc.V_ref = op.V_ref;
    TruthTrajectory tr;
    tr.dt = dt;
    GeneratorState x = op.state;
    GovernorState gov = op.governor;
    ExciterState ex = op.exciter;
    double T_m = op.input.T_m;
    double E_f = op.input.E_f;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (k > 0 && controllers) {
            std::tie(T_m, gov) = governor_step(x.omega, gov, gov_p, dt);
            std::tie(E_f, ex) = exciter_step(terminal[k].U, ex, exc, dt);
        }
        const ControlInput u{T_m, E_f, terminal[k].U, terminal[k].phi};
        tr.t.push_back(t[k]);
        tr.states.push_back(x);
        tr.inputs.push_back(u);
        tr.stator.push_back(stator_solve(x, u.terminal(), gen));
        if (k + 1 == t.size()) break;
        x = rk4_step(x, u, gen, dt, static_cast<long>(k));
    }
    return tr;
}

}  // namespace gendse

#endif  // GENDSE_DYNAMICS_HPP
