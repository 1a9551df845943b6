#ifndef GENDSE_ESTIMATORS_HPP
#define GENDSE_ESTIMATORS_HPP

// Generator dynamic state estimation: CKF / RCKF forecast-filter cycle with
// governor and exciter feedback, plus the forecast-vs-estimate attack flag.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gendse/cubature.hpp"
#include "gendse/dynamics.hpp"
#include "gendse/io.hpp"
#include "gendse/measurement.hpp"
#include "gendse/types.hpp"

namespace gendse {

enum class FilterKind { Ckf, Rckf };

inline std::string to_string(FilterKind k) { return k == FilterKind::Ckf ? "ckf" : "rckf"; }

struct FilterSettings {
    StateVector q_diag = StateVector::Constant(4e-9);  // truth and filter share one model
    StateVector p0_diag = StateVector::Constant(1e-4);
    StateVector init_sigma = StateVector::Constant(1e-2);  // perturbation of the initial estimate
    double huber_C = 1.5;
    double dj_safety = 1.0;
    std::size_t dj_warmup = 50;  // samples excluded from calibration and flagging

    void validate() const {
        require((q_diag.array() >= 0.0).all(), "FilterSettings: Q diagonal must be >= 0");
        require((p0_diag.array() > 0.0).all(), "FilterSettings: P0 diagonal must be > 0");
        require((init_sigma.array() >= 0.0).all(), "FilterSettings: init sigma must be >= 0");
        require(huber_C > 0.0, "FilterSettings: C must be > 0");
        require(dj_safety >= 1.0, "FilterSettings: D_J safety factor must be >= 1");
    }
};

struct FilterState {
    StateVector x_hat = StateVector::Zero();
    StateMatrix P = StateMatrix::Identity();
    StateMatrix Q = StateMatrix::Zero();
    std::size_t k = 0;
};

// Generator vector field without input validation, for use inside the filter
// where cubature points may leave the physical region.
inline StateVector model_derivative(const StateVector& x, const ControlInput& u, const GeneratorParams& p) {
    const double th = x(kDelta) - u.phi;
    const double v_d = u.U * std::sin(th);
    const double v_q = u.U * std::cos(th);
    StatorSolution st;
    st.i_d = (x(kEqp) - v_q) / p.X_dp;
    st.i_q = (v_d + x(kEdp)) / p.X_qp;
    st.P_e = v_d * st.i_d + v_q * st.i_q;
    st.T_e = st.P_e;
    return derivative_from_stator(GeneratorState::from(x), u.T_m, u.E_f, st, p);
}

inline StateVector state_map(const StateVector& x, const ControlInput& u, const GeneratorParams& p, double dt) {
    return rk4_advance(x, [&](const StateVector& v) { return model_derivative(v, u, p); }, dt);
}

inline MeasVector measurement_function(const StateVector& x, TerminalPhasor term, const GeneratorParams& p) {
    return MeasVector(x(kDelta), x(kOmega), electrical_power(x(kDelta), x(kEqp), x(kEdp), term, p));
}

inline cubature::Prediction<kStateDim> forecast(const FilterState& fs, const ControlInput& u,
                                                const GeneratorParams& p, double dt) {
    require(dt > 0.0, "forecast: dt must be > 0");
    return cubature::forecast<kStateDim>(fs.x_hat, fs.P, fs.Q,
                                         [&](const StateVector& x, int) { return state_map(x, u, p, dt); });
}

inline cubature::Posterior<kStateDim, kMeasDim> measurement_update(const StateVector& x_pred,
                                                                   const StateMatrix& P_pred, const MeasVector& z,
                                                                   const MeasMatrix& R_eff, TerminalPhasor term,
                                                                   const GeneratorParams& p) {
    return cubature::ckf_update<kStateDim, kMeasDim>(
        x_pred, P_pred, z, R_eff, [&](const StateVector& x) { return measurement_function(x, term, p); });
}

inline cubature::RobustPosterior<kStateDim, kMeasDim> rckf_update(const StateVector& x_pred,
                                                                  const StateMatrix& P_pred, const MeasVector& z,
                                                                  const MeasMatrix& R, TerminalPhasor term,
                                                                  const GeneratorParams& p, double C) {
    return cubature::rckf_update<kStateDim, kMeasDim>(
        x_pred, P_pred, z, R, C, [&](const StateVector& x) { return measurement_function(x, term, p); });
}

// ---------------------------------------------------------------------------
// Attack identification.

struct IdentificationState {
    std::optional<double> D_J;
};

inline double estimate_gap(const StateVector& x_post, const StateVector& x_pred) { return (x_post - x_pred).norm(); }

inline bool identify_attack(const StateVector& x_post, const StateVector& x_pred, const IdentificationState& id) {
    if (!id.D_J) throw ValidationError("identify_attack: D_J has not been calibrated");
    return estimate_gap(x_post, x_pred) > *id.D_J;
}

inline double calibrate_DJ(std::span<const double> gaps, double safety = 1.0) {
    if (gaps.empty()) throw ValidationError("calibrate_DJ: empty calibration run");
    return safety * *std::max_element(gaps.begin(), gaps.end());
}

// ---------------------------------------------------------------------------
// Sequential estimator with governor / exciter feedback.

struct StepRecord {
    double t = 0.0;
    StateVector x_pred = StateVector::Zero();
    StateVector x_post = StateVector::Zero();
    StateVector P_diag = StateVector::Zero();
    MeasVector innovation = MeasVector::Zero();
    MeasVector pzz_pre_diag = MeasVector::Zero();  // innovation variance with the assumed R
    MeasVector r_eff_diag = MeasVector::Zero();
    int huber_triggered = 0;
    double min_eig = 0.0;
    double asymmetry = 0.0;
    double jitter = 0.0;
    double forecast_ms = 0.0;
    double update_ms = 0.0;
    bool flagged = false;

    double gap() const { return estimate_gap(x_post, x_pred); }
};

struct FilterRun {
    FilterKind kind = FilterKind::Ckf;
    std::vector<StepRecord> steps;
    std::optional<double> D_J;

    std::size_t size() const { return steps.size(); }
    std::vector<double> gaps() const {
        std::vector<double> g;
        g.reserve(steps.size());
        for (const auto& s : steps) g.push_back(s.gap());
        return g;
    }
    std::size_t jitter_events() const {
        return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.jitter > 0.0; }));
    }
};

struct EstimatorModel {
    GeneratorParams gen;
    GovernorParams gov;
    ExciterParams exc;  // V_ref already resolved
    NoiseModel noise;
    FilterSettings settings;
};

class GeneratorFilter {
public:
    GeneratorFilter(FilterKind kind, EstimatorModel model, const OperatingPoint& op, const StateVector& x0)
        : kind_(kind), model_(std::move(model)), gov_(op.governor), exc_(op.exciter), T_m_(op.input.T_m),
          E_f_(op.input.E_f) {
        model_.settings.validate();
        fs_.x_hat = x0;
        fs_.P = model_.settings.p0_diag.asDiagonal();
        fs_.Q = model_.settings.q_diag.asDiagonal();
    }

    const FilterState& state() const { return fs_; }
    FilterKind kind() const { return kind_; }

    StepRecord step(const MeasurementSample& s) {
        using clock = std::chrono::steady_clock;
        StepRecord rec;
        rec.t = s.t;
        const auto t0 = clock::now();
        StateVector x_pred = fs_.x_hat;
        StateMatrix P_pred = fs_.P;
        if (prev_) {
            const double dt = s.t - prev_->t;
            const ControlInput u{T_m_, E_f_, prev_->U_meas, prev_->phi_meas};
            const auto pred = forecast(fs_, u, model_.gen, dt);
            x_pred = pred.x;
            P_pred = pred.P;
            rec.jitter = pred.jitter;
            rec.asymmetry = pred.asymmetry;
        }
        const auto t1 = clock::now();

        const TerminalPhasor term = s.terminal();
        const MeasMatrix R = noise_covariance(term, GeneratorState::from(x_pred), model_.gen, model_.noise);
        const auto mm = cubature::measurement_moments<kStateDim, kMeasDim>(
            x_pred, P_pred, [&](const StateVector& x) { return measurement_function(x, term, model_.gen); });
        cubature::Posterior<kStateDim, kMeasDim> post;
        if (kind_ == FilterKind::Ckf) {
            post = cubature::correct<kStateDim, kMeasDim>(x_pred, P_pred, mm, s.z, R);
            rec.pzz_pre_diag = post.Pzz.diagonal();
            rec.r_eff_diag = R.diagonal();
        } else {
            const auto rob = cubature::robust_correct<kStateDim, kMeasDim>(x_pred, P_pred, mm, s.z, R,
                                                                           model_.settings.huber_C);
            post = rob.post;
            rec.pzz_pre_diag = rob.Pzz_pre.diagonal();
            rec.r_eff_diag = rob.huber.R_bar.diagonal();
            rec.huber_triggered = rob.huber.triggered;
        }
        const auto t2 = clock::now();
        rec.jitter = std::max(rec.jitter, mm.jitter);

        if (!post.x.allFinite() || !post.P.allFinite())
            throw NumericalError("filter " + to_string(kind_) + ": non-finite estimate at t = " + io::fmt(s.t));
        fs_.x_hat = post.x;
        fs_.P = post.P;
        ++fs_.k;

        rec.x_pred = x_pred;
        rec.x_post = post.x;
        rec.P_diag = post.P.diagonal();
        rec.innovation = post.innovation;
        rec.asymmetry = std::max(rec.asymmetry, post.asymmetry);
        rec.min_eig = cubature::min_eigenvalue<kStateDim>(post.P);
        rec.forecast_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        rec.update_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();

        // Controls for the next forecast: governor on the estimated speed,
        // exciter on the measured terminal voltage.
        if (prev_) {
            const double dt = s.t - prev_->t;
            std::tie(T_m_, gov_) = governor_step(post.x(kOmega), gov_, model_.gov, dt);
            std::tie(E_f_, exc_) = exciter_step(s.U_meas, exc_, model_.exc, dt);
        }
        prev_ = s;
        return rec;
    }

private:
    FilterKind kind_;
    EstimatorModel model_;
    FilterState fs_;
    GovernorState gov_;
    ExciterState exc_;
    double T_m_;
    double E_f_;
    std::optional<MeasurementSample> prev_;
};

inline FilterRun run_filter(FilterKind kind, const MeasurementStream& stream, const EstimatorModel& model,
                            const OperatingPoint& op, const StateVector& x0) {
    require(!stream.empty(), "run_filter: empty stream");
    GeneratorFilter f(kind, model, op, x0);
    FilterRun run;
    run.kind = kind;
    run.steps.reserve(stream.size());
    for (std::size_t k = 0; k < stream.size(); ++k) {
        try {
            run.steps.push_back(f.step(stream[k]));
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (sample " + std::to_string(k) + ")");
        }
    }
    return run;
}

// D_J from the post-warm-up part of a clean run.
inline double calibrate_DJ(const FilterRun& clean, const FilterSettings& s) {
    const auto g = clean.gaps();
    if (g.size() <= s.dj_warmup) throw ValidationError("calibrate_DJ: calibration run shorter than the warm-up");
    return calibrate_DJ(std::span<const double>(g).subspan(s.dj_warmup), s.dj_safety);
}

inline std::size_t apply_identification(FilterRun& run, double D_J, std::size_t warmup) {
    IdentificationState id{D_J};
    run.D_J = D_J;
    std::size_t flagged = 0;
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
        auto& s = run.steps[k];
        s.flagged = k >= warmup && identify_attack(s.x_post, s.x_pred, id);
        flagged += s.flagged;
    }
    return flagged;
}

inline void write_filter_run(std::ostream& out, const FilterRun& run) {
    out << "t,pred_delta,pred_omega,pred_Eqp,pred_Edp,post_delta,post_omega,post_Eqp,post_Edp,"
           "P_delta,P_omega,P_Eqp,P_Edp,innov_delta,innov_omega,innov_Pe,Reff_delta,Reff_omega,Reff_Pe,flag\n";
    for (const auto& s : run.steps) {
        out << io::fmt(s.t);
        for (int i = 0; i < kStateDim; ++i) out << ',' << io::fmt(s.x_pred(i));
        for (int i = 0; i < kStateDim; ++i) out << ',' << io::fmt(s.x_post(i));
        for (int i = 0; i < kStateDim; ++i) out << ',' << io::fmt(s.P_diag(i));
        for (int i = 0; i < kMeasDim; ++i) out << ',' << io::fmt(s.innovation(i));
        for (int i = 0; i < kMeasDim; ++i) out << ',' << io::fmt(s.r_eff_diag(i));
        out << ',' << int(s.flagged) << '\n';
    }
}

}  // namespace gendse

#endif  // GENDSE_ESTIMATORS_HPP
