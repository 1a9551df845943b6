#ifndef GENDSE_EVALUATION_HPP
#define GENDSE_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gendse/estimators.hpp"
#include "gendse/types.hpp"

namespace gendse {

struct Tau1Result {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;  // samples with a zero measurement
};

// RMS of the estimate error relative to the measurement.
inline Tau1Result tau1(std::span<const double> est, std::span<const double> meas) {
    require(est.size() == meas.size(), "tau1: length mismatch");
    Tau1Result r;
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (meas[i] == 0.0) {
            ++r.excluded;
            continue;
        }
        const double e = (est[i] - meas[i]) / meas[i];
        acc += e * e;
        ++r.used;
    }
    if (r.used == 0) throw ValidationError("tau1: every sample has a zero measurement");
    r.value = std::sqrt(acc / static_cast<double>(r.used));
    return r;
}

// Estimate error about truth relative to measurement error about truth.
inline double tau2(std::span<const double> est, std::span<const double> meas, std::span<const double> truth) {
    require(est.size() == meas.size() && est.size() == truth.size(), "tau2: length mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        num += (est[i] - truth[i]) * (est[i] - truth[i]);
        den += (meas[i] - truth[i]) * (meas[i] - truth[i]);
    }
    if (!(den > 0.0)) throw ValidationError("tau2: zero denominator (measurements equal truth)");
    return std::sqrt(num / den);
}

inline double tau3(std::span<const double> est, std::span<const double> truth) {
    require(est.size() == truth.size(), "tau3: length mismatch");
    require(!est.empty(), "tau3: need at least one sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) acc += (est[i] - truth[i]) * (est[i] - truth[i]);
    return std::sqrt(acc / static_cast<double>(est.size()));
}

struct SampleWindow {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    std::size_t size() const { return end - begin; }
    bool operator==(const SampleWindow&) const = default;
};

struct VariableIndices {
    std::string variable;
    std::optional<double> tau1;
    std::optional<double> tau2;
    double tau3 = 0.0;
    std::size_t tau1_excluded = 0;
};

struct IndexReport {
    SampleWindow window;
    std::size_t N = 0;
    std::vector<VariableIndices> variables;  // delta, omega, Eqp, Edp

    const VariableIndices& at(const std::string& name) const {
        for (const auto& v : variables)
            if (v.variable == name) return v;
        throw ValidationError("IndexReport: no variable " + name);
    }
};

inline const char* state_name(int i) {
    static const char* names[] = {"delta", "omega", "Eqp", "Edp"};
    return names[i];
}

// Indices of one filter run. measured[i] holds the stream the filter consumed,
// truth[i] the true states; only delta and omega have measurements.
inline IndexReport evaluate(const FilterRun& run, const std::vector<MeasVector>& measured,
                            const std::vector<StateVector>& truth, const SampleWindow& w) {
    require(run.size() == measured.size() && run.size() == truth.size(), "evaluate: length mismatch");
    require(w.begin < w.end && w.end <= run.size(), "evaluate: window outside the run");
    IndexReport rep;
    rep.window = w;
    rep.N = w.size();
    std::vector<double> est(w.size()), meas(w.size()), tru(w.size());
    for (int v = 0; v < kStateDim; ++v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            est[i] = run.steps[w.begin + i].x_post(v);
            tru[i] = truth[w.begin + i](v);
            if (v < 2) meas[i] = measured[w.begin + i](v);
        }
        VariableIndices vi;
        vi.variable = state_name(v);
        vi.tau3 = tau3(est, tru);
        if (v < 2) {
            // tau1 is undefined when every measurement in the window was lost.
            const bool any = std::any_of(meas.begin(), meas.end(), [](double m) { return m != 0.0; });
            if (any) {
                const auto t1 = tau1(est, meas);
                vi.tau1 = t1.value;
                vi.tau1_excluded = t1.excluded;
            } else {
                vi.tau1_excluded = meas.size();
            }
            vi.tau2 = tau2(est, meas, tru);
        }
        rep.variables.push_back(vi);
    }
    return rep;
}

struct IndexComparison {
    IndexReport ckf;
    IndexReport rckf;
};

inline IndexComparison compare(const FilterRun& ckf, const FilterRun& rckf, const std::vector<MeasVector>& measured,
                               const std::vector<StateVector>& truth, const SampleWindow& w_ckf,
                               const SampleWindow& w_rckf) {
    if (!(w_ckf == w_rckf)) throw ValidationError("compare: filters must be evaluated over identical windows");
    return {evaluate(ckf, measured, truth, w_ckf), evaluate(rckf, measured, truth, w_rckf)};
}

struct PhaseStats {
    double mean_ms = 0.0;
    double max_ms = 0.0;
};

struct TimingReport {
    std::size_t steps = 0;  // steps recorded, including warm-up
    std::size_t timed = 0;
    PhaseStats forecast;
    PhaseStats update;
    PhaseStats total;
};

inline TimingReport timing_profile(const FilterRun& run, std::size_t warmup = 10) {
    TimingReport rep;
    rep.steps = run.size();
    auto acc = [](PhaseStats& s, double v) {
        s.mean_ms += v;
        s.max_ms = std::max(s.max_ms, v);
    };
    for (std::size_t k = warmup; k < run.size(); ++k) {
        const auto& s = run.steps[k];
        acc(rep.forecast, s.forecast_ms);
        acc(rep.update, s.update_ms);
        acc(rep.total, s.forecast_ms + s.update_ms);
        ++rep.timed;
    }
    if (rep.timed > 0) {
        const double n = static_cast<double>(rep.timed);
        rep.forecast.mean_ms /= n;
        rep.update.mean_ms /= n;
        rep.total.mean_ms /= n;
    }
    return rep;
}

}  // namespace gendse

#endif  // GENDSE_EVALUATION_HPP
