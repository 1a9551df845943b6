#ifndef GENDSE_PIPELINE_HPP
#define GENDSE_PIPELINE_HPP

// End-to-end run: truth -> measurements -> attack -> CKF and RCKF ->
// identification -> indices, plus artifact writing and batch aggregation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendse/attacks.hpp"
#include "gendse/config.hpp"
#include "gendse/dynamics.hpp"
#include "gendse/estimators.hpp"
#include "gendse/evaluation.hpp"
#include "gendse/io.hpp"
#include "gendse/measurement.hpp"

namespace gendse {

// Failure inside one pipeline stage; carries the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, bool numerical)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), numerical_(numerical) {}
    const std::string& stage() const { return stage_; }
    bool numerical() const { return numerical_; }

private:
    std::string stage_;
    bool numerical_;
};

template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const NumericalError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const ValidationError& e) {
        throw StageError(stage, e.what(), false);
    }
}

struct RunArtifact {
    ScenarioConfig config;
    OperatingPoint op;
    TruthTrajectory truth;
    MeasurementStream clean;
    MeasurementStream attacked;
    AttackLog attack_log;
    FilterRun ckf;
    FilterRun rckf;
    std::vector<SampleWindow> windows;  // "full" and, with an attack, "attack"
    std::map<std::string, IndexComparison> indices;
    TimingReport ckf_timing;
    TimingReport rckf_timing;
    std::size_t ckf_flags_in_window = 0;
    std::size_t rckf_flags_in_window = 0;

    std::vector<StateVector> truth_states() const {
        std::vector<StateVector> out;
        const std::size_t stride = truth.size() / std::max<std::size_t>(1, attacked.size());
        for (std::size_t k = 0; k < attacked.size(); ++k) out.push_back(truth.states[k * std::max<std::size_t>(1, stride)].vec());
        return out;
    }
    std::vector<MeasVector> consumed() const {
        std::vector<MeasVector> out;
        for (const auto& s : attacked) out.push_back(s.z);
        return out;
    }
};

inline EstimatorModel estimator_model(const ScenarioConfig& c, const OperatingPoint& op) {
    EstimatorModel m;
    m.gen = c.truth.gen;
    m.gov = c.truth.gov;
    m.exc = c.truth.exc;
    m.exc.V_ref = op.V_ref;
    m.noise = c.noise;
    m.settings = c.filter;
    return m;
}

inline StateVector initial_estimate(const ScenarioConfig& c, const GeneratorState& truth0) {
    std::mt19937_64 rng(derive_seed(c.seed, kSeedFilterInit));
    std::normal_distribution<double> gauss(0.0, 1.0);
    StateVector x0 = truth0.vec();
    for (int i = 0; i < kStateDim; ++i) x0(i) += c.filter.init_sigma(i) * gauss(rng);
    return x0;
}

inline NoiseModel seeded_noise(const ScenarioConfig& c, std::uint64_t stream) {
    NoiseModel m = c.noise;
    m.seed = derive_seed(c.seed, stream);
    return m;
}

// Forecast-point Jacobians an attacker linearizes at: a reference CKF run on
// the clean stream.
inline std::vector<std::optional<JacobianH>> fdi_feedback(const MeasurementStream& clean, const EstimatorModel& model,
                                                          const OperatingPoint& op, const StateVector& x0,
                                                          const GeneratorParams& gen) {
    const FilterRun ref = run_filter(FilterKind::Ckf, clean, model, op, x0);
    std::vector<std::optional<JacobianH>> fb(clean.size());
    for (std::size_t k = 0; k < clean.size(); ++k)
        fb[k] = jacobian_h(GeneratorState::from(ref.steps[k].x_pred), clean[k].terminal(), gen);
    return fb;
}

inline AttackResult apply_attack(const ScenarioConfig& c, const MeasurementStream& clean, const EstimatorModel& model,
                                 const OperatingPoint& op, const StateVector& x0) {
    switch (c.attack.type) {
        case AttackType::None: return {clean, {"none", {}}};
        case AttackType::Fdi: {
            FdiConfig f = c.attack.fdi;
            f.seed = derive_seed(c.seed, kSeedFdi);
            return apply_fdi(clean, f, fdi_feedback(clean, model, op, x0, c.truth.gen));
        }
        case AttackType::Dos: {
            DosConfig d = c.attack.dos;
            d.seed = derive_seed(c.seed, kSeedDos);
            return apply_dos(clean, d);
        }
    }
    return {clean, {"none", {}}};
}

inline std::optional<SampleWindow> attack_window(const ScenarioConfig& c, const MeasurementStream& s) {
    if (c.attack.type == AttackType::None) return std::nullopt;
    const auto idx = window_indices(s, c.attack.window());
    if (idx.empty()) return std::nullopt;
    return SampleWindow{"attack", idx.front(), idx.back() + 1};
}

inline RunArtifact run_pipeline(const ScenarioConfig& cfg) {
    run_stage("config", [&] { cfg.validate(); });
    RunArtifact art;
    art.config = cfg;

    // 1. state and measurement equations
    art.truth = run_stage("truth", [&] { return simulate_truth(cfg.truth); });
    art.op = smib_operating_point(cfg.truth);
    art.clean = run_stage("measurement", [&] {
        return sample_stream(art.truth, seeded_noise(cfg, kSeedNoise), cfg.sample_rate_hz, cfg.truth.gen);
    });
    const EstimatorModel model = estimator_model(cfg, art.op);
    const StateVector x0 = initial_estimate(cfg, art.truth.states.front());

    // 2-3. attack model and injection
    auto attacked = run_stage("attack", [&] { return apply_attack(cfg, art.clean, model, art.op, x0); });
    art.attacked = std::move(attacked.stream);
    art.attack_log = std::move(attacked.log);

    // 4. estimation on the identical attacked stream
    art.ckf = run_stage("ckf", [&] { return run_filter(FilterKind::Ckf, art.attacked, model, art.op, x0); });
    art.rckf = run_stage("rckf", [&] { return run_filter(FilterKind::Rckf, art.attacked, model, art.op, x0); });

    const auto aw = attack_window(cfg, art.attacked);
    run_stage("identification", [&] {
        for (FilterRun* run : {&art.ckf, &art.rckf}) {
            double D_J = 0.0;
            if (cfg.calibration == CalibrationSource::IndependentClean) {
                const MeasurementStream cal = sample_stream(art.truth, seeded_noise(cfg, kSeedCalibrationNoise),
                                                            cfg.sample_rate_hz, cfg.truth.gen);
                D_J = calibrate_DJ(run_filter(run->kind, cal, model, art.op, x0), cfg.filter);
            } else {
                const std::size_t end = aw ? aw->begin : run->size();
                FilterRun head;
                head.steps.assign(run->steps.begin(), run->steps.begin() + static_cast<long>(end));
                D_J = calibrate_DJ(head, cfg.filter);
            }
            apply_identification(*run, D_J, cfg.filter.dj_warmup);
        }
        if (aw) {
            for (std::size_t k = aw->begin; k < aw->end; ++k) {
                art.ckf_flags_in_window += art.ckf.steps[k].flagged;
                art.rckf_flags_in_window += art.rckf.steps[k].flagged;
            }
        }
    });

    run_stage("evaluation", [&] {
        const auto truth = art.truth_states();
        const auto meas = art.consumed();
        art.windows.push_back({"full", 0, art.attacked.size()});
        if (aw) art.windows.push_back(*aw);
        for (const auto& w : art.windows) art.indices[w.name] = compare(art.ckf, art.rckf, meas, truth, w, w);
        art.ckf_timing = timing_profile(art.ckf);
        art.rckf_timing = timing_profile(art.rckf);
    });
    return art;
}

// ---------------------------------------------------------------------------
// Serialization.

inline json to_json(const IndexReport& r) {
    json j;
    j["window"] = {{"name", r.window.name}, {"begin", r.window.begin}, {"end", r.window.end}};
    j["N"] = r.N;
    for (const auto& v : r.variables) {
        json jv;
        if (v.tau1) jv["tau1"] = *v.tau1;
        if (v.tau2) jv["tau2"] = *v.tau2;
        jv["tau3"] = v.tau3;
        if (v.tau2) jv["tau1_excluded"] = v.tau1_excluded;
        j["variables"][v.variable] = jv;
    }
    return j;
}

inline json metrics_json(const RunArtifact& a) {
    json j;
    j["scenario"] = a.config.name;
    j["seed"] = a.config.seed;
    j["samples"] = a.attacked.size();
    for (const auto& [name, cmp] : a.indices) {
        j["windows"][name]["ckf"] = to_json(cmp.ckf);
        j["windows"][name]["rckf"] = to_json(cmp.rckf);
    }
    j["attack"] = {{"kind", a.attack_log.kind},
                   {"windowed_samples", a.attack_log.rows.size()},
                   {"injected", a.attack_log.injected_count()}};
    auto health = [](const FilterRun& r) {
        double asym = 0.0;
        double min_eig = std::numeric_limits<double>::infinity();
        for (const auto& s : r.steps) {
            asym = std::max(asym, s.asymmetry);
            min_eig = std::min(min_eig, s.min_eig);
        }
        return json{{"max_asymmetry", asym}, {"min_eigenvalue", min_eig}, {"jitter_events", r.jitter_events()}};
    };
    j["covariance"] = {{"ckf", health(a.ckf)}, {"rckf", health(a.rckf)}};
    j["identification"] = {
        {"ckf", {{"D_J", a.ckf.D_J.value_or(0.0)}, {"flags_in_attack_window", a.ckf_flags_in_window}}},
        {"rckf", {{"D_J", a.rckf.D_J.value_or(0.0)}, {"flags_in_attack_window", a.rckf_flags_in_window}}}};
    return j;
}

inline json to_json(const TimingReport& t) {
    auto ph = [](const PhaseStats& p) { return json{{"mean_ms", p.mean_ms}, {"max_ms", p.max_ms}}; };
    return {{"steps", t.steps},
            {"timed_steps", t.timed},
            {"forecast", ph(t.forecast)},
            {"update", ph(t.update)},
            {"total", ph(t.total)}};
}

template <class Writer>
std::string render(Writer&& w) {
    std::ostringstream ss;
    w(ss);
    return ss.str();
}

// One file per plotted variable: t, truth, measurement, CKF, RCKF, attack-window marker.
inline std::map<std::string, std::string> emit_plots_data(const RunArtifact& a) {
    std::map<std::string, std::string> files;
    const auto truth = a.truth_states();
    const auto aw = attack_window(a.config, a.attacked);
    for (int v : {kDelta, kOmega}) {
        std::ostringstream out;
        out << "t,truth,measurement,ckf,rckf,attack_window\n";
        for (std::size_t k = 0; k < a.attacked.size(); ++k) {
            const bool in = aw && k >= aw->begin && k < aw->end;
            out << io::fmt(a.attacked[k].t) << ',' << io::fmt(truth[k](v)) << ',' << io::fmt(a.attacked[k].z(v))
                << ',' << io::fmt(a.ckf.steps[k].x_post(v)) << ',' << io::fmt(a.rckf.steps[k].x_post(v)) << ','
                << int(in) << '\n';
        }
        files[std::string("plot_") + state_name(v) + ".csv"] = out.str();
    }
    return files;
}

// Writes every artifact file into dir. All files except timing.json are a
// pure function of the configuration.
inline void write_artifact(const RunArtifact& a, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto put = [&](const std::string& name, const std::string& content) { io::write_file((dir / name).string(), content); };
    put("config.json", to_json(a.config).dump(2) + "\n");
    put("truth.csv", render([&](std::ostream& o) { io::write_trace(o, io::to_trace(a.truth)); }));
    put("measurements_clean.csv", render([&](std::ostream& o) { write_stream(o, a.clean, false); }));
    put("measurements_attacked.csv", render([&](std::ostream& o) { write_stream(o, a.attacked, true); }));
    put("attack_log.csv", render([&](std::ostream& o) { write_attack_log(o, a.attack_log); }));
    put("ckf.csv", render([&](std::ostream& o) { write_filter_run(o, a.ckf); }));
    put("rckf.csv", render([&](std::ostream& o) { write_filter_run(o, a.rckf); }));
    put("identification.csv", render([&](std::ostream& o) {
            o << "t,ckf_gap,ckf_flag,rckf_gap,rckf_flag\n";
            for (std::size_t k = 0; k < a.ckf.size(); ++k)
                o << io::fmt(a.ckf.steps[k].t) << ',' << io::fmt(a.ckf.steps[k].gap()) << ','
                  << int(a.ckf.steps[k].flagged) << ',' << io::fmt(a.rckf.steps[k].gap()) << ','
                  << int(a.rckf.steps[k].flagged) << '\n';
        }));
    put("metrics.json", metrics_json(a).dump(2) + "\n");
    put("timing.json", json{{"ckf", to_json(a.ckf_timing)}, {"rckf", to_json(a.rckf_timing)}}.dump(2) + "\n");
    for (const auto& [name, content] : emit_plots_data(a)) put(name, content);
}

// ---------------------------------------------------------------------------
// Batches.

struct BatchRun {
    std::string scenario;
    std::uint64_t seed = 0;
    std::optional<json> metrics;
    std::string error;
};

struct BatchSummary {
    std::vector<BatchRun> runs;
    json table;  // scenario -> window -> filter -> variable -> index -> {mean, std, n}
    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const BatchRun& r) { return !r.metrics; }));
    }
};

inline json aggregate(const std::vector<BatchRun>& runs) {
    std::map<std::string, std::vector<double>> acc;  // flattened json pointer -> values
    for (const auto& r : runs) {
        if (!r.metrics) continue;
        for (const auto& [wname, w] : (*r.metrics)["windows"].items())
            for (const auto& [fname, f] : w.items())
                for (const auto& [vname, v] : f["variables"].items())
                    for (const auto& idx : {"tau1", "tau2", "tau3"})
                        if (v.contains(idx))
                            acc["/" + r.scenario + "/" + wname + "/" + fname + "/" + vname + "/" + idx].push_back(
                                v[idx].get<double>());
    }
    json out = json::object();
    for (const auto& [ptr, vals] : acc) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
        out[json::json_pointer(ptr)] = {{"mean", mean}, {"std", sd}, {"n", vals.size()}};
    }
    return out;
}

// One row per scenario, index and variable with both filters side by side.
inline std::string format_summary(const json& table, const std::string& window = "attack") {
    std::ostringstream out;
    out << "scenario,index,variable,ckf_mean,rckf_mean,ckf_std,rckf_std\n";
    for (const auto& [scenario, windows] : table.items()) {
        const std::string w = windows.contains(window) ? window : "full";
        const auto& ws = windows[w];
        if (!ws.contains("ckf") || !ws.contains("rckf")) continue;
        for (const auto& idx : {"tau1", "tau2", "tau3"})
            for (const auto& var : {"delta", "omega"}) {
                const auto& c = ws["ckf"][var];
                const auto& r = ws["rckf"][var];
                if (!c.contains(idx) || !r.contains(idx)) continue;
                out << scenario << ',' << idx << ',' << var << ',' << io::fmt(c[idx]["mean"].get<double>()) << ','
                    << io::fmt(r[idx]["mean"].get<double>()) << ',' << io::fmt(c[idx]["std"].get<double>()) << ','
                    << io::fmt(r[idx]["std"].get<double>()) << '\n';
            }
    }
    return out.str();
}

inline BatchSummary run_batch(const std::vector<ScenarioConfig>& configs, const std::vector<std::uint64_t>& seeds,
                              const std::optional<std::filesystem::path>& out_dir, unsigned jobs = 1) {
    if (configs.empty()) throw ValidationError("run_batch: empty config list");
    if (seeds.empty()) throw ValidationError("run_batch: empty seed list");
    std::vector<std::pair<ScenarioConfig, std::uint64_t>> work;
    for (const auto& c : configs)
        for (auto s : seeds) work.emplace_back(c, s);

    BatchSummary sum;
    sum.runs.resize(work.size());
    auto one = [&](std::size_t i) {
        ScenarioConfig c = work[i].first;
        c.seed = work[i].second;
        BatchRun r{c.name, c.seed, std::nullopt, {}};
        try {
            const RunArtifact a = run_pipeline(c);
            r.metrics = metrics_json(a);
            if (out_dir) write_artifact(a, *out_dir / c.name / ("seed_" + std::to_string(c.seed)));
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        sum.runs[i] = std::move(r);
    };
    jobs = std::max(1u, jobs);
    for (std::size_t start = 0; start < work.size(); start += jobs) {
        std::vector<std::future<void>> fut;
        for (std::size_t i = start; i < std::min(work.size(), start + jobs); ++i)
            fut.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, one, i));
        for (auto& f : fut) f.get();
    }
    sum.table = aggregate(sum.runs);
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        json runs = json::array();
        for (const auto& r : sum.runs)
            runs.push_back({{"scenario", r.scenario}, {"seed", r.seed}, {"ok", r.metrics.has_value()}, {"error", r.error}});
        io::write_file((*out_dir / "summary.json").string(),
                       json{{"runs", runs}, {"table", sum.table}}.dump(2) + "\n");
        io::write_file((*out_dir / "summary.csv").string(), format_summary(sum.table));
    }
    return sum;
}

}  // namespace gendse

#endif  // GENDSE_PIPELINE_HPP
