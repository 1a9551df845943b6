// Command-line front end: simulate, attack, estimate, pipeline, batch, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gendse/gendse.hpp"

using namespace gendse;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::string scenario = "clean";
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
    app->add_option("--config", c.config, "Scenario JSON; keys present override the base scenario")
        ->check(CLI::ExistingFile);
    app->add_option("--preset", c.preset, "Base scenario family")->check(CLI::IsMember({"ninebus", "sixtyeightbus"}));
    app->add_option("--scenario", c.scenario, "Scenario within the preset: clean, fdi-<n> or dos-<n>");
    app->add_option("--seed", c.seed, "Master seed");
    if (with_out) app->add_option("--out", c.out, "Output directory");
}

ScenarioConfig resolve(const Common& c) {
    ScenarioConfig cfg = c.preset.empty() ? default_config() : preset_scenario(c.preset, c.scenario);
    if (!c.config.empty()) cfg = load_config(c.config, cfg);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

std::string text(auto&& writer) {
    std::ostringstream ss;
    writer(ss);
    return ss.str();
}

void put(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    io::write_file((dir / name).string(), content);
}

std::vector<FilterKind> filters_of(const std::string& which) {
    if (which == "ckf") return {FilterKind::Ckf};
    if (which == "rckf") return {FilterKind::Rckf};
    return {FilterKind::Ckf, FilterKind::Rckf};
}

void print_indices(const RunArtifact& a) {
    for (const auto& [wname, cmp] : a.indices) {
        std::printf("window %s (%zu samples)\n", wname.c_str(), cmp.ckf.N);
        std::printf("  %-6s %-5s %14s %14s\n", "var", "index", "CKF", "RCKF");
        for (std::size_t v = 0; v < cmp.ckf.variables.size(); ++v) {
            const auto& c = cmp.ckf.variables[v];
            const auto& r = cmp.rckf.variables[v];
            auto row = [&](const char* idx, std::optional<double> x, std::optional<double> y) {
                if (x && y) std::printf("  %-6s %-5s %14.6g %14.6g\n", c.variable.c_str(), idx, *x, *y);
            };
            row("tau1", c.tau1, r.tau1);
            row("tau2", c.tau2, r.tau2);
            row("tau3", c.tau3, r.tau3);
        }
    }
    if (a.windows.size() > 1)
        std::printf("attack flags in window: CKF %zu, RCKF %zu of %zu\n", a.ckf_flags_in_window,
                    a.rckf_flags_in_window, a.windows[1].size());
}

int cmd_simulate(const Common& c, const std::string& trace_path) {
    const ScenarioConfig cfg = resolve(c);
    TruthTrajectory truth;
    if (trace_path.empty()) {
        truth = simulate_truth(cfg.truth);
    } else {
        // Replay against a recorded terminal trace, initialized at its first sample.
        const io::Trace tr = io::ingest_trace(trace_path);
        TerminalTarget tgt = smib_terminal_target(cfg.truth.P0, tr.terminal.front().U, cfg.truth.smib);
        tgt.phi0 = tr.terminal.front().phi;
        const OperatingPoint op = steady_state_init(tgt, cfg.truth.gen, cfg.truth.gov, cfg.truth.exc);
        truth = simulate_open_terminal(tr.t, tr.terminal, op, cfg.truth.gen, cfg.truth.gov, cfg.truth.exc,
                                       cfg.truth.controllers);
    }
    const MeasurementStream clean =
        sample_stream(truth, seeded_noise(cfg, kSeedNoise), cfg.sample_rate_hz, cfg.truth.gen);
    const fs::path out(c.out);
    put(out, "config.json", to_json(cfg).dump(2) + "\n");
    put(out, "truth.csv", text([&](std::ostream& o) { io::write_trace(o, io::to_trace(truth)); }));
    put(out, "measurements_clean.csv", text([&](std::ostream& o) { write_stream(o, clean, false); }));
    std::printf("simulated %zu steps, %zu samples -> %s\n", truth.size(), clean.size(), out.c_str());
    return 0;
}

int cmd_attack(const Common& c, const std::string& input) {
    const ScenarioConfig cfg = resolve(c);
    if (cfg.attack.type == AttackType::None) throw ValidationError("attack: the scenario has no attack configured");
    const MeasurementStream clean = read_stream_file(input);
    const OperatingPoint op = smib_operating_point(cfg.truth);
    const EstimatorModel model = estimator_model(cfg, op);
    const AttackResult r = apply_attack(cfg, clean, model, op, initial_estimate(cfg, op.state));
    const fs::path out(c.out);
    put(out, "measurements_attacked.csv", text([&](std::ostream& o) { write_stream(o, r.stream, true); }));
    put(out, "attack_log.csv", text([&](std::ostream& o) { write_attack_log(o, r.log); }));
    std::printf("%s: %zu windowed samples, %zu injected -> %s\n", r.log.kind.c_str(), r.log.rows.size(),
                r.log.injected_count(), out.c_str());
    return 0;
}

int cmd_estimate(const Common& c, const std::string& input, const std::string& which) {
    const ScenarioConfig cfg = resolve(c);
    const MeasurementStream stream = read_stream_file(input);
    const OperatingPoint op = smib_operating_point(cfg.truth);
    const EstimatorModel model = estimator_model(cfg, op);
    const StateVector x0 = initial_estimate(cfg, op.state);
    const fs::path out(c.out);
    json timing;
    for (FilterKind k : filters_of(which)) {
        const FilterRun run = run_stage(to_string(k), [&] { return run_filter(k, stream, model, op, x0); });
        put(out, to_string(k) + ".csv", text([&](std::ostream& o) { write_filter_run(o, run); }));
        timing[to_string(k)] = to_json(timing_profile(run));
        std::printf("%s: %zu steps, mean %.4f ms per step\n", to_string(k).c_str(), run.size(),
                    timing_profile(run).total.mean_ms);
    }
    put(out, "timing.json", timing.dump(2) + "\n");
    return 0;
}

int cmd_pipeline(const Common& c) {
    const RunArtifact a = run_pipeline(resolve(c));
    write_artifact(a, c.out);
    std::printf("scenario %s, seed %llu -> %s\n", a.config.name.c_str(),
                static_cast<unsigned long long>(a.config.seed), c.out.c_str());
    print_indices(a);
    return 0;
}

int cmd_batch(const Common& c, std::size_t seeds, unsigned jobs) {
    std::vector<ScenarioConfig> configs;
    if (!c.preset.empty() && c.scenario == "all") {
        configs = preset_family_configs(c.preset);
        if (!c.config.empty())
            for (auto& cfg : configs) cfg = load_config(c.config, cfg);
    } else {
        configs.push_back(resolve(c));
    }
    const std::uint64_t first = c.seed.value_or(1);
    std::vector<std::uint64_t> seed_list;
    for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(first + i);
    const BatchSummary s = run_batch(configs, seed_list, fs::path(c.out), jobs);
    std::cout << format_summary(s.table);
    for (const auto& r : s.runs)
        if (!r.metrics) std::fprintf(stderr, "failed: %s seed %llu: %s\n", r.scenario.c_str(),
                                     static_cast<unsigned long long>(r.seed), r.error.c_str());
    std::printf("%zu runs, %zu failed -> %s\n", s.runs.size(), s.failures(), c.out.c_str());
    return s.failures() == 0 ? 0 : 2;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

int cmd_report(const std::string& dir, const std::string& window) {
    const fs::path d(dir);
    if (fs::exists(d / "summary.json")) {
        std::cout << format_summary(read_json(d / "summary.json").at("table"), window);
        return 0;
    }
    if (!fs::exists(d / "metrics.json")) throw ValidationError(dir + ": no summary.json or metrics.json");
    const json m = read_json(d / "metrics.json");
    std::printf("scenario %s, seed %s, %s samples\n", m.at("scenario").get<std::string>().c_str(),
                m.at("seed").dump().c_str(), m.at("samples").dump().c_str());
    std::printf("window,filter,variable,tau1,tau2,tau3\n");
    for (const auto& [wname, w] : m.at("windows").items())
        for (const auto& [fname, f] : w.items())
            for (const auto& [vname, v] : f.at("variables").items())
                std::printf("%s,%s,%s,%s,%s,%s\n", wname.c_str(), fname.c_str(), vname.c_str(),
                            v.contains("tau1") ? v["tau1"].dump().c_str() : "",
                            v.contains("tau2") ? v["tau2"].dump().c_str() : "", v["tau3"].dump().c_str());
    std::printf("identification: %s\n", m.at("identification").dump().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generator dynamic state estimation under cyber attacks"};
    app.require_subcommand(1);

    Common c;
    std::string input, trace, which = "both", report_dir, window = "attack";
    std::size_t seeds = 5;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

    auto* sim = app.add_subcommand("simulate", "Simulate the true trajectory and its clean PMU stream");
    add_common(sim, c);
    sim->add_option("--trace", trace, "Replay against a recorded terminal-voltage trace")->check(CLI::ExistingFile);

    auto* att = app.add_subcommand("attack", "Apply the configured FDI or DoS attack to a stream");
    add_common(att, c);
    att->add_option("--input", input, "Measurement stream CSV")->required()->check(CLI::ExistingFile);

    auto* est = app.add_subcommand("estimate", "Run CKF and/or RCKF on a stream");
    add_common(est, c);
    est->add_option("--input", input, "Measurement stream CSV")->required()->check(CLI::ExistingFile);
    est->add_option("--filter", which, "Filter to run")->check(CLI::IsMember({"ckf", "rckf", "both"}));

    auto* pipe = app.add_subcommand("pipeline", "Truth, measurement, attack, both filters, identification, indices");
    add_common(pipe, c);

    auto* bat = app.add_subcommand("batch", "Run scenarios over consecutive seeds and aggregate the indices");
    add_common(bat, c);
    bat->add_option("--seeds", seeds, "Number of seeds, starting at --seed (default 1)")->check(CLI::PositiveNumber);
    bat->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    bat->footer("Use --scenario all with --preset to run the whole preset family.");

    auto* rep = app.add_subcommand("report", "Print the index table of a run or batch directory");
    rep->add_option("dir", report_dir, "Run or batch output directory")->required();
    rep->add_option("--window", window, "Window for batch tables")->check(CLI::IsMember({"attack", "full"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(c, trace);
        if (*att) return cmd_attack(c, input);
        if (*est) return cmd_estimate(c, input, which);
        if (*pipe) return cmd_pipeline(c);
        if (*bat) return cmd_batch(c, seeds, jobs);
        if (*rep) return cmd_report(report_dir, window);
    } catch (const StageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.numerical() ? 2 : 1;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 1;
}
