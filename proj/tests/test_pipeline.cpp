#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gendse/pipeline.hpp"

using namespace gendse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

ScenarioConfig short_fdi() {
    ScenarioConfig c = preset_scenario("sixtyeightbus", "fdi-1");
    c.seed = 11;
    return c;
}

}  // namespace

TEST(Pipeline, DeterministicUnderFixedSeed) {
    const RunArtifact a = run_pipeline(short_fdi());
    const RunArtifact b = run_pipeline(short_fdi());
    EXPECT_EQ(metrics_json(a), metrics_json(b));
    ASSERT_EQ(a.rckf.size(), b.rckf.size());
    for (std::size_t k = 0; k < a.rckf.size(); ++k) EXPECT_EQ(a.rckf.steps[k].x_post, b.rckf.steps[k].x_post);
}

TEST(Pipeline, ArtifactsByteIdenticalExceptTiming) {
    const fs::path d1 = fresh_dir("gendse_art_1"), d2 = fresh_dir("gendse_art_2");
    write_artifact(run_pipeline(short_fdi()), d1);
    write_artifact(run_pipeline(short_fdi()), d2);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(d1)) {
        ++files;
        if (e.path().filename() == "timing.json") continue;
        EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path().filename();
    }
    EXPECT_EQ(files, 12u);
    for (const char* name : {"config.json", "truth.csv", "measurements_clean.csv", "measurements_attacked.csv",
                             "attack_log.csv", "ckf.csv", "rckf.csv", "identification.csv", "metrics.json",
                             "timing.json", "plot_delta.csv", "plot_omega.csv"})
        EXPECT_TRUE(fs::exists(d1 / name)) << name;
}

TEST(Pipeline, WrittenConfigReproducesRun) {
    const fs::path d = fresh_dir("gendse_art_cfg");
    const RunArtifact a = run_pipeline(short_fdi());
    write_artifact(a, d);
    const RunArtifact b = run_pipeline(load_config((d / "config.json").string()));
    EXPECT_EQ(metrics_json(a), metrics_json(b));
}

TEST(Pipeline, AttackDoesNotChangeNoiseRealization) {
    ScenarioConfig clean = preset_scenario("sixtyeightbus", "clean");
    clean.seed = 11;
    const RunArtifact a = run_pipeline(clean);
    const RunArtifact b = run_pipeline(short_fdi());
    ASSERT_EQ(a.clean.size(), b.clean.size());
    for (std::size_t k = 0; k < a.clean.size(); ++k) EXPECT_EQ(a.clean[k].z, b.clean[k].z);
    for (std::size_t k = 0; k < b.attacked.size(); ++k)
        if (b.attacked[k].t < 4.0 - 1e-9) {
            EXPECT_EQ(b.attacked[k].z, b.clean[k].z);
        }
    EXPECT_EQ(a.ckf.steps.front().x_pred, b.ckf.steps.front().x_pred);
}

TEST(Pipeline, CleanRunFiltersAgreeWhenNothingTriggers) {
    ScenarioConfig c = preset_scenario("ninebus", "clean");
    c.noise.sigma_delta_R *= 4.0;
    c.noise.sigma_omega_R *= 4.0;
    c.noise.sigma_U_R *= 4.0;
    c.noise.sigma_phi_R *= 4.0;
    const RunArtifact a = run_pipeline(c);
    for (const auto& s : a.rckf.steps) ASSERT_EQ(s.huber_triggered, 0) << "t = " << s.t;
    double worst = 0.0;
    for (std::size_t k = 0; k < a.ckf.size(); ++k)
        worst = std::max(worst, (a.ckf.steps[k].x_post - a.rckf.steps[k].x_post).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-9);
    EXPECT_EQ(a.windows.size(), 1u);
    EXPECT_EQ(a.attack_log.kind, "none");
}

TEST(Pipeline, DosWindowMarksAndIndices) {
    ScenarioConfig c = preset_scenario("sixtyeightbus", "dos-1");
    const RunArtifact a = run_pipeline(c);
    ASSERT_EQ(a.windows.size(), 2u);
    EXPECT_EQ(a.windows[1].size(), 201u);
    const auto& att = a.indices.at("attack");
    EXPECT_FALSE(att.ckf.at("delta").tau1.has_value());
    EXPECT_EQ(att.ckf.at("delta").tau1_excluded, 201u);
    const json m = metrics_json(a);
    EXPECT_EQ(m["attack"]["windowed_samples"], 201);
    EXPECT_FALSE(m["windows"]["attack"]["ckf"]["variables"]["delta"].contains("tau1"));
    EXPECT_TRUE(m["windows"]["full"]["ckf"]["variables"]["delta"].contains("tau1"));
}

TEST(Pipeline, PlotFilesHaveOneRowPerSample) {
    const RunArtifact a = run_pipeline(short_fdi());
    const auto files = emit_plots_data(a);
    ASSERT_EQ(files.size(), 2u);
    for (const auto& [name, content] : files) {
        std::istringstream in(content);
        const auto tab = io::read_table(in);
        EXPECT_EQ(tab.header.size(), 6u) << name;
        EXPECT_EQ(tab.rows.size(), a.attacked.size()) << name;
        std::size_t marked = 0;
        for (const auto& r : tab.rows) marked += r[5] == 1.0;
        EXPECT_EQ(marked, 201u);
    }
}

TEST(Pipeline, StageErrorNamesStage) {
    ScenarioConfig c = short_fdi();
    c.sample_rate_hz = 30.0;
    try {
        run_pipeline(c);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "config");
        EXPECT_FALSE(e.numerical());
    }
    EXPECT_THROW(run_stage("ckf", []() -> int { throw NumericalError("x"); }), StageError);
    try {
        run_stage("ckf", []() -> int { throw NumericalError("boom"); });
    } catch (const StageError& e) {
        EXPECT_TRUE(e.numerical());
        EXPECT_EQ(std::string(e.what()), "ckf: boom");
    }
}

TEST(Batch, AggregatesAcrossSeedsDeterministically) {
    const std::vector<ScenarioConfig> cfgs{preset_scenario("sixtyeightbus", "clean"),
                                           preset_scenario("sixtyeightbus", "dos-4")};
    const BatchSummary a = run_batch(cfgs, {1, 2, 3}, std::nullopt, 1);
    const BatchSummary b = run_batch(cfgs, {1, 2, 3}, std::nullopt, 2);
    EXPECT_EQ(a.runs.size(), 6u);
    EXPECT_EQ(a.failures(), 0u);
    EXPECT_EQ(a.table, b.table);
    const auto& cell = a.table["sixtyeightbus-dos-4"]["attack"]["rckf"]["delta"]["tau3"];
    EXPECT_EQ(cell["n"], 3);
    double mean = 0.0;
    for (const auto& r : a.runs)
        if (r.scenario == "sixtyeightbus-dos-4")
            mean += (*r.metrics)["windows"]["attack"]["rckf"]["variables"]["delta"]["tau3"].get<double>() / 3.0;
    EXPECT_NEAR(cell["mean"].get<double>(), mean, 1e-15);
    const std::string csv = format_summary(a.table);
    EXPECT_NE(csv.find("sixtyeightbus-dos-4,tau3,delta,"), std::string::npos);
}

TEST(Batch, RecordsFailuresAndWritesSummary) {
    ScenarioConfig bad = preset_scenario("sixtyeightbus", "clean");
    bad.name = "broken";
    bad.sample_rate_hz = 30.0;
    const fs::path d = fresh_dir("gendse_batch");
    const BatchSummary s = run_batch({preset_scenario("sixtyeightbus", "clean"), bad}, {5}, d, 1);
    EXPECT_EQ(s.failures(), 1u);
    EXPECT_NE(s.runs[1].error.find("config"), std::string::npos);
    EXPECT_TRUE(fs::exists(d / "summary.json"));
    EXPECT_TRUE(fs::exists(d / "summary.csv"));
    EXPECT_TRUE(fs::exists(d / "sixtyeightbus-clean" / "seed_5" / "metrics.json"));
    const json j = json::parse(slurp(d / "summary.json"));
    EXPECT_EQ(j["runs"][1]["ok"], false);
}

TEST(Batch, EmptyInputRejected) {
    EXPECT_THROW(run_batch({}, {1}, std::nullopt), ValidationError);
    EXPECT_THROW(run_batch({default_config()}, {}, std::nullopt), ValidationError);
}
