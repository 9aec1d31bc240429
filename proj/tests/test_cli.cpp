#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evtach/cli.hpp"
#include "evtach/events.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evtach;
using namespace evtach::cli;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kScene = R"({
  "width": 346, "height": 260, "duration": 150000,
  "events_per_blade_ms": 100.0, "noise_rate": 0.0, "jitter_amp": 0.0, "seed": 5,
  "propellers": [
    {"center": [173.0, 130.0], "n_blades": 3, "blade_length": 60.0,
     "blade_width": 14.0, "rpm": 3000.0, "phase0": 0.2}
  ]
})";

} // namespace

TEST_CASE("simulate writes events and truth and exits zero") {
    const auto scene = temp_file("cli_scene.json");
    const auto events = temp_file("cli_events.csv");
    const auto truth = temp_file("cli_truth.json");
    write_text(scene, kScene);

    std::ostringstream out, err;
    const int code = run_simulate({scene.string(), events.string(), truth.string(), {}}, out, err);
    CHECK(code == kExitOk);
    CHECK(fs::exists(events));
    CHECK(fs::exists(truth));

    const EventStream s = load_events(events);
    CHECK(s.width == 346);
    CHECK(s.duration_us == 150'000);
    CHECK(!s.events.empty());

    const auto truth_json = nlohmann::json::parse(read_bytes(truth));
    REQUIRE(truth_json.at("targets").size() == 1);
    CHECK(truth_json["targets"][0]["rpm"] == 3000.0);
    CHECK(truth_json["targets"][0]["n_blades"] == 3);
}

TEST_CASE("simulate rejects a scene that violates an invariant") {
    const auto scene = temp_file("cli_bad_scene.json");
    std::string bad = kScene;
    bad.replace(bad.find("173.0"), 5, "20.00"); // disk pokes out of the frame
    write_text(scene, bad);

    std::ostringstream out, err;
    const int code =
        run_simulate({scene.string(), temp_file("x.csv").string(), "", {}}, out, err);
    CHECK(code == kExitBadInput);
    CHECK(err.str().find("inside the frame") != std::string::npos);
}

TEST_CASE("simulate returns the IO exit code for a missing config") {
    std::ostringstream out, err;
    const int code = run_simulate({"/nonexistent/scene.json", "/tmp/x.csv", "", {}}, out, err);
    CHECK(code == kExitIoError);
}

TEST_CASE("simulate is byte-reproducible for a fixed seed") {
    const auto scene = temp_file("cli_scene_det.json");
    write_text(scene, kScene);
    const auto a = temp_file("cli_events_a.csv");
    const auto b = temp_file("cli_events_b.csv");
    std::ostringstream out, err;
    REQUIRE(run_simulate({scene.string(), a.string(), "", {}}, out, err) == kExitOk);
    REQUIRE(run_simulate({scene.string(), b.string(), "", {}}, out, err) == kExitOk);
    CHECK(read_bytes(a) == read_bytes(b));

    // and an overridden seed changes the stream
    const auto c = temp_file("cli_events_c.csv");
    REQUIRE(run_simulate({scene.string(), c.string(), "", std::uint64_t{99}}, out, err) ==
            kExitOk);
    CHECK(read_bytes(a) != read_bytes(c));
}

TEST_CASE("estimate produces the documented JSON and exit code") {
    const auto scene = temp_file("cli_scene2.json");
    const auto events = temp_file("cli_events2.csv");
    write_text(scene, kScene);
    std::ostringstream sim_out, sim_err;
    REQUIRE(run_simulate({scene.string(), events.string(), "", {}}, sim_out, sim_err) ==
            kExitOk);

    EstimateConfig cfg;
    cfg.events_path = events.string();
    std::ostringstream out, err;
    const int code = run_estimate(cfg, out, err);
    CHECK(code == kExitOk);

    const auto doc = nlohmann::json::parse(out.str());
    REQUIRE(doc.at("targets").size() == 1);
    const auto& t = doc["targets"][0];
    CHECK(std::abs(t["rpm_refined"].get<double>() - 3000.0) / 3000.0 < 0.01);
    CHECK(t["n_blades"] == 3);
    CHECK(t["direction"] == 1);
    CHECK(doc["params"]["t_s_initial"] == 1000);

    // resolved parameters are echoed on the diagnostic stream
    CHECK(err.str().find("\"t_s_initial\":1000") != std::string::npos);
}

TEST_CASE("estimate reflects parameter overrides in the echoed params") {
    const auto scene = temp_file("cli_scene3.json");
    const auto events = temp_file("cli_events3.csv");
    write_text(scene, kScene);
    std::ostringstream sim_out, sim_err;
    REQUIRE(run_simulate({scene.string(), events.string(), "", {}}, sim_out, sim_err) ==
            kExitOk);

    EstimateConfig cfg;
    cfg.events_path = events.string();
    cfg.params.t_s_initial_us = 2'000;
    std::ostringstream out, err;
    REQUIRE(run_estimate(cfg, out, err) == kExitOk);
    CHECK(nlohmann::json::parse(out.str())["params"]["t_s_initial"] == 2000);
}

TEST_CASE("estimate of an empty event file exits with no-targets") {
    const auto events = temp_file("cli_empty.csv");
    write_text(events, "# width=346\n# height=260\nt_us,x,y,p\n");
    EstimateConfig cfg;
    cfg.events_path = events.string();
    std::ostringstream out, err;
    CHECK(run_estimate(cfg, out, err) == kExitNoTargets);
}

TEST_CASE("estimate exits with bad-input on an unparsable file") {
    const auto events = temp_file("cli_garbage.csv");
    write_text(events, "not an event file\n");
    EstimateConfig cfg;
    cfg.events_path = events.string();
    std::ostringstream out, err;
    CHECK(run_estimate(cfg, out, err) == kExitBadInput);
}

TEST_CASE("estimate emits CSV rows when asked") {
    const auto scene = temp_file("cli_scene4.json");
    const auto events = temp_file("cli_events4.csv");
    write_text(scene, kScene);
    std::ostringstream sim_out, sim_err;
    REQUIRE(run_simulate({scene.string(), events.string(), "", {}}, sim_out, sim_err) ==
            kExitOk);

    EstimateConfig cfg;
    cfg.events_path = events.string();
    cfg.format = "csv";
    std::ostringstream out, err;
    REQUIRE(run_estimate(cfg, out, err) == kExitOk);
    std::istringstream lines(out.str());
    std::string header, row;
    REQUIRE(std::getline(lines, header));
    CHECK(header.starts_with("id,centroid_x,centroid_y,rpm_initial,rpm_refined"));
    REQUIRE(std::getline(lines, row));
    CHECK(row.starts_with("0,"));
}

TEST_CASE("estimate can dump the heatmap and the icp trace") {
    const auto scene = temp_file("cli_scene5.json");
    const auto events = temp_file("cli_events5.csv");
    write_text(scene, kScene);
    std::ostringstream sim_out, sim_err;
    REQUIRE(run_simulate({scene.string(), events.string(), "", {}}, sim_out, sim_err) ==
            kExitOk);

    EstimateConfig cfg;
    cfg.events_path = events.string();
    cfg.dump_heatmap_path = temp_file("cli_heatmap.csv").string();
    cfg.dump_icp_trace_path = temp_file("cli_trace.csv").string();
    std::ostringstream out, err;
    REQUIRE(run_estimate(cfg, out, err) == kExitOk);

    std::istringstream hm(read_bytes(cfg.dump_heatmap_path));
    std::string first_row;
    REQUIRE(std::getline(hm, first_row));
    CHECK(std::count(first_row.begin(), first_row.end(), ',') == 86); // 87 columns
    int rows = 1;
    std::string rest;
    while (std::getline(hm, rest)) ++rows;
    CHECK(rows == 65);

    const std::string trace = read_bytes(cfg.dump_icp_trace_path);
    CHECK(trace.starts_with("iteration,gamma,rms_residual\n"));
    CHECK(std::count(trace.begin(), trace.end(), '\n') >= 2);
}

TEST_CASE("evaluate rejects an empty sweep") {
    EvaluateConfig cfg;
    cfg.repeats = 0;
    std::ostringstream out, err;
    CHECK(run_evaluate(cfg, out, err) == kExitBadInput);

    cfg = EvaluateConfig{};
    cfg.speeds.clear();
    CHECK(run_evaluate(cfg, out, err) == kExitBadInput);
}

TEST_CASE("evaluate emits one CSV row per configuration") {
    EvaluateConfig cfg;
    cfg.speeds = {1000.0, 3000.0};
    cfg.blade_counts = {3};
    cfg.repeats = 2;
    cfg.events_per_blade_ms = 100.0;
    std::ostringstream out, err;
    REQUIRE(run_evaluate(cfg, out, err) == kExitOk);

    std::istringstream lines(out.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "speed_rpm,n_blades,rmae_initial,rmae_refined,mean_runtime_ms");
    int rows = 0;
    double worst_refined = 0.0;
    while (std::getline(lines, line)) {
        ++rows;
        double speed, rmae_i, rmae_r, ms;
        int blades;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%d,%lf,%lf,%lf", &speed, &blades, &rmae_i,
                            &rmae_r, &ms) == 5);
        worst_refined = std::max(worst_refined, rmae_r);
    }
    CHECK(rows == 2);
    CHECK(worst_refined < 0.01);
}
