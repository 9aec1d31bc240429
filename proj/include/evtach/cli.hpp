#ifndef EVTACH_CLI_HPP
#define EVTACH_CLI_HPP

#include "evtach/estimator.hpp"
#include "evtach/simulator.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

// Subcommand implementations, separated from flag parsing so they can be
// driven directly by tests. Results go to `out`, diagnostics to `err`.
namespace evtach::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitIoError = 2;
inline constexpr int kExitNoTargets = 3;

struct SimulateConfig {
    std::string scene_path;
    std::string out_events_path;
    std::string out_truth_path;
    std::optional<std::uint64_t> seed_override;
};

int run_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err);

struct EstimateConfig {
    std::string events_path;
    est::EstimatorParams params;
    std::string format = "json"; // json | csv
    std::string dump_heatmap_path;
    std::string dump_icp_trace_path;
};

int run_estimate(const EstimateConfig& cfg, std::ostream& out, std::ostream& err);

struct EvaluateConfig {
    std::vector<double> speeds = {300, 600, 1000, 2000, 3000, 4500, 6000};
    std::vector<int> blade_counts = {3};
    int repeats = 30;
    double events_per_blade_ms = 150.0;
    double noise_rate = 0.0;
    double jitter_amp = 0.0;
    double blade_length = 60.0;
    double blade_width = 14.0;
    std::uint64_t seed = 1;
    est::EstimatorParams params;
};

/// One row per (speed, blade count) configuration:
/// speed_rpm,n_blades,rmae_initial,rmae_refined,mean_runtime_ms
int run_evaluate(const EvaluateConfig& cfg, std::ostream& out, std::ostream& err);

/// The scene used by sweeps and by `evaluate`: one centered propeller.
sim::SceneSpec sweep_scene(double rpm, int blades, const EvaluateConfig& cfg,
                           std::uint64_t seed);

} // namespace evtach::cli

#endif // EVTACH_CLI_HPP
