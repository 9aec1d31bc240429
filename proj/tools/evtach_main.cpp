#include "evtach/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

void add_param_flags(CLI::App* cmd, evtach::est::EstimatorParams& p) {
    cmd->add_option("--capture-len", p.capture_len_us, "Capture window, microseconds");
    cmd->add_option("--t-l", p.t_l_us, "Slice length for the initial pass, microseconds");
    cmd->add_option("--t-s-initial", p.t_s_initial_us,
                    "Step between slice starts for the initial pass, microseconds");
    cmd->add_option("--eta", p.eta, "Refinement scale factor, in (0, 1)");
    cmd->add_option("--temporal-scale", p.temporal_scale,
                    "Spatial units per millisecond in the 3D embedding");
    cmd->add_option("--grid-size", p.grid_size, "Heatmap cell size, pixels");
    cmd->add_option("--epsilon", p.epsilon, "Heatmap seeding threshold fraction");
    cmd->add_option("--k-max", p.k_max, "Largest candidate target count");
    cmd->add_option("--pairs", p.n_pairs, "Slice pairs aggregated per estimate");
    cmd->add_option("--symmetry-events", p.symmetry_events,
                    "Events used for blade-count detection");
}

int emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return evtach::cli::kExitOk;
    }
    std::ofstream out(out_path, std::ios::trunc);
    out << text;
    if (!out) {
        std::cerr << "error: cannot write '" << out_path << "'\n";
        return evtach::cli::kExitIoError;
    }
    return evtach::cli::kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"evtach: rotational speed estimation from event-camera streams"};
    app.require_subcommand(1);

    // simulate
    evtach::cli::SimulateConfig sim_cfg;
    std::uint64_t sim_seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic event stream");
    sim_cmd->add_option("--in", sim_cfg.scene_path, "Scene config JSON")->required();
    sim_cmd->add_option("--out", sim_cfg.out_events_path, "Output event file")->required();
    sim_cmd->add_option("--truth", sim_cfg.out_truth_path, "Output ground-truth JSON");
    auto* seed_opt = sim_cmd->add_option("--seed", sim_seed, "Override the scene seed");

    // estimate
    evtach::cli::EstimateConfig est_cfg;
    std::string est_out;
    auto* est_cmd = app.add_subcommand("estimate", "Estimate rotational speeds from an event file");
    est_cmd->add_option("--in", est_cfg.events_path, "Event file (csv or EVT1 binary)")->required();
    est_cmd->add_option("--out", est_out, "Write results to a file instead of stdout");
    est_cmd->add_option("--format", est_cfg.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
    est_cmd->add_option("--dump-heatmap", est_cfg.dump_heatmap_path,
                        "Write the capture-window heatmap as a CSV grid");
    est_cmd->add_option("--icp-trace", est_cfg.dump_icp_trace_path,
                        "Write the first pair's per-iteration trace as CSV");
    add_param_flags(est_cmd, est_cfg.params);

    // evaluate
    evtach::cli::EvaluateConfig eval_cfg;
    std::string eval_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "Sweep synthetic scenes and report RMAE");
    eval_cmd->add_option("--speeds", eval_cfg.speeds, "Sweep speeds, rpm")->delimiter(',');
    eval_cmd->add_option("--blades", eval_cfg.blade_counts, "Sweep blade counts")->delimiter(',');
    eval_cmd->add_option("--repeats", eval_cfg.repeats, "Seeded repetitions per configuration");
    eval_cmd->add_option("--events-per-blade-ms", eval_cfg.events_per_blade_ms,
                         "Scene event density");
    eval_cmd->add_option("--noise-rate", eval_cfg.noise_rate, "Background events per millisecond");
    eval_cmd->add_option("--jitter-amp", eval_cfg.jitter_amp, "Scene wobble amplitude, pixels");
    eval_cmd->add_option("--blade-length", eval_cfg.blade_length, "Scene blade length, pixels");
    eval_cmd->add_option("--blade-width", eval_cfg.blade_width, "Scene blade width, pixels");
    eval_cmd->add_option("--seed", eval_cfg.seed, "Base seed for the repetitions");
    eval_cmd->add_option("--out", eval_out, "Write the CSV table to a file instead of stdout");
    add_param_flags(eval_cmd, eval_cfg.params);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : evtach::cli::kExitBadInput;
    }

    if (sim_cmd->parsed()) {
        if (seed_opt->count() > 0) sim_cfg.seed_override = sim_seed;
        return evtach::cli::run_simulate(sim_cfg, std::cout, std::cerr);
    }
    if (est_cmd->parsed()) {
        std::ostringstream buffer;
        const int code = evtach::cli::run_estimate(est_cfg, buffer, std::cerr);
        const int emit_code = emit(buffer.str(), est_out);
        return emit_code != evtach::cli::kExitOk ? emit_code : code;
    }
    std::ostringstream buffer;
    const int code = evtach::cli::run_evaluate(eval_cfg, buffer, std::cerr);
    const int emit_code = emit(buffer.str(), eval_out);
    return emit_code != evtach::cli::kExitOk ? emit_code : code;
}
