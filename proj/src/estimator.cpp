#include "evtach/estimator.hpp"

#include "evtach/errors.hpp"
#include "evtach/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace evtach::est {
namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double median_of(std::vector<double> v) { return extract::median(std::move(v)); }

} // namespace

void validate(const EstimatorParams& p) {
    if (!(p.t_s_initial_us > 0 && p.t_s_initial_us <= p.t_l_us && p.t_l_us <= p.capture_len_us))
        throw ValidationError("need 0 < t_s_initial <= t_l <= capture_len");
    if (!(p.eta > 0.0 && p.eta < 1.0)) throw ValidationError("eta must be in (0, 1)");
    if (!(p.temporal_scale > 0.0)) throw ValidationError("temporal_scale must be > 0");
    if (p.n_pairs < 1) throw ValidationError("n_pairs must be >= 1");
    if (p.grid_size < 1) throw ValidationError("grid_size must be >= 1");
    if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) throw ValidationError("epsilon must be in (0, 1)");
    if (p.k_max < 2) throw ValidationError("k_max must be >= 2");
    if (p.symmetry_events < 1) throw ValidationError("symmetry_events must be >= 1");
    if (p.max_icp_iterations < 1) throw ValidationError("max_icp_iterations must be >= 1");
}

PairSweep run_pairs(const EventSlice& target, std::int64_t t_l_us, std::int64_t t_s_us,
                    int n_pairs, const reg::IcpParams& icp) {
    PairSweep sweep;
    sweep.pairs_total = n_pairs;

    struct Slot {
        bool usable = false;
        bool degraded = false;
        double gamma = 0.0;
    };
    std::vector<Slot> slots(n_pairs);

    // Pairs are independent; slot order keeps the reduction deterministic.
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (int j = 0; j < n_pairs; ++j) {
        const std::int64_t start = target.t_start_us + static_cast<std::int64_t>(j) * t_s_us;
        try {
            const EventSlice p = slice(target, start, t_l_us);
            const EventSlice q = slice(target, start + t_s_us, t_l_us);
            const reg::BidirectionalYaw y = reg::bidirectional_yaw(p, q, icp);
            slots[j].usable = y.usable;
            slots[j].degraded = y.degraded;
            slots[j].gamma = y.gamma;
        } catch (const Error&) {
            // unusable pair (too few events, degenerate geometry); skip
        }
    }

    for (const Slot& s : slots) {
        if (!s.usable) continue;
        ++sweep.pairs_converged;
        if (s.degraded) ++sweep.pairs_degraded;
        sweep.gammas.push_back(s.gamma);
    }
    if (!sweep.gammas.empty()) {
        std::vector<double> abs_gammas;
        abs_gammas.reserve(sweep.gammas.size());
        for (double g : sweep.gammas) abs_gammas.push_back(std::abs(g));
        sweep.median_abs_gamma = median_of(abs_gammas);
        sweep.median_gamma = median_of(sweep.gammas);
    }
    return sweep;
}

double rpm_from_yaw(double gamma_abs, std::int64_t t_s_us) {
    const double t_s_seconds = static_cast<double>(t_s_us) * 1e-6;
    return gamma_abs / (kTwoPi * t_s_seconds) * 60.0;
}

double initial_speed(const EventSlice& target, const EstimatorParams& params) {
    validate(params);
    const std::int64_t span_needed =
        params.t_l_us + static_cast<std::int64_t>(params.n_pairs) * params.t_s_initial_us;
    if (target.t_len_us < span_needed)
        throw ValidationError("target stream spans " + std::to_string(target.t_len_us) +
                              " us, need >= " + std::to_string(span_needed));

    const PairSweep sweep =
        run_pairs(target, params.t_l_us, params.t_s_initial_us, params.n_pairs, params.icp());
    if (!sweep.usable()) throw EstimationFailed("initial pass: no slice pair registered");
    return rpm_from_yaw(sweep.median_abs_gamma, params.t_s_initial_us);
}

std::int64_t refined_step(double r_init, double theta_c, const EstimatorParams& params) {
    if (!(r_init > 0.0)) throw ValidationError("refined_step: r_init must be > 0");
    if (!(theta_c > 0.0 && theta_c <= kTwoPi))
        throw ValidationError("refined_step: theta_c must be in (0, 2*pi]");
    const double seconds = params.eta * (60.0 / (2.0 * r_init)) * (theta_c / kTwoPi);
    const std::int64_t raw = std::llround(seconds * 1e6);
    return std::clamp(raw, params.t_s_initial_us, params.capture_len_us / 4);
}

namespace {

SpeedEstimate estimate_target(const EventSlice& window, const std::vector<Event>& cluster_events,
                              int target_id, const Vec2& centroid,
                              const EstimatorParams& params) {
    SpeedEstimate est;
    est.target_id = target_id;
    est.centroid = centroid;
    est.pairs_total = params.n_pairs;

    const std::vector<Event> filtered = extract::remove_outliers(cluster_events, centroid);
    est.n_events_used = filtered.size();

    extract::SymmetryInfo sym;
    try {
        sym = extract::symmetry_angle(filtered, params.symmetry_events);
    } catch (const SymmetryUndetermined&) {
        sym.n_repeats = 1;
        sym.theta_c = kTwoPi;
        est.symmetry_fallback = true;
    }
    est.n_repeats = sym.n_repeats;
    est.theta_c = sym.theta_c;

    EventSlice target;
    target.events = filtered;
    target.width = window.width;
    target.height = window.height;
    target.t_start_us = window.t_start_us;
    target.t_len_us = window.t_len_us;

    const PairSweep initial =
        run_pairs(target, params.t_l_us, params.t_s_initial_us, params.n_pairs, params.icp());
    if (!initial.usable()) throw EstimationFailed("initial pass: no slice pair registered");
    est.rpm_initial = rpm_from_yaw(initial.median_abs_gamma, params.t_s_initial_us);

    est.refined_step_us = refined_step(est.rpm_initial, sym.theta_c, params);
    est.refined_len_us = std::max(params.t_l_us, 2 * est.refined_step_us);
    const int refit_pairs = static_cast<int>(std::min<std::int64_t>(
        params.n_pairs,
        std::max<std::int64_t>(1, (params.capture_len_us - est.refined_len_us) /
                                      est.refined_step_us)));

    // The coarse estimate seeds the refined registration, so the ICP starts
    // inside the basin of the true rotation instead of trading the large
    // initial offset against a temporal shift.
    reg::IcpParams refined_icp = params.icp();
    const double direction = initial.median_gamma >= 0.0 ? 1.0 : -1.0;
    refined_icp.initial_yaw = direction * est.rpm_initial * kTwoPi / 60.0 *
                              (static_cast<double>(est.refined_step_us) * 1e-6);

    const PairSweep refined =
        run_pairs(target, est.refined_len_us, est.refined_step_us, refit_pairs, refined_icp);
    est.pairs_total = refined.pairs_total;
    est.pairs_converged = refined.pairs_converged;
    if (!refined.usable())
        throw EstimationFailed("refined pass: no slice pair registered");

    est.rpm_refined = rpm_from_yaw(refined.median_abs_gamma, est.refined_step_us);
    est.mean_gamma = refined.median_gamma;
    est.direction = refined.median_gamma >= 0.0 ? 1 : -1;
    est.ok = true;
    return est;
}

} // namespace

std::vector<SpeedEstimate> estimate_speed(const EventStream& stream,
                                          const EstimatorParams& params) {
    validate(params);
    if (stream.duration_us < params.capture_len_us)
        throw ValidationError("stream duration " + std::to_string(stream.duration_us) +
                              " us is shorter than the capture window " +
                              std::to_string(params.capture_len_us) + " us");
    if (stream.events.empty()) throw EmptyInput("estimate_speed: empty stream");

    const EventSlice window = slice(stream, 0, params.capture_len_us);

    extract::SelectKParams sk;
    sk.k_max = params.k_max;
    sk.grid_size = params.grid_size;
    sk.epsilon = params.epsilon;
    const extract::ClusterResult clusters = extract::select_k(window, sk);

    std::vector<std::vector<Event>> grouped(clusters.k);
    for (std::size_t i = 0; i < window.events.size(); ++i)
        grouped[clusters.assignment[i]].push_back(window.events[i]);

    std::vector<SpeedEstimate> estimates;
    estimates.reserve(clusters.k);
    for (int c = 0; c < clusters.k; ++c) {
        try {
            estimates.push_back(
                estimate_target(window, grouped[c], c, clusters.centroids[c], params));
        } catch (const Error& e) {
            SpeedEstimate failed;
            failed.target_id = c;
            failed.centroid = clusters.centroids[c];
            failed.n_events_used = grouped[c].size();
            failed.ok = false;
            failed.error = e.what();
            estimates.push_back(std::move(failed));
        }
    }
    return estimates;
}

double rmae(const std::vector<double>& estimates, double ground_truth) {
    if (estimates.empty()) throw Undefined("rmae of empty estimate list");
    if (!(ground_truth > 0.0)) throw ValidationError("rmae: ground truth must be > 0");
    double sum = 0.0;
    for (double r : estimates) sum += std::abs(r - ground_truth) / ground_truth;
    return sum / static_cast<double>(estimates.size());
}

std::string results_to_json(const std::vector<SpeedEstimate>& estimates,
                            const EstimatorParams& params) {
    nlohmann::json j;
    j["targets"] = nlohmann::json::array();
    for (const SpeedEstimate& e : estimates) {
        nlohmann::json t;
        t["id"] = e.target_id;
        t["centroid"] = {e.centroid.x, e.centroid.y};
        t["rpm_initial"] = e.rpm_initial;
        t["rpm_refined"] = e.rpm_refined;
        t["direction"] = e.direction;
        t["theta_c"] = e.theta_c;
        t["n_blades"] = e.n_repeats;
        t["n_events"] = e.n_events_used;
        t["pairs_converged"] = e.pairs_converged;
        if (!e.ok) t["error"] = e.error;
        j["targets"].push_back(std::move(t));
    }
    j["params"] = {{"capture_len", params.capture_len_us},
                   {"t_l", params.t_l_us},
                   {"t_s_initial", params.t_s_initial_us},
                   {"eta", params.eta},
                   {"temporal_scale", params.temporal_scale},
                   {"n_pairs", params.n_pairs},
                   {"grid_size", params.grid_size},
                   {"epsilon", params.epsilon},
                   {"k_max", params.k_max},
                   {"symmetry_events", params.symmetry_events},
                   {"max_icp_iterations", params.max_icp_iterations}};
    return j.dump(2) + "\n";
}

} // namespace evtach::est
