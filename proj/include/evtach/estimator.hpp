#ifndef EVTACH_ESTIMATOR_HPP
#define EVTACH_ESTIMATOR_HPP

#include "evtach/events.hpp"
#include "evtach/extraction.hpp"
#include "evtach/registration.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace evtach::est {

struct EstimatorParams {
    std::int64_t capture_len_us = 150'000;
    std::int64_t t_l_us = 10'000;        // slice length, initial pass
    std::int64_t t_s_initial_us = 1'000; // step between slice starts, initial pass
    double eta = 0.8;                    // refinement scale factor, in (0, 1)
    // Depth of one millisecond in the embedding. Kept high so nearest
    // neighbors pair up events of nearly equal slice time; the in-plane
    // displacement of such pairs is the blade rotation itself. Low values
    // let the correspondence trade rotation against a temporal shift (the
    // event cloud of a steady rotation is screw-symmetric) and the
    // registration then underestimates the yaw.
    double temporal_scale = 100.0;
    int n_pairs = 10; // slice pairs aggregated per estimate

    // extraction
    int grid_size = 4;
    double epsilon = 0.3;
    int k_max = 6;
    int symmetry_events = 300;

    // registration
    int max_icp_iterations = 50;

    reg::IcpParams icp() const {
        reg::IcpParams p;
        p.temporal_scale = temporal_scale;
        p.max_iterations = max_icp_iterations;
        return p;
    }
};

void validate(const EstimatorParams& p);

/// Outcome of one registration pass (a set of consecutive slice pairs).
struct PairSweep {
    std::vector<double> gammas; // usable pairs only, in pair order
    int pairs_total = 0;
    int pairs_converged = 0;
    int pairs_degraded = 0;
    double median_abs_gamma = 0.0;
    double median_gamma = 0.0; // signed

    bool usable() const { return pairs_converged > 0; }
};

/// Registers n consecutive slice pairs (starts 0, t_s, 2*t_s, ...) of the
/// target slice and aggregates their bidirectional yaws.
PairSweep run_pairs(const EventSlice& target, std::int64_t t_l_us, std::int64_t t_s_us,
                    int n_pairs, const reg::IcpParams& icp);

/// Speed in rpm implied by a yaw of |gamma| radians per step of t_s: the
/// revolution fraction gamma / 2 pi divided by the step in minutes.
double rpm_from_yaw(double gamma_abs, std::int64_t t_s_us);

/// Median-over-pairs speed from the initial (short step) pass, in rpm.
/// Throws EstimationFailed when no pair registers.
double initial_speed(const EventSlice& target, const EstimatorParams& params);

/// Step length for the refinement pass: eta * (60 / (2 r_init)) * (theta_c /
/// 2 pi), in microseconds, clamped to [t_s_initial, capture_len / 4].
std::int64_t refined_step(double r_init, double theta_c, const EstimatorParams& params);

struct SpeedEstimate {
    int target_id = 0;
    Vec2 centroid;
    double rpm_initial = 0.0;
    double rpm_refined = 0.0;
    int direction = 1; // +1 counter-clockwise, -1 clockwise
    int n_repeats = 1;
    double theta_c = 0.0;
    std::int64_t refined_step_us = 0;
    std::int64_t refined_len_us = 0;
    std::size_t n_events_used = 0;
    double mean_gamma = 0.0; // representative (median) yaw per refined pair
    int pairs_converged = 0;
    int pairs_total = 0;
    bool symmetry_fallback = false; // theta_c defaulted to 2*pi
    bool ok = false;
    std::string error;
};

/// Full coarse-to-fine pipeline: cluster the first capture window, then per
/// target remove outliers, detect the symmetry angle, estimate, and refine
/// with the widened step (exactly one refinement pass). Per-target failures
/// land in the estimate's error field without aborting the other targets.
/// Throws ValidationError when the stream is shorter than the capture window.
std::vector<SpeedEstimate> estimate_speed(const EventStream& stream,
                                          const EstimatorParams& params);

/// Relative mean absolute error of a batch of estimates against the truth.
/// Throws Undefined on an empty list.
double rmae(const std::vector<double>& estimates, double ground_truth);

/// Result document: { "targets": [...], "params": {...} }.
std::string results_to_json(const std::vector<SpeedEstimate>& estimates,
                            const EstimatorParams& params);

} // namespace evtach::est

#endif // EVTACH_ESTIMATOR_HPP
