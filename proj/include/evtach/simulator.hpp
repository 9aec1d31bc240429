#ifndef EVTACH_SIMULATOR_HPP
#define EVTACH_SIMULATOR_HPP

#include "evtach/events.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace evtach::sim {

/// Rotating multi-blade target. Blades are equally spaced rectangles rotating
/// about (cx, cy); positive rpm turns counter-clockwise on screen.
struct PropellerSpec {
    double cx = 0.0;
    double cy = 0.0;
    int n_blades = 3;
    double blade_length = 60.0;
    double blade_width = 14.0;
    double rpm = 3000.0;
    double phase0 = 0.0;
};

struct SceneSpec {
    int width = 346;
    int height = 260;
    std::int64_t duration_us = 150'000;
    std::vector<PropellerSpec> propellers;
    double events_per_blade_ms = 50.0;
    double noise_rate = 0.0;  // background events per millisecond, uniform
    double jitter_amp = 0.0;  // pixels of slow whole-scene wobble
    std::uint64_t seed = 1;
};

struct TargetTruth {
    double rpm = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int n_blades = 0;
};

struct GroundTruth {
    std::vector<TargetTruth> targets;
};

/// Event stream plus per-event origin labels (propeller index, -1 for noise),
/// aligned with stream.events.
struct SimulationResult {
    EventStream stream;
    GroundTruth truth;
    std::vector<int> labels;
};

/// Throws ValidationError naming the violated invariant.
void validate(const SceneSpec& scene);

/// Generates the scene's event stream. Deterministic for a fixed seed,
/// independent of thread count. Time is discretized in 50 us ticks; each
/// blade emits a Poisson number of events per tick, placed uniformly along
/// its two long edges with 0.5 px Gaussian blur, +1 polarity on the leading
/// edge and -1 on the trailing edge.
SimulationResult simulate(const SceneSpec& scene);

/// Configured rpm of the target at `index`; throws ValidationError when out
/// of range. Signed: negative means clockwise.
double ground_truth_rpm(const SceneSpec& scene, std::size_t index);

// JSON (de)serialization; field names match the SceneSpec/GroundTruth members.
SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& scene);
std::string truth_to_json(const GroundTruth& truth);

} // namespace evtach::sim

#endif // EVTACH_SIMULATOR_HPP
