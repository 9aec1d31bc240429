#include "evtach/simulator.hpp"

#include "evtach/errors.hpp"
#include "evtach/parallel.hpp"
#include "evtach/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace evtach::sim {
namespace {

constexpr std::int64_t kTickUs = 50;
constexpr double kTickMs = 0.05;
constexpr double kBlurSigmaPx = 0.5;
constexpr double kJitterPeriodUs = 500'000.0;
constexpr double kTwoPi = 6.283185307179586476925287;

struct RawEvent {
    std::int64_t t_us;
    double x;
    double y;
    std::int8_t p;
};

void jitter_offset(const SceneSpec& scene, std::int64_t t_us, double& ox, double& oy) {
    if (scene.jitter_amp <= 0.0) {
        ox = oy = 0.0;
        return;
    }
    const double phase = kTwoPi * static_cast<double>(t_us) / kJitterPeriodUs;
    ox = scene.jitter_amp * std::sin(phase);
    oy = scene.jitter_amp * std::cos(phase);
}

// One propeller's events over the whole capture; rng is private to the source.
std::vector<RawEvent> generate_propeller(const SceneSpec& scene, const PropellerSpec& prop,
                                         std::mt19937_64 rng) {
    const std::int64_t n_ticks = scene.duration_us / kTickUs;
    const double omega = prop.rpm * kTwoPi / 60.0; // rad/s
    const double mean_per_tick = scene.events_per_blade_ms * kTickMs;
    const double half_w = prop.blade_width / 2.0;
    const double lead = prop.rpm >= 0.0 ? 1.0 : -1.0;

    std::vector<RawEvent> out;
    out.reserve(static_cast<std::size_t>(
        mean_per_tick * static_cast<double>(n_ticks) * prop.n_blades * 1.2 + 16.0));

    for (std::int64_t k = 0; k < n_ticks; ++k) {
        for (int b = 0; b < prop.n_blades; ++b) {
            const std::uint64_t count = poisson(rng, mean_per_tick);
            for (std::uint64_t i = 0; i < count; ++i) {
                const std::int64_t t_us =
                    k * kTickUs + static_cast<std::int64_t>(uniform_index(rng, kTickUs));
                const double t_s = static_cast<double>(t_us) * 1e-6;
                const double theta =
                    prop.phase0 + omega * t_s + kTwoPi * static_cast<double>(b) / prop.n_blades;
                const double c = std::cos(theta);
                const double s = std::sin(theta);

                const double u = uniform_in(rng, 0.0, prop.blade_length);
                const bool leading = uniform01(rng) < 0.5;
                const double side = leading ? lead : -lead;
                // Spine runs outward at angle theta (CCW on screen, y down);
                // the edge offset points along the direction of motion.
                double x = prop.cx + u * c + side * half_w * (-s) +
                           kBlurSigmaPx * gaussian(rng);
                double y = prop.cy - u * s + side * half_w * (-c) +
                           kBlurSigmaPx * gaussian(rng);
                // Blur tails are pulled back so that, after rounding, every
                // event stays within blade_length + 1 px of the center.
                const double dx = x - prop.cx;
                const double dy = y - prop.cy;
                const double dist = std::sqrt(dx * dx + dy * dy);
                const double limit = prop.blade_length + 0.25;
                if (dist > limit) {
                    x = prop.cx + dx * limit / dist;
                    y = prop.cy + dy * limit / dist;
                }
                out.push_back(RawEvent{t_us, x, y, static_cast<std::int8_t>(leading ? 1 : -1)});
            }
        }
    }
    return out;
}

std::vector<RawEvent> generate_noise(const SceneSpec& scene, std::mt19937_64 rng) {
    const std::int64_t n_ticks = scene.duration_us / kTickUs;
    const double mean_per_tick = scene.noise_rate * kTickMs;
    std::vector<RawEvent> out;
    out.reserve(static_cast<std::size_t>(mean_per_tick * static_cast<double>(n_ticks) * 1.2 + 16.0));
    for (std::int64_t k = 0; k < n_ticks; ++k) {
        const std::uint64_t count = poisson(rng, mean_per_tick);
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::int64_t t_us =
                k * kTickUs + static_cast<std::int64_t>(uniform_index(rng, kTickUs));
            const double x = uniform_in(rng, 0.0, static_cast<double>(scene.width));
            const double y = uniform_in(rng, 0.0, static_cast<double>(scene.height));
            const std::int8_t p = uniform01(rng) < 0.5 ? std::int8_t{1} : std::int8_t{-1};
            out.push_back(RawEvent{t_us, x, y, p});
        }
    }
    return out;
}

} // namespace

void validate(const SceneSpec& scene) {
    if (scene.width <= 0 || scene.height <= 0)
        throw ValidationError("sensor geometry must be positive");
    if (scene.duration_us <= 0) throw ValidationError("duration must be positive");
    if (!(scene.events_per_blade_ms > 0.0))
        throw ValidationError("events_per_blade_ms must be > 0");
    if (scene.noise_rate < 0.0) throw ValidationError("noise_rate must be >= 0");
    if (scene.jitter_amp < 0.0) throw ValidationError("jitter_amp must be >= 0");
    for (std::size_t i = 0; i < scene.propellers.size(); ++i) {
        const PropellerSpec& prop = scene.propellers[i];
        const std::string who = "propeller " + std::to_string(i) + ": ";
        if (prop.n_blades < 1 || prop.n_blades > 8)
            throw ValidationError(who + "n_blades must be in [1, 8]");
        if (!(prop.blade_length > prop.blade_width) || !(prop.blade_width > 0.0))
            throw ValidationError(who + "blade_length > blade_width > 0 required");
        if (prop.rpm == 0.0) throw ValidationError(who + "|rpm| must be > 0");
        const double l = prop.blade_length;
        if (prop.cx - l < 0.0 || prop.cx + l > scene.width || prop.cy - l < 0.0 ||
            prop.cy + l > scene.height)
            throw ValidationError(who + "disk center +/- blade_length must lie inside the frame");
    }
}

SimulationResult simulate(const SceneSpec& scene) {
    validate(scene);

    // Source 0..P-1 are propellers, source P is background noise. Each source
    // has its own engine, so generation order across sources cannot matter.
    const std::size_t n_sources = scene.propellers.size() + 1;
    std::vector<std::vector<RawEvent>> raw(n_sources);

#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(n_sources); ++s) {
        if (s < static_cast<std::int64_t>(scene.propellers.size())) {
            raw[s] = generate_propeller(scene, scene.propellers[s],
                                        seeded_engine(scene.seed, static_cast<std::uint64_t>(s) + 1));
        } else {
            raw[s] = generate_noise(scene, seeded_engine(scene.seed, 0));
        }
    }

    struct Tagged {
        RawEvent e;
        int label;
    };
    std::size_t total = 0;
    for (const auto& v : raw) total += v.size();
    std::vector<Tagged> merged;
    merged.reserve(total);
    for (std::size_t s = 0; s < n_sources; ++s) {
        const int label = s < scene.propellers.size() ? static_cast<int>(s) : -1;
        for (const RawEvent& e : raw[s]) merged.push_back(Tagged{e, label});
    }

    // Jitter applies to every coordinate before rounding; out-of-frame events
    // are discarded after rounding.
    SimulationResult result;
    result.stream.width = scene.width;
    result.stream.height = scene.height;
    result.stream.duration_us = scene.duration_us;
    result.stream.events.reserve(merged.size());
    result.labels.reserve(merged.size());

    std::stable_sort(merged.begin(), merged.end(),
                     [](const Tagged& a, const Tagged& b) { return a.e.t_us < b.e.t_us; });

    for (const Tagged& tg : merged) {
        double ox = 0.0, oy = 0.0;
        jitter_offset(scene, tg.e.t_us, ox, oy);
        const std::int64_t xi = std::llround(tg.e.x + ox);
        const std::int64_t yi = std::llround(tg.e.y + oy);
        if (xi < 0 || xi >= scene.width || yi < 0 || yi >= scene.height) continue;
        result.stream.events.push_back(Event{tg.e.t_us, static_cast<std::uint16_t>(xi),
                                             static_cast<std::uint16_t>(yi), tg.e.p});
        result.labels.push_back(tg.label);
    }

    for (const PropellerSpec& prop : scene.propellers) {
        result.truth.targets.push_back(TargetTruth{prop.rpm, prop.cx, prop.cy, prop.n_blades});
    }
    return result;
}

double ground_truth_rpm(const SceneSpec& scene, std::size_t index) {
    if (index >= scene.propellers.size())
        throw ValidationError("target index " + std::to_string(index) + " out of range (" +
                              std::to_string(scene.propellers.size()) + " targets)");
    return scene.propellers[index].rpm;
}

SceneSpec scene_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
    try {
        SceneSpec scene;
        scene.width = j.at("width").get<int>();
        scene.height = j.at("height").get<int>();
        scene.duration_us = j.at("duration").get<std::int64_t>();
        scene.events_per_blade_ms = j.at("events_per_blade_ms").get<double>();
        scene.noise_rate = j.value("noise_rate", 0.0);
        scene.jitter_amp = j.value("jitter_amp", 0.0);
        scene.seed = j.value("seed", std::uint64_t{1});
        for (const auto& pj : j.at("propellers")) {
            PropellerSpec p;
            p.cx = pj.at("center").at(0).get<double>();
            p.cy = pj.at("center").at(1).get<double>();
            p.n_blades = pj.at("n_blades").get<int>();
            p.blade_length = pj.at("blade_length").get<double>();
            p.blade_width = pj.at("blade_width").get<double>();
            p.rpm = pj.at("rpm").get<double>();
            p.phase0 = pj.value("phase0", 0.0);
            scene.propellers.push_back(p);
        }
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
}

std::string scene_to_json(const SceneSpec& scene) {
    nlohmann::json j;
    j["width"] = scene.width;
    j["height"] = scene.height;
    j["duration"] = scene.duration_us;
    j["events_per_blade_ms"] = scene.events_per_blade_ms;
    j["noise_rate"] = scene.noise_rate;
    j["jitter_amp"] = scene.jitter_amp;
    j["seed"] = scene.seed;
    j["propellers"] = nlohmann::json::array();
    for (const PropellerSpec& p : scene.propellers) {
        j["propellers"].push_back({{"center", {p.cx, p.cy}},
                                   {"n_blades", p.n_blades},
                                   {"blade_length", p.blade_length},
                                   {"blade_width", p.blade_width},
                                   {"rpm", p.rpm},
                                   {"phase0", p.phase0}});
    }
    return j.dump(2) + "\n";
}

std::string truth_to_json(const GroundTruth& truth) {
    nlohmann::json j;
    j["targets"] = nlohmann::json::array();
    for (const TargetTruth& t : truth.targets) {
        j["targets"].push_back(
            {{"rpm", t.rpm}, {"center", {t.cx, t.cy}}, {"n_blades", t.n_blades}});
    }
    return j.dump(2) + "\n";
}

} // namespace evtach::sim
