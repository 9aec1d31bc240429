#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evtach/errors.hpp"
#include "evtach/simulator.hpp"

#include <cmath>
#include <complex>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace evtach;
using namespace evtach::sim;

namespace {

SceneSpec one_prop(double rpm, int blades = 3, std::uint64_t seed = 42) {
    SceneSpec scene;
    scene.propellers.push_back(PropellerSpec{173.0, 130.0, blades, 60.0, 14.0, rpm, 0.3});
    scene.events_per_blade_ms = 50.0;
    scene.seed = seed;
    return scene;
}

} // namespace

TEST_CASE("simulate is deterministic for a fixed seed") {
    const SceneSpec scene = one_prop(3000.0);
    const SimulationResult a = simulate(scene);
    const SimulationResult b = simulate(scene);
    CHECK(a.stream == b.stream);
    CHECK(a.labels == b.labels);
}

TEST_CASE("simulate is independent of the thread count") {
#ifdef _OPENMP
    SceneSpec scene = one_prop(2400.0);
    scene.propellers.push_back(PropellerSpec{60.0, 60.0, 2, 30.0, 8.0, 1200.0, 1.1});
    scene.noise_rate = 20.0;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const SimulationResult a = simulate(scene);
    omp_set_num_threads(4);
    const SimulationResult b = simulate(scene);
    omp_set_num_threads(saved);
    CHECK(a.stream == b.stream);
    CHECK(a.labels == b.labels);
#endif
}

TEST_CASE("clean scenes keep every event within blade_length + 1 of the center") {
    const SceneSpec scene = one_prop(3000.0);
    const SimulationResult r = simulate(scene);
    REQUIRE(!r.stream.events.empty());
    double worst = 0.0;
    for (const Event& e : r.stream.events) {
        worst = std::max(worst, std::hypot(e.x - 173.0, e.y - 130.0));
    }
    CHECK(worst <= 61.0);
}

TEST_CASE("timestamps are non-decreasing and inside the duration") {
    SceneSpec scene = one_prop(900.0);
    scene.noise_rate = 30.0;
    scene.jitter_amp = 2.0;
    const SimulationResult r = simulate(scene);
    for (std::size_t i = 1; i < r.stream.events.size(); ++i)
        REQUIRE(r.stream.events[i].t_us >= r.stream.events[i - 1].t_us);
    CHECK(r.stream.events.back().t_us < scene.duration_us);
    CHECK(r.stream.duration_us == scene.duration_us);
}

TEST_CASE("event count matches the configured rates within 5 percent") {
    SceneSpec scene = one_prop(1500.0);
    scene.events_per_blade_ms = 80.0;
    scene.noise_rate = 40.0;
    const double duration_ms = scene.duration_us / 1000.0;
    const double expected = duration_ms * (3 * 80.0 + 40.0);
    const SimulationResult r = simulate(scene);
    CHECK(std::abs(static_cast<double>(r.stream.events.size()) - expected) < 0.05 * expected);
}

TEST_CASE("labels separate blade events from noise") {
    SceneSpec scene = one_prop(1500.0);
    scene.noise_rate = 0.1 * 3 * scene.events_per_blade_ms;
    const SimulationResult r = simulate(scene);
    REQUIRE(r.labels.size() == r.stream.events.size());
    std::size_t noise = 0;
    for (int l : r.labels) {
        REQUIRE(l >= -1);
        REQUIRE(l < 1);
        if (l == -1) ++noise;
    }
    const double frac = static_cast<double>(noise) / r.labels.size();
    CHECK(frac == doctest::Approx(0.1 / 1.1).epsilon(0.15));
}

TEST_CASE("events concentrate in n_blades lobes at the analytic blade angle") {
    const double rpm = 3000.0;
    const SceneSpec scene = one_prop(rpm);
    const SimulationResult r = simulate(scene);

    // one-millisecond window in the middle of the capture
    const std::int64_t w0 = 70'000, w1 = 71'000;
    std::complex<double> resultant{0.0, 0.0};
    std::size_t n = 0;
    for (const Event& e : r.stream.events) {
        if (e.t_us < w0 || e.t_us >= w1) continue;
        const double dx = e.x - 173.0;
        const double dy = 130.0 - e.y; // screen y points down
        if (std::hypot(dx, dy) < 20.0) continue; // hub events carry no angle
        const double theta = std::atan2(dy, dx);
        resultant += std::exp(std::complex<double>(0.0, 3.0 * theta));
        ++n;
    }
    REQUIRE(n > 50);
    resultant /= static_cast<double>(n);
    // concentration in three lobes 2*pi/3 apart
    CHECK(std::abs(resultant) > 0.5);

    // lobe phase matches phase0 + omega * t at the window center
    const double omega = rpm * 2.0 * M_PI / 60.0;
    const double expected = 0.3 + omega * 70.5e-3;
    const double measured = std::arg(resultant) / 3.0;
    const double delta = std::remainder(measured - expected, 2.0 * M_PI / 3.0);
    CHECK(std::abs(delta) < 0.05);
}

TEST_CASE("ground_truth_rpm returns configured speeds") {
    SceneSpec scene;
    scene.propellers.push_back(PropellerSpec{100.0, 100.0, 3, 50.0, 12.0, 300.0, 0.0});
    scene.propellers.push_back(PropellerSpec{250.0, 130.0, 2, 40.0, 10.0, 4500.0, 0.0});
    CHECK(ground_truth_rpm(scene, 0) == 300.0);
    CHECK(ground_truth_rpm(scene, 1) == 4500.0);
    CHECK_THROWS_AS(ground_truth_rpm(scene, 2), ValidationError);

    scene.propellers[0].rpm = -600.0;
    CHECK(ground_truth_rpm(scene, 0) == -600.0);
}

TEST_CASE("validate names the violated invariant") {
    SceneSpec scene = one_prop(3000.0);
    scene.propellers[0].cx = 20.0; // disk pokes out of the frame
    CHECK_THROWS_WITH_AS(simulate(scene), doctest::Contains("inside the frame"),
                         ValidationError);

    SceneSpec bad_blades = one_prop(3000.0);
    bad_blades.propellers[0].n_blades = 9;
    CHECK_THROWS_WITH_AS(simulate(bad_blades), doctest::Contains("n_blades"), ValidationError);

    SceneSpec zero_rpm = one_prop(3000.0);
    zero_rpm.propellers[0].rpm = 0.0;
    CHECK_THROWS_AS(simulate(zero_rpm), ValidationError);
}

TEST_CASE("scene JSON round trips") {
    SceneSpec scene = one_prop(-1200.0, 4, 99);
    scene.noise_rate = 12.5;
    scene.jitter_amp = 1.5;
    const SceneSpec back = scene_from_json(scene_to_json(scene));
    CHECK(back.width == scene.width);
    CHECK(back.height == scene.height);
    CHECK(back.duration_us == scene.duration_us);
    CHECK(back.seed == scene.seed);
    CHECK(back.noise_rate == scene.noise_rate);
    CHECK(back.jitter_amp == scene.jitter_amp);
    REQUIRE(back.propellers.size() == 1);
    CHECK(back.propellers[0].rpm == -1200.0);
    CHECK(back.propellers[0].n_blades == 4);
    CHECK(back.propellers[0].cx == scene.propellers[0].cx);
    CHECK(back.propellers[0].phase0 == scene.propellers[0].phase0);
}

TEST_CASE("scene_from_json rejects malformed documents") {
    CHECK_THROWS_AS(scene_from_json("{"), ParseError);
    CHECK_THROWS_AS(scene_from_json("{\"width\": 346}"), ParseError);
}
