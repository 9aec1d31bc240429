// Benchmark: OpenMP kernels against the serial reference implementations.
// Also cross-checks that both sides produce identical results.
#include "evtach/extraction.hpp"
#include "evtach/parallel.hpp"
#include "evtach/reference.hpp"
#include "evtach/registration.hpp"
#include "evtach/rng.hpp"
#include "evtach/simulator.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

using namespace evtach;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::vector<Vec3> random_cloud(std::size_t n, std::uint64_t seed) {
    auto rng = seeded_engine(seed, 0);
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts)
        p = Vec3{uniform_in(rng, 0.0, 346.0), uniform_in(rng, 0.0, 260.0),
                 uniform_in(rng, 0.0, 100.0)};
    return pts;
}

void bench_nearest(std::size_t n, int reps) {
    const auto src = random_cloud(n, 11);
    const auto dst = random_cloud(n, 23);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> serial;
    for (int r = 0; r < reps; ++r) serial = ref::brute_force_nearest(src, dst);
    const double serial_ms = ms_since(t0) / reps;

    const auto t1 = std::chrono::steady_clock::now();
    std::vector<int> parallel;
    for (int r = 0; r < reps; ++r) parallel = reg::nearest_correspondence(src, dst);
    const double parallel_ms = ms_since(t1) / reps;

    const bool equal = serial == parallel;
    std::printf("nearest_correspondence  n=%-7zu serial %9.2f ms  kernel %9.2f ms  "
                "speedup %5.1fx  identical %s\n",
                n, serial_ms, parallel_ms, serial_ms / parallel_ms, equal ? "yes" : "NO");
    if (!equal) std::exit(1);
}

void bench_kmeans(std::size_t n, int reps) {
    auto rng = seeded_engine(99, 0);
    EventSlice s;
    s.width = 346;
    s.height = 260;
    s.t_len_us = 1;
    const double centers[4][2] = {{60, 60}, {280, 60}, {60, 200}, {280, 200}};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[i % 4];
        const int x = std::clamp<int>(static_cast<int>(c[0] + 30.0 * gaussian(rng)), 0, 345);
        const int y = std::clamp<int>(static_cast<int>(c[1] + 30.0 * gaussian(rng)), 0, 259);
        s.events.push_back(Event{0, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), 1});
    }
    std::vector<Vec2> init = {{50, 50}, {290, 50}, {50, 210}, {290, 210}};
    std::vector<Vec2> pts;
    for (const Event& e : s.events) pts.push_back(Vec2{double(e.x), double(e.y)});

    const auto t0 = std::chrono::steady_clock::now();
    ref::LloydResult serial;
    for (int r = 0; r < reps; ++r) serial = ref::lloyd_serial(pts, init);
    const double serial_ms = ms_since(t0) / reps;

    const auto t1 = std::chrono::steady_clock::now();
    extract::ClusterResult parallel;
    for (int r = 0; r < reps; ++r) parallel = extract::kmeans(s, init);
    const double parallel_ms = ms_since(t1) / reps;

    bool equal = serial.assignment == parallel.assignment &&
                 serial.centroids.size() == parallel.centroids.size();
    for (std::size_t j = 0; equal && j < serial.centroids.size(); ++j)
        equal = serial.centroids[j].x == parallel.centroids[j].x &&
                serial.centroids[j].y == parallel.centroids[j].y;
    std::printf("kmeans                  n=%-7zu serial %9.2f ms  kernel %9.2f ms  "
                "speedup %5.1fx  identical %s\n",
                n, serial_ms, parallel_ms, serial_ms / parallel_ms, equal ? "yes" : "NO");
    if (!equal) std::exit(1);
}

void bench_simulate(int reps) {
    sim::SceneSpec scene;
    scene.propellers = {sim::PropellerSpec{87, 65, 3, 40, 10, 1200, 0.0},
                        sim::PropellerSpec{259, 65, 3, 40, 10, 2400, 0.5},
                        sim::PropellerSpec{87, 195, 3, 40, 10, 3600, 1.0},
                        sim::PropellerSpec{259, 195, 3, 40, 10, 4800, 1.5}};
    scene.events_per_blade_ms = 150.0;
    scene.seed = 5;

    const auto t0 = std::chrono::steady_clock::now();
    std::size_t events = 0;
    for (int r = 0; r < reps; ++r) events = sim::simulate(scene).stream.events.size();
    std::printf("simulate (4 targets)    n=%-7zu %32.2f ms  threads %d\n", events,
                ms_since(t0) / reps, effective_threads());
}

} // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    std::printf("threads: %d\n", effective_threads());
    if (quick) {
        bench_nearest(800, 3);
        bench_kmeans(5000, 3);
        bench_simulate(1);
        return 0;
    }
    bench_nearest(2000, 5);
    bench_nearest(10000, 3);
    bench_nearest(20000, 1);
    bench_kmeans(50000, 3);
    bench_kmeans(200000, 1);
    bench_simulate(3);
    return 0;
}
