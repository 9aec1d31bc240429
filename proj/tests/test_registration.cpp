#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evtach/errors.hpp"
#include "evtach/reference.hpp"
#include "evtach/registration.hpp"
#include "evtach/rng.hpp"
#include "evtach/simulator.hpp"

#include <cmath>

using namespace evtach;
using namespace evtach::reg;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double box = 100.0) {
    auto rng = seeded_engine(seed, 0);
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts)
        p = Vec3{uniform_in(rng, 0.0, box), uniform_in(rng, 0.0, box), uniform_in(rng, 0.0, box)};
    return pts;
}

Eigen::Matrix3d yaw_matrix(double gamma) {
    Eigen::Matrix3d r;
    r << std::cos(gamma), std::sin(gamma), 0.0, //
        -std::sin(gamma), std::cos(gamma), 0.0, //
        0.0, 0.0, 1.0;
    return r;
}

Eigen::Matrix3d roll_matrix(double a) {
    Eigen::Matrix3d r;
    r << 1.0, 0.0, 0.0, //
        0.0, std::cos(a), std::sin(a), //
        0.0, -std::sin(a), std::cos(a);
    return r;
}

Eigen::Matrix3d pitch_matrix(double b) {
    Eigen::Matrix3d r;
    r << std::cos(b), 0.0, -std::sin(b), //
        0.0, 1.0, 0.0, //
        std::sin(b), 0.0, std::cos(b);
    return r;
}

std::vector<Vec3> apply_all(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                            const std::vector<Vec3>& pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) {
        const Eigen::Vector3d v = r * Eigen::Vector3d(p.x, p.y, p.z) + t;
        out.push_back(Vec3{v.x(), v.y(), v.z()});
    }
    return out;
}

} // namespace

TEST_CASE("nearest_correspondence on identical sets is the identity") {
    const auto pts = random_points(200, 1);
    const auto idx = nearest_correspondence(pts, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(idx[i] == static_cast<int>(i));
}

TEST_CASE("nearest_correspondence picks the closer point") {
    const std::vector<Vec3> p = {Vec3{0, 0, 0}};
    const std::vector<Vec3> q = {Vec3{1, 0, 0}, Vec3{5, 0, 0}};
    CHECK(nearest_correspondence(p, q) == std::vector<int>{0});
}

TEST_CASE("nearest_correspondence allows many-to-one and breaks ties low") {
    const std::vector<Vec3> p = {Vec3{0, 0, 0}, Vec3{0.1, 0, 0}, Vec3{-1, 0, 0}};
    const std::vector<Vec3> q = {Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{9, 9, 9}};
    const auto idx = nearest_correspondence(p, q);
    CHECK(idx == std::vector<int>({0, 0, 0}));
}

TEST_CASE("nearest_correspondence matches brute force on random instances") {
    auto rng = seeded_engine(2, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t np = 1 + uniform_index(rng, 1000);
        const std::size_t nq = 1 + uniform_index(rng, 1000);
        const auto p = random_points(np, 100 + trial);
        const auto q = random_points(nq, 200 + trial);
        CHECK(nearest_correspondence(p, q) == ref::brute_force_nearest(p, q));
    }
}

TEST_CASE("nearest_correspondence handles degenerate extents") {
    auto p = random_points(800, 3);
    auto q = random_points(900, 4);
    for (auto& v : q) v.z = 5.0; // flat target cloud
    CHECK(nearest_correspondence(p, q) == ref::brute_force_nearest(p, q));

    for (auto& v : q) v.y = -2.0; // collinear target cloud
    CHECK(nearest_correspondence(p, q) == ref::brute_force_nearest(p, q));

    const std::vector<Vec3> single = {Vec3{1, 2, 3}};
    CHECK(nearest_correspondence(p, single) == std::vector<int>(p.size(), 0));
}

TEST_CASE("nearest_correspondence rejects empty inputs") {
    const auto p = random_points(5, 9);
    CHECK_THROWS_AS(nearest_correspondence({}, p), EmptyInput);
    CHECK_THROWS_AS(nearest_correspondence(p, {}), EmptyInput);
}

TEST_CASE("fit_rigid recovers the identity") {
    const auto p = random_points(10, 5);
    const RigidTransform3 tf = fit_rigid(p, p);
    CHECK((tf.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(tf.translation.norm() < 1e-9);
}

TEST_CASE("fit_rigid recovers a known yaw rotation") {
    const auto p = random_points(10, 6);
    const Eigen::Matrix3d r = yaw_matrix(M_PI / 2.0);
    const auto q = apply_all(r, Eigen::Vector3d::Zero(), p);
    const RigidTransform3 tf = fit_rigid(p, q);
    CHECK((tf.rotation - r).norm() < 1e-9);
    CHECK(tf.translation.norm() < 1e-9);
}

TEST_CASE("fit_rigid recovers a pure translation") {
    const auto p = random_points(25, 7);
    const Eigen::Vector3d t(5.0, -3.0, 1.0);
    const auto q = apply_all(Eigen::Matrix3d::Identity(), t, p);
    const RigidTransform3 tf = fit_rigid(p, q);
    CHECK((tf.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK((tf.translation - t).norm() < 1e-9);
}

TEST_CASE("fit_rigid always returns a proper rotation") {
    auto rng = seeded_engine(8, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_points(4 + uniform_index(rng, 40), 300 + trial);
        auto q = random_points(p.size(), 400 + trial);
        if (trial % 3 == 0) {
            // mirrored correspondence provokes the reflection branch
            q = p;
            for (Vec3& v : q) v.x = -v.x;
        }
        const RigidTransform3 tf = fit_rigid(p, q);
        CHECK((tf.rotation.transpose() * tf.rotation - Eigen::Matrix3d::Identity()).norm() <
              1e-9);
        CHECK(tf.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("fit_rigid rejects degenerate geometry") {
    std::vector<Vec3> line;
    for (int i = 0; i < 12; ++i) line.push_back(Vec3{double(i), 0.0, 0.0});
    CHECK_THROWS_AS(fit_rigid(line, line), DegenerateGeometry);

    const auto p = random_points(2, 10);
    CHECK_THROWS_AS(fit_rigid(p, p), DegenerateGeometry);
}

TEST_CASE("extract_yaw round trips the yaw matrix") {
    CHECK(extract_yaw(Eigen::Matrix3d::Identity()) == 0.0);
    CHECK(extract_yaw(yaw_matrix(M_PI / 6.0)) == doctest::Approx(M_PI / 6.0).epsilon(1e-12));

    for (double gamma = -M_PI + 1e-3; gamma <= M_PI; gamma += 1e-3) {
        CHECK(std::abs(extract_yaw(yaw_matrix(gamma)) - gamma) < 1e-12);
    }
}

TEST_CASE("extract_yaw tolerates small roll and pitch") {
    const Eigen::Matrix3d composed =
        roll_matrix(0.01) * pitch_matrix(-0.02) * yaw_matrix(0.3);
    CHECK(std::abs(extract_yaw(composed) - 0.3) < 2e-3);

    // second-order insensitivity in the decomposition order of the embedding
    for (double e : {0.01, 0.03, 0.05}) {
        const double err =
            std::abs(extract_yaw(roll_matrix(e) * pitch_matrix(-e) * yaw_matrix(0.7)) - 0.7);
        CHECK(err <= 4.0 * e * e + 1e-12);
    }
}

namespace {

// Integer-pixel slices related by an exact yaw rotation about (cx, cy).
struct RotatedPair {
    EventSlice p;
    EventSlice q;
};

RotatedPair make_rotated_pair(std::uint64_t seed, double gamma, double cx, double cy,
                              double tx = 0.0, double ty = 0.0, std::size_t n = 700) {
    auto rng = seeded_engine(seed, 0);
    RotatedPair out;
    out.p.width = out.q.width = 1000;
    out.p.height = out.q.height = 1000;
    out.p.t_len_us = out.q.t_len_us = 10'000;
    const double c = std::cos(gamma), s = std::sin(gamma);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = uniform_in(rng, 300.0, 600.0);
        const double y = uniform_in(rng, 300.0, 600.0);
        const std::int64_t t = static_cast<std::int64_t>(uniform_index(rng, 10'000));
        const double dx = x - cx, dy = y - cy;
        // R_T convention: row 0 is [cos, sin]
        const double xr = cx + c * dx + s * dy + tx;
        const double yr = cy - s * dx + c * dy + ty;
        if (xr < 0 || xr > 999 || yr < 0 || yr > 999) continue;
        out.p.events.push_back(Event{t, static_cast<std::uint16_t>(std::llround(x)),
                                     static_cast<std::uint16_t>(std::llround(y)), 1});
        out.q.events.push_back(Event{t, static_cast<std::uint16_t>(std::llround(xr)),
                                     static_cast<std::uint16_t>(std::llround(yr)), 1});
    }
    return out;
}

} // namespace

TEST_CASE("icp_register of a slice with itself is a null rotation") {
    const RotatedPair pair = make_rotated_pair(11, 0.0, 450.0, 450.0);
    IcpParams params;
    const RegistrationResult r = icp_register(pair.p, pair.p, params);
    CHECK(std::abs(r.gamma_acc) < 1e-6);
    CHECK(r.iterations <= 2);
    CHECK(r.converged);
    CHECK(r.final_residual < 1e-9);
}

TEST_CASE("icp_register recovers a five degree rotation about the center") {
    const double gamma = 5.0 * M_PI / 180.0;
    const RotatedPair pair = make_rotated_pair(12, gamma, 450.0, 450.0);
    IcpParams params;
    const RegistrationResult r = icp_register(pair.p, pair.q, params);
    CHECK(r.converged);
    CHECK(std::abs(r.gamma_acc - gamma) < 0.1 * M_PI / 180.0);
}

TEST_CASE("icp_register residual trace is non-increasing on exact rotations") {
    const RotatedPair pair = make_rotated_pair(13, 0.2, 420.0, 480.0, 8.0, -5.0);
    IcpParams params;
    const RegistrationResult r = icp_register(pair.p, pair.q, params);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i].rms_residual <= r.trace[i - 1].rms_residual + 1e-12);
}

TEST_CASE("extracted yaw is invariant to scaling the spatial coordinates") {
    const double gamma = 0.15;
    const RotatedPair pair = make_rotated_pair(14, gamma, 450.0, 450.0);
    EventSlice p2 = pair.p, q2 = pair.q;
    p2.width = q2.width = 2000;
    p2.height = q2.height = 2000;
    for (Event& e : p2.events) {
        e.x = static_cast<std::uint16_t>(e.x * 2);
        e.y = static_cast<std::uint16_t>(e.y * 2);
    }
    for (Event& e : q2.events) {
        e.x = static_cast<std::uint16_t>(e.x * 2);
        e.y = static_cast<std::uint16_t>(e.y * 2);
    }
    IcpParams params;
    const double a = icp_register(pair.p, pair.q, params).gamma_acc;
    const double b = icp_register(p2, q2, params).gamma_acc;
    CHECK(std::abs(a - b) < 2e-4);
}

TEST_CASE("icp_register enforces the minimum event count") {
    RotatedPair pair = make_rotated_pair(15, 0.1, 450.0, 450.0);
    pair.p.events.resize(9);
    CHECK_THROWS_AS(icp_register(pair.p, pair.q, IcpParams{}), TooFewEvents);
}

TEST_CASE("a warm start is folded into the accumulated yaw") {
    const double gamma = 0.3;
    const RotatedPair pair = make_rotated_pair(16, gamma, 450.0, 450.0);
    IcpParams params;
    params.initial_yaw = 0.28;
    const RegistrationResult r = icp_register(pair.p, pair.q, params);
    CHECK(r.converged);
    CHECK(std::abs(r.gamma_acc - gamma) < 0.1 * M_PI / 180.0);
}

TEST_CASE("bidirectional_yaw averages with the reverse sign flipped") {
    const double gamma = 0.12;
    const RotatedPair pair = make_rotated_pair(17, gamma, 480.0, 420.0);
    const BidirectionalYaw y = bidirectional_yaw(pair.p, pair.q, IcpParams{});
    CHECK(y.usable);
    CHECK(!y.degraded);
    // without the D-R4 sign alignment this average would collapse to ~0
    CHECK(std::abs(y.gamma - gamma) < 0.1 * M_PI / 180.0);

    const BidirectionalYaw self = bidirectional_yaw(pair.p, pair.p, IcpParams{});
    CHECK(std::abs(self.gamma) < 1e-6);
}

TEST_CASE("bidirectional error is bounded by the worse one-directional error") {
    IcpParams params;
    params.temporal_scale = 100.0;
    int pairs = 0;
    for (double rpm : {600.0, 1500.0, 3000.0, 4500.0, 6000.0}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            sim::SceneSpec scene;
            scene.propellers.push_back(sim::PropellerSpec{173, 130, 3, 60, 14, rpm, 0.21 * seed});
            scene.events_per_blade_ms = 100.0;
            scene.seed = seed * 31;
            const auto result = sim::simulate(scene);
            const double truth = rpm * 2.0 * M_PI / 60.0 * 1e-6 * 1000.0;
            for (std::int64_t start : {0, 10'000, 20'000, 30'000}) {
                const EventSlice p = slice(result.stream, start, 10'000);
                const EventSlice q = slice(result.stream, start + 1'000, 10'000);
                const RegistrationResult fwd = icp_register(p, q, params);
                const RegistrationResult rev = icp_register(q, p, params);
                const BidirectionalYaw y = bidirectional_yaw(p, q, params);
                if (!(fwd.converged && rev.converged)) continue;
                const double worse = std::max(std::abs(fwd.gamma_acc - truth),
                                              std::abs(-rev.gamma_acc - truth));
                CHECK(std::abs(y.gamma - truth) <= worse + 1e-12);
                ++pairs;
            }
        }
    }
    CHECK(pairs >= 95);
}

TEST_CASE("simulated 3000 rpm pair registers to omega times the step") {
    sim::SceneSpec scene;
    scene.propellers.push_back(sim::PropellerSpec{173, 130, 3, 60, 14, 3000, 0.3});
    scene.events_per_blade_ms = 150.0;
    scene.seed = 42;
    const auto result = sim::simulate(scene);
    const double omega_per_us = 3000.0 * 2.0 * M_PI / 60.0 * 1e-6;
    const double expected = omega_per_us * 1000.0; // 0.3142 rad

    IcpParams params;
    params.temporal_scale = 100.0;
    const EventSlice p = slice(result.stream, 0, 10'000);
    const EventSlice q = slice(result.stream, 1'000, 10'000);
    const RegistrationResult r = icp_register(p, q, params);
    CHECK(r.converged);
    CHECK(r.gamma_acc == doctest::Approx(expected).epsilon(0.03));
}
