#ifndef EVTACH_REGISTRATION_HPP
#define EVTACH_REGISTRATION_HPP

#include "evtach/events.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace evtach::reg {

/// Rigid motion in the (x, y, scaled-t) embedding: q = R * p + t.
struct RigidTransform3 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Vec3 apply(const Vec3& p) const {
        const Eigen::Vector3d v = rotation * Eigen::Vector3d(p.x, p.y, p.z) + translation;
        return Vec3{v.x(), v.y(), v.z()};
    }
};

struct IcpParams {
    double temporal_scale = 1.0;
    int max_iterations = 50;
    double yaw_ratio_tol = 1e-3; // stop when |gamma| / |gamma_acc| drops below
    double yaw_abs_tol = 1e-6;   // rad; stop when an iteration's yaw is negligible
    std::size_t min_events = 10;
    // Warm start: rotate the source by this yaw about its own centroid before
    // the first correspondence. gamma_acc starts here, so the result is still
    // the total rotation between the slices. Zero disables it.
    double initial_yaw = 0.0;
};

struct IterationTrace {
    double gamma = 0.0;
    double rms_residual = 0.0; // over matched pairs, after applying the fit
};

struct RegistrationResult {
    double gamma_acc = 0.0; // accumulated yaw, radians
    int iterations = 0;
    double final_residual = 0.0; // mean nearest-neighbor distance at exit
    bool converged = false;
    std::vector<IterationTrace> trace;
};

struct BidirectionalYaw {
    double gamma = 0.0; // sign-aligned average of both directions
    bool forward_converged = false;
    bool reverse_converged = false;
    bool degraded = false; // only one direction converged
    bool usable = false;   // at least one direction converged
};

/// For each point of P, the index of a Euclidean-nearest point of Q in the 3D
/// embedding. Ties break to the lowest Q index; many-to-one is allowed.
/// Backed by a uniform grid hash above 500 target points, brute force below;
/// both produce identical results. Throws EmptyInput if either set is empty.
std::vector<int> nearest_correspondence(std::span<const Vec3> source,
                                        std::span<const Vec3> target);

/// Least-squares rigid fit of paired point sets via SVD of their covariance,
/// with the usual determinant correction so the result is a proper rotation.
/// Throws DegenerateGeometry when the covariance has rank < 2 (or fewer than
/// 3 pairs are given).
RigidTransform3 fit_rigid(std::span<const Vec3> source, std::span<const Vec3> target);

/// Yaw angle about the T axis, using the convention whose rotation matrix has
/// first row [cos g, sin g, 0]; range (-pi, pi].
double extract_yaw(const Eigen::Matrix3d& rotation);

/// Full ICP loop between two slices: embed (time re-based), correspond, fit,
/// accumulate yaw, transform, repeat until the yaw increment is negligible in
/// absolute or relative terms, or the iteration cap is hit.
RegistrationResult icp_register(const EventSlice& source, const EventSlice& target,
                                const IcpParams& params);

/// Registers both directions and averages after negating the reverse yaw
/// (swapping roles inverts the rotation). Falls back to the single converged
/// direction when only one converges.
BidirectionalYaw bidirectional_yaw(const EventSlice& source, const EventSlice& target,
                                   const IcpParams& params);

} // namespace evtach::reg

#endif // EVTACH_REGISTRATION_HPP
