#include "evtach/registration.hpp"

#include "evtach/errors.hpp"
#include "evtach/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evtach::reg {
namespace {

constexpr std::size_t kBruteForceThreshold = 500;

struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    int idx = -1;

    void consider(double d2_new, int idx_new) {
        if (d2_new < d2 || (d2_new == d2 && idx_new < idx)) {
            d2 = d2_new;
            idx = idx_new;
        }
    }
};

int brute_nearest(const Vec3& p, std::span<const Vec3> target) {
    Best best;
    for (int j = 0; j < static_cast<int>(target.size()); ++j) best.consider(dist2(p, target[j]), j);
    return best.idx;
}

// Uniform grid over the target's bounding box with cubic cells; queries walk
// outward one Chebyshev shell at a time. The stop rule is strict so that
// distance ties are resolved exactly like the brute-force scan.
class GridNN {
public:
    explicit GridNN(std::span<const Vec3> target) : target_(target) {
        Vec3 lo{target[0].x, target[0].y, target[0].z};
        Vec3 hi = lo;
        for (const Vec3& q : target) {
            lo.x = std::min(lo.x, q.x); hi.x = std::max(hi.x, q.x);
            lo.y = std::min(lo.y, q.y); hi.y = std::max(hi.y, q.y);
            lo.z = std::min(lo.z, q.z); hi.z = std::max(hi.z, q.z);
        }
        origin_ = lo;
        const double ex = hi.x - lo.x, ey = hi.y - lo.y, ez = hi.z - lo.z;
        const double max_extent = std::max({ex, ey, ez});

        // Mean-spacing estimate over the axes that actually have extent.
        double prod = 1.0;
        int dims = 0;
        for (double e : {ex, ey, ez}) {
            if (e > 0.0) {
                prod *= e;
                ++dims;
            }
        }
        double h = dims > 0 ? std::pow(prod / static_cast<double>(target.size()),
                                       1.0 / static_cast<double>(dims))
                            : 1.0;
        h = std::max({h, max_extent / 128.0, 1e-9});
        cell_ = h;

        nx_ = axis_cells(ex);
        ny_ = axis_cells(ey);
        nz_ = axis_cells(ez);

        const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_ * nz_;
        std::vector<std::size_t> cell_of(target.size());
        std::vector<int> counts(n_cells + 1, 0);
        for (std::size_t i = 0; i < target.size(); ++i) {
            cell_of[i] = cell_index(clamped_coord(target[i].x, origin_.x, nx_),
                                    clamped_coord(target[i].y, origin_.y, ny_),
                                    clamped_coord(target[i].z, origin_.z, nz_));
            ++counts[cell_of[i] + 1];
        }
        for (std::size_t c = 1; c <= n_cells; ++c) counts[c] += counts[c - 1];
        start_ = std::move(counts);
        slot_.resize(target.size());
        std::vector<int> cursor(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < target.size(); ++i)
            slot_[cursor[cell_of[i]]++] = static_cast<int>(i);
    }

    int query(const Vec3& p) const {
        const int cx = virtual_coord(p.x, origin_.x);
        const int cy = virtual_coord(p.y, origin_.y);
        const int cz = virtual_coord(p.z, origin_.z);
        const int r_cover = std::max({cx, nx_ - 1 - cx, cy, ny_ - 1 - cy, cz, nz_ - 1 - cz});

        Best best;
        for (int r = 0; r <= r_cover; ++r) {
            scan_shell(p, cx, cy, cz, r, best);
            if (best.idx >= 0) {
                const double guaranteed = static_cast<double>(r) * cell_;
                if (best.d2 < guaranteed * guaranteed) break;
            }
        }
        return best.idx;
    }

private:
    int axis_cells(double extent) const {
        return std::max(1, static_cast<int>(extent / cell_) + 1);
    }
    int virtual_coord(double v, double origin) const {
        return static_cast<int>(std::floor((v - origin) / cell_));
    }
    int clamped_coord(double v, double origin, int n) const {
        return std::clamp(virtual_coord(v, origin), 0, n - 1);
    }
    std::size_t cell_index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny_ + y) * nx_ + x;
    }

    void scan_cell(const Vec3& p, int x, int y, int z, Best& best) const {
        const std::size_t c = cell_index(x, y, z);
        for (int s = start_[c]; s < start_[c + 1]; ++s) {
            const int j = slot_[s];
            best.consider(dist2(p, target_[j]), j);
        }
    }

    void scan_shell(const Vec3& p, int cx, int cy, int cz, int r, Best& best) const {
        const int x0 = std::max(cx - r, 0), x1 = std::min(cx + r, nx_ - 1);
        const int y0 = std::max(cy - r, 0), y1 = std::min(cy + r, ny_ - 1);
        const int z0 = std::max(cz - r, 0), z1 = std::min(cz + r, nz_ - 1);
        for (int z = z0; z <= z1; ++z) {
            const bool z_face = (z == cz - r || z == cz + r);
            for (int y = y0; y <= y1; ++y) {
                const bool y_face = (y == cy - r || y == cy + r);
                if (z_face || y_face) {
                    for (int x = x0; x <= x1; ++x) scan_cell(p, x, y, z, best);
                } else {
                    if (cx - r >= 0 && cx - r <= nx_ - 1) scan_cell(p, cx - r, y, z, best);
                    if (cx + r >= 0 && cx + r <= nx_ - 1 && r > 0) scan_cell(p, cx + r, y, z, best);
                }
            }
        }
    }

    std::span<const Vec3> target_;
    Vec3 origin_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<int> start_;
    std::vector<int> slot_;
};

} // namespace

std::vector<int> nearest_correspondence(std::span<const Vec3> source,
                                        std::span<const Vec3> target) {
    if (source.empty() || target.empty())
        throw EmptyInput("nearest_correspondence: empty point set");

    std::vector<int> out(source.size());
    const std::int64_t n = static_cast<std::int64_t>(source.size());
    if (target.size() < kBruteForceThreshold) {
#pragma omp parallel for schedule(static) num_threads(effective_threads())
        for (std::int64_t i = 0; i < n; ++i) out[i] = brute_nearest(source[i], target);
        return out;
    }

    const GridNN grid(target);
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (std::int64_t i = 0; i < n; ++i) out[i] = grid.query(source[i]);
    return out;
}

RigidTransform3 fit_rigid(std::span<const Vec3> source, std::span<const Vec3> target) {
    if (source.size() != target.size())
        throw ValidationError("fit_rigid: size mismatch");
    if (source.size() < 3) throw DegenerateGeometry("fit_rigid: need at least 3 pairs");

    const double n = static_cast<double>(source.size());
    Eigen::Vector3d p_bar = Eigen::Vector3d::Zero();
    Eigen::Vector3d q_bar = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        p_bar += Eigen::Vector3d(source[i].x, source[i].y, source[i].z);
        q_bar += Eigen::Vector3d(target[i].x, target[i].y, target[i].z);
    }
    p_bar /= n;
    q_bar /= n;

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Eigen::Vector3d dp = Eigen::Vector3d(source[i].x, source[i].y, source[i].z) - p_bar;
        const Eigen::Vector3d dq = Eigen::Vector3d(target[i].x, target[i].y, target[i].z) - q_bar;
        cov += dp * dq.transpose();
    }

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= sv(0) * 1e-12)
        throw DegenerateGeometry("fit_rigid: covariance rank < 2");

    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    if ((v * u.transpose()).determinant() < 0.0) v.col(2) = -v.col(2);

    RigidTransform3 tf;
    tf.rotation = v * u.transpose();
    tf.translation = q_bar - tf.rotation * p_bar;
    return tf;
}

double extract_yaw(const Eigen::Matrix3d& rotation) {
    return std::atan2(rotation(0, 1), rotation(0, 0));
}

RegistrationResult icp_register(const EventSlice& source, const EventSlice& target,
                                const IcpParams& params) {
    if (source.events.size() < params.min_events || target.events.size() < params.min_events)
        throw TooFewEvents("icp_register: slices need >= " + std::to_string(params.min_events) +
                           " events (" + std::to_string(source.events.size()) + ", " +
                           std::to_string(target.events.size()) + ")");

    std::vector<Vec3> moving = embed(source, params.temporal_scale);
    const std::vector<Vec3> fixed = embed(target, params.temporal_scale);
    const std::int64_t n = static_cast<std::int64_t>(moving.size());

    RegistrationResult result;
    if (params.initial_yaw != 0.0) {
        double cx = 0.0, cy = 0.0;
        for (const Vec3& p : moving) {
            cx += p.x;
            cy += p.y;
        }
        cx /= static_cast<double>(n);
        cy /= static_cast<double>(n);
        const double c = std::cos(params.initial_yaw);
        const double s = std::sin(params.initial_yaw);
        for (Vec3& p : moving) {
            const double dx = p.x - cx;
            const double dy = p.y - cy;
            // R_T(initial_yaw) about the vertical axis through the centroid
            p.x = cx + c * dx + s * dy;
            p.y = cy - s * dx + c * dy;
        }
        result.gamma_acc = params.initial_yaw;
    }
    std::vector<Vec3> matched(moving.size());

    for (int iter = 1; iter <= params.max_iterations; ++iter) {
        result.iterations = iter;
        const std::vector<int> corr = nearest_correspondence(moving, fixed);
        for (std::size_t i = 0; i < matched.size(); ++i) matched[i] = fixed[corr[i]];

        const RigidTransform3 tf = fit_rigid(moving, matched);
        const double gamma = extract_yaw(tf.rotation);
        result.gamma_acc += gamma;

#pragma omp parallel for schedule(static) num_threads(effective_threads())
        for (std::int64_t i = 0; i < n; ++i) moving[i] = tf.apply(moving[i]);

        double sse = 0.0;
        for (std::int64_t i = 0; i < n; ++i) sse += dist2(moving[i], matched[i]);
        result.trace.push_back(IterationTrace{gamma, std::sqrt(sse / static_cast<double>(n))});

        if (std::abs(gamma) < params.yaw_abs_tol) {
            result.converged = true;
            break;
        }
        if (iter >= 2 && result.gamma_acc != 0.0 &&
            std::abs(gamma) / std::abs(result.gamma_acc) < params.yaw_ratio_tol) {
            result.converged = true;
            break;
        }
    }

    const std::vector<int> corr = nearest_correspondence(moving, fixed);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) sum += std::sqrt(dist2(moving[i], fixed[corr[i]]));
    result.final_residual = sum / static_cast<double>(n);
    return result;
}

BidirectionalYaw bidirectional_yaw(const EventSlice& source, const EventSlice& target,
                                   const IcpParams& params) {
    IcpParams reverse_params = params;
    reverse_params.initial_yaw = -params.initial_yaw; // swapped roles invert the rotation
    const RegistrationResult forward = icp_register(source, target, params);
    const RegistrationResult reverse = icp_register(target, source, reverse_params);

    BidirectionalYaw out;
    out.forward_converged = forward.converged;
    out.reverse_converged = reverse.converged;
    out.usable = forward.converged || reverse.converged;
    out.degraded = forward.converged != reverse.converged;
    if (forward.converged && reverse.converged) {
        out.gamma = (forward.gamma_acc - reverse.gamma_acc) / 2.0;
    } else if (forward.converged) {
        out.gamma = forward.gamma_acc;
    } else if (reverse.converged) {
        out.gamma = -reverse.gamma_acc;
    } else {
        out.gamma = (forward.gamma_acc - reverse.gamma_acc) / 2.0;
    }
    return out;
}

} // namespace evtach::reg
