#ifndef EVTACH_EXTRACTION_HPP
#define EVTACH_EXTRACTION_HPP

#include "evtach/events.hpp"

#include <cstdint>
#include <vector>

namespace evtach::extract {

/// Per-cell accumulated event counts over a coarse pixel grid.
/// Cell (col, row) covers pixels [col*g, min((col+1)*g, width)) x
/// [row*g, min((row+1)*g, height)).
struct Heatmap {
    int grid_size = 4;
    int cols = 0;
    int rows = 0;
    int width = 0;
    int height = 0;
    std::vector<std::int64_t> counts; // row-major

    std::int64_t at(int col, int row) const { return counts[static_cast<std::size_t>(row) * cols + col]; }

    /// Midpoint of the cell's actual pixel coverage (edge cells can be narrow).
    Vec2 cell_center(int col, int row) const;
};

struct ClusterResult {
    int k = 0;
    std::vector<Vec2> centroids;
    std::vector<int> assignment; // one cluster index per slice event
    double dbi = 0.0;            // NaN when k == 1 (undefined)
    int iterations = 0;
    std::vector<double> wcss_trace; // within-cluster SSE at the start of each iteration
};

struct SymmetryInfo {
    int n_repeats = 1;
    double theta_c = 0.0; // 2*pi / n_repeats
};

struct SelectKParams {
    int k_min = 2;
    int k_max = 6;
    int grid_size = 4;
    double epsilon = 0.3;
    // A best multi-cluster DBI above this means the partition is carving one
    // dense target apart rather than separating real targets, so the scene is
    // treated as single-target. Genuine multi-target scenes score well below
    // this; wedge splits of one rotation disk stay well above it.
    double single_target_dbi = 0.6;
};

/// Default seed for the k-means++ draws inside symmetry_angle; fixed so the
/// whole pipeline is reproducible.
inline constexpr std::uint64_t kSymmetrySeed = 0x5EEDF00Dull;

Heatmap build_heatmap(const EventSlice& s, int grid_size = 4);

/// Greedy farthest-candidate seeding: the max-count cell first, then among
/// cells with count > epsilon * h the one maximizing the mean distance to the
/// already chosen centers. Ties break on lowest (row, col).
/// Throws InsufficientCandidates when fewer than k cells qualify.
std::vector<Vec2> init_centroids(const Heatmap& hm, int k, double epsilon = 0.3);

/// Lloyd iterations in (x, y) until the largest centroid displacement falls
/// below 0.5 px or 100 iterations; empty clusters are dropped. Throws
/// EmptyInput on an empty slice.
ClusterResult kmeans(const EventSlice& s, const std::vector<Vec2>& init);

/// Davies-Bouldin index of the partition; throws Undefined for k < 2.
double dbi(const ClusterResult& r, const EventSlice& s);
double dbi_points(const std::vector<Vec2>& pts, const std::vector<int>& assignment,
                  const std::vector<Vec2>& centroids);

/// Runs init_centroids + kmeans + dbi for each candidate k and returns the
/// partition with the smallest DBI (ties to smaller k). Falls back to k = 1
/// when every multi-cluster partition overlaps too heavily (or none can be
/// seeded). Throws ExtractionFailed on an empty slice.
ClusterResult select_k(const EventSlice& s, const SelectKParams& params = {});

/// Median with the even-count convention of averaging the two middle values.
double median(std::vector<double> values);

/// Drops events farther than 3x the median distance from the given centroid.
/// The centroid is not recomputed.
std::vector<Event> remove_outliers(const std::vector<Event>& cluster, const Vec2& centroid);

/// Detects the number of repeated features (blades) from the first n_events
/// of the cluster: k-means++ clustering for candidate counts 1..6 scored by
/// DBI. Throws SymmetryUndetermined when the cluster has fewer events.
SymmetryInfo symmetry_angle(const std::vector<Event>& cluster, int n_events = 300,
                            std::uint64_t seed = kSymmetrySeed);

} // namespace evtach::extract

#endif // EVTACH_EXTRACTION_HPP
