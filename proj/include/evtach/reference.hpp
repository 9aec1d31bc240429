#ifndef EVTACH_REFERENCE_HPP
#define EVTACH_REFERENCE_HPP

#include "evtach/events.hpp"
#include "evtach/extraction.hpp"

#include <span>
#include <vector>

// Serial reference implementations, deliberately written straight from the
// defining formulas and kept independent of the optimized kernels. Tests use
// them as oracles; the benchmark uses them as the baseline.
namespace evtach::ref {

/// O(n^2) nearest neighbor with the same tie rule as the grid-hash kernel.
std::vector<int> brute_force_nearest(std::span<const Vec3> source,
                                     std::span<const Vec3> target);

struct LloydResult {
    std::vector<Vec2> centroids;
    std::vector<int> assignment;
    int iterations = 0;
};

/// Single-threaded textbook Lloyd with the pipeline's tie and drop rules.
LloydResult lloyd_serial(const std::vector<Vec2>& pts, std::vector<Vec2> centroids,
                         int max_iterations = 100, double displacement_tol = 0.5);

/// Davies-Bouldin index computed term by term from its definition.
double dbi_formula(const std::vector<Vec2>& pts, const std::vector<int>& assignment,
                   const std::vector<Vec2>& centroids);

/// Median by full sort (even count: mean of the two middle values).
double median_sorted(std::vector<double> values);

/// Indices surviving the 3x-median-distance rule, straight from the formula.
std::vector<std::size_t> keep_within_3median(const std::vector<double>& distances);

/// Heatmap accumulated through an explicit pixel -> cell lookup table built
/// by enumerating each cell's pixel coverage.
extract::Heatmap heatmap_by_pixel_map(const EventSlice& s, int grid_size);

} // namespace evtach::ref

#endif // EVTACH_REFERENCE_HPP
