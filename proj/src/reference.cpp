#include "evtach/reference.hpp"

#include "evtach/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evtach::ref {

std::vector<int> brute_force_nearest(std::span<const Vec3> source,
                                     std::span<const Vec3> target) {
    if (source.empty() || target.empty())
        throw EmptyInput("brute_force_nearest: empty point set");
    std::vector<int> out(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        int best = 0;
        double best_d2 = dist2(source[i], target[0]);
        for (int j = 1; j < static_cast<int>(target.size()); ++j) {
            const double d2 = dist2(source[i], target[j]);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        out[i] = best;
    }
    return out;
}

LloydResult lloyd_serial(const std::vector<Vec2>& pts, std::vector<Vec2> centroids,
                         int max_iterations, double displacement_tol) {
    LloydResult out;
    out.assignment.assign(pts.size(), 0);

    for (int iter = 1; iter <= max_iterations; ++iter) {
        out.iterations = iter;
        const int k = static_cast<int>(centroids.size());

        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double bd = dist2(pts[i], centroids[0]);
            for (int j = 1; j < k; ++j) {
                const double d = dist2(pts[i], centroids[j]);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            out.assignment[i] = best;
        }

        std::vector<double> sx(k, 0.0), sy(k, 0.0);
        std::vector<long long> cnt(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sx[out.assignment[i]] += pts[i].x;
            sy[out.assignment[i]] += pts[i].y;
            ++cnt[out.assignment[i]];
        }

        std::vector<int> remap(k, -1);
        std::vector<Vec2> updated;
        bool dropped = false;
        double max_disp2 = 0.0;
        for (int j = 0; j < k; ++j) {
            if (cnt[j] == 0) {
                dropped = true;
                continue;
            }
            remap[j] = static_cast<int>(updated.size());
            const Vec2 c{sx[j] / static_cast<double>(cnt[j]), sy[j] / static_cast<double>(cnt[j])};
            max_disp2 = std::max(max_disp2, dist2(c, centroids[j]));
            updated.push_back(c);
        }
        if (dropped) {
            for (auto& a : out.assignment) a = remap[a];
            centroids = std::move(updated);
            continue;
        }
        centroids = std::move(updated);
        if (max_disp2 < displacement_tol * displacement_tol) break;
    }
    out.centroids = std::move(centroids);
    return out;
}

namespace {

double dispersion_of(const std::vector<Vec2>& pts, const std::vector<int>& assignment,
                     const Vec2& centroid, int cluster) {
    double sum = 0.0;
    long long count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (assignment[i] != cluster) continue;
        sum += std::hypot(pts[i].x - centroid.x, pts[i].y - centroid.y);
        ++count;
    }
    return sum / static_cast<double>(count);
}

double separation_of(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

} // namespace

double dbi_formula(const std::vector<Vec2>& pts, const std::vector<int>& assignment,
                   const std::vector<Vec2>& centroids) {
    const int k = static_cast<int>(centroids.size());
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        double max_similarity = 0.0;
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double similarity =
                (dispersion_of(pts, assignment, centroids[i], i) +
                 dispersion_of(pts, assignment, centroids[j], j)) /
                separation_of(centroids[i], centroids[j]);
            max_similarity = std::max(max_similarity, similarity);
        }
        total += max_similarity;
    }
    return total / static_cast<double>(k);
}

double median_sorted(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<std::size_t> keep_within_3median(const std::vector<double>& distances) {
    const double d_m = median_sorted(distances);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (!(distances[i] > 3.0 * d_m)) kept.push_back(i);
    }
    return kept;
}

extract::Heatmap heatmap_by_pixel_map(const EventSlice& s, int grid_size) {
    extract::Heatmap hm;
    hm.grid_size = grid_size;
    hm.width = s.width;
    hm.height = s.height;
    hm.cols = (s.width + grid_size - 1) / grid_size;
    hm.rows = (s.height + grid_size - 1) / grid_size;
    hm.counts.assign(static_cast<std::size_t>(hm.cols) * hm.rows, 0);

    // Explicit pixel -> cell table, filled by walking each cell's coverage.
    std::vector<int> col_of(s.width, -1);
    std::vector<int> row_of(s.height, -1);
    for (int col = 0; col < hm.cols; ++col) {
        const int lo = col * grid_size;
        const int hi = std::min(lo + grid_size, s.width);
        for (int x = lo; x < hi; ++x) col_of[x] = col;
    }
    for (int row = 0; row < hm.rows; ++row) {
        const int lo = row * grid_size;
        const int hi = std::min(lo + grid_size, s.height);
        for (int y = lo; y < hi; ++y) row_of[y] = row;
    }
    for (const Event& e : s.events)
        ++hm.counts[static_cast<std::size_t>(row_of[e.y]) * hm.cols + col_of[e.x]];
    return hm;
}

} // namespace evtach::ref
