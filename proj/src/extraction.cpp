#include "evtach/extraction.hpp"

#include "evtach/errors.hpp"
#include "evtach/parallel.hpp"
#include "evtach/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evtach::extract {
namespace {

std::vector<Vec2> event_points(const EventSlice& s) {
    std::vector<Vec2> pts;
    pts.reserve(s.events.size());
    for (const Event& e : s.events)
        pts.push_back(Vec2{static_cast<double>(e.x), static_cast<double>(e.y)});
    return pts;
}

struct LloydResult {
    std::vector<Vec2> centroids;
    std::vector<int> assignment;
    int iterations = 0;
    std::vector<double> wcss_trace;
};

// Plain Lloyd with the deterministic tie rules the rest of the pipeline
// relies on: nearest-centroid ties go to the lowest cluster index, empty
// clusters are dropped and k shrinks. The assignment kernel is parallel;
// accumulation stays serial so results do not depend on the thread count.
LloydResult lloyd2d(const std::vector<Vec2>& pts, std::vector<Vec2> centroids,
                    int max_iterations = 100, double displacement_tol = 0.5) {
    const std::int64_t n = static_cast<std::int64_t>(pts.size());
    LloydResult out;
    out.assignment.assign(pts.size(), 0);
    std::vector<double> best_d2(pts.size(), 0.0);

    for (int iter = 1; iter <= max_iterations; ++iter) {
        const int k = static_cast<int>(centroids.size());
        out.iterations = iter;

#pragma omp parallel for schedule(static) num_threads(effective_threads())
        for (std::int64_t i = 0; i < n; ++i) {
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
            best_d2[i] = bd;
        }

        double wcss = 0.0;
        for (std::int64_t i = 0; i < n; ++i) wcss += best_d2[i];
        out.wcss_trace.push_back(wcss);

        std::vector<double> sx(k, 0.0), sy(k, 0.0);
        std::vector<std::int64_t> cnt(k, 0);
        for (std::int64_t i = 0; i < n; ++i) {
            const int j = out.assignment[i];
            sx[j] += pts[i].x;
            sy[j] += pts[i].y;
            ++cnt[j];
        }

        std::vector<int> remap(k, -1);
        std::vector<Vec2> updated;
        updated.reserve(k);
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
            for (std::int64_t i = 0; i < n; ++i) out.assignment[i] = remap[out.assignment[i]];
            centroids = std::move(updated);
            continue; // k changed; convergence test restarts
        }
        centroids = std::move(updated);
        if (max_disp2 < displacement_tol * displacement_tol) break;
    }
    out.centroids = std::move(centroids);
    return out;
}

} // namespace

Vec2 Heatmap::cell_center(int col, int row) const {
    const double x_lo = static_cast<double>(col) * grid_size;
    const double x_hi = std::min<double>(x_lo + grid_size, width);
    const double y_lo = static_cast<double>(row) * grid_size;
    const double y_hi = std::min<double>(y_lo + grid_size, height);
    return Vec2{(x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0};
}

Heatmap build_heatmap(const EventSlice& s, int grid_size) {
    if (grid_size < 1) throw ValidationError("grid_size must be >= 1");
    Heatmap hm;
    hm.grid_size = grid_size;
    hm.width = s.width;
    hm.height = s.height;
    hm.cols = (s.width + grid_size - 1) / grid_size;
    hm.rows = (s.height + grid_size - 1) / grid_size;
    hm.counts.assign(static_cast<std::size_t>(hm.cols) * hm.rows, 0);
    for (const Event& e : s.events) {
        const int col = e.x / grid_size;
        const int row = e.y / grid_size;
        ++hm.counts[static_cast<std::size_t>(row) * hm.cols + col];
    }
    return hm;
}

std::vector<Vec2> init_centroids(const Heatmap& hm, int k, double epsilon) {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must be in (0, 1)");

    std::int64_t h = 0;
    for (std::int64_t c : hm.counts) h = std::max(h, c);

    struct Cell {
        int col, row;
        Vec2 center;
    };
    // Row-major collection keeps the (row, col) tie order implicit.
    std::vector<Cell> candidates;
    const double threshold = epsilon * static_cast<double>(h);
    for (int row = 0; row < hm.rows; ++row) {
        for (int col = 0; col < hm.cols; ++col) {
            if (static_cast<double>(hm.at(col, row)) > threshold)
                candidates.push_back(Cell{col, row, hm.cell_center(col, row)});
        }
    }
    if (h <= 0 || static_cast<int>(candidates.size()) < k)
        throw InsufficientCandidates("need " + std::to_string(k) + " seed cells, found " +
                                     std::to_string(h <= 0 ? 0 : candidates.size()));

    std::vector<bool> used(candidates.size(), false);
    std::vector<Vec2> chosen;
    chosen.reserve(k);

    std::size_t first = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (hm.at(candidates[i].col, candidates[i].row) >
            hm.at(candidates[first].col, candidates[first].row))
            first = i;
    }
    used[first] = true;
    chosen.push_back(candidates[first].center);

    while (static_cast<int>(chosen.size()) < k) {
        double best_mean = -1.0;
        std::size_t best = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            double sum = 0.0;
            for (const Vec2& c : chosen) sum += std::sqrt(dist2(candidates[i].center, c));
            const double mean = sum / static_cast<double>(chosen.size());
            if (mean > best_mean) {
                best_mean = mean;
                best = i;
            }
        }
        used[best] = true;
        chosen.push_back(candidates[best].center);
    }
    return chosen;
}

ClusterResult kmeans(const EventSlice& s, const std::vector<Vec2>& init) {
    if (s.events.empty()) throw EmptyInput("kmeans: empty slice");
    if (init.empty()) throw ValidationError("kmeans: empty initialization");

    LloydResult lr = lloyd2d(event_points(s), init);
    ClusterResult r;
    r.k = static_cast<int>(lr.centroids.size());
    r.centroids = std::move(lr.centroids);
    r.assignment = std::move(lr.assignment);
    r.iterations = lr.iterations;
    r.wcss_trace = std::move(lr.wcss_trace);
    r.dbi = r.k >= 2 ? dbi(r, s) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

double dbi_points(const std::vector<Vec2>& pts, const std::vector<int>& assignment,
                  const std::vector<Vec2>& centroids) {
    const int k = static_cast<int>(centroids.size());
    if (k < 2) throw Undefined("DBI undefined for k < 2");

    std::vector<double> disp(k, 0.0);
    std::vector<std::int64_t> cnt(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int j = assignment[i];
        disp[j] += std::sqrt(dist2(pts[i], centroids[j]));
        ++cnt[j];
    }
    for (int j = 0; j < k; ++j) {
        if (cnt[j] == 0) throw Undefined("DBI undefined with an empty cluster");
        disp[j] /= static_cast<double>(cnt[j]);
    }

    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        double worst = 0.0;
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double sep = std::sqrt(dist2(centroids[i], centroids[j]));
            const double sim = (disp[i] + disp[j]) / sep;
            worst = std::max(worst, sim);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double dbi(const ClusterResult& r, const EventSlice& s) {
    return dbi_points(event_points(s), r.assignment, r.centroids);
}

ClusterResult select_k(const EventSlice& s, const SelectKParams& params) {
    if (s.events.empty()) throw ExtractionFailed("select_k: empty slice");
    if (params.k_min < 2 || params.k_max < params.k_min)
        throw ValidationError("select_k: need 2 <= k_min <= k_max");

    const Heatmap hm = build_heatmap(s, params.grid_size);

    bool have_best = false;
    ClusterResult best;
    for (int k = params.k_min; k <= params.k_max; ++k) {
        std::vector<Vec2> seeds;
        try {
            seeds = init_centroids(hm, k, params.epsilon);
        } catch (const InsufficientCandidates&) {
            continue;
        }
        ClusterResult r = kmeans(s, seeds);
        if (r.k < 2) continue; // collapsed to a single cluster; not a multi-target candidate
        if (!have_best || r.dbi < best.dbi || (r.dbi == best.dbi && r.k < best.k)) {
            best = std::move(r);
            have_best = true;
        }
    }

    if (have_best && best.dbi <= params.single_target_dbi) return best;

    // Either every multi-cluster candidate overlaps heavily or none could be
    // seeded: treat the scene as a single target.
    return kmeans(s, init_centroids(hm, 1, params.epsilon));
}

double median(std::vector<double> values) {
    if (values.empty()) throw EmptyInput("median of empty set");
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return (lower + upper) / 2.0;
}

std::vector<Event> remove_outliers(const std::vector<Event>& cluster, const Vec2& centroid) {
    if (cluster.empty()) throw EmptyInput("remove_outliers: empty cluster");
    std::vector<double> dist;
    dist.reserve(cluster.size());
    for (const Event& e : cluster) {
        dist.push_back(std::sqrt(dist2(Vec2{static_cast<double>(e.x), static_cast<double>(e.y)},
                                       centroid)));
    }
    const double d_m = median(dist);
    std::vector<Event> kept;
    kept.reserve(cluster.size());
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        if (dist[i] <= 3.0 * d_m) kept.push_back(cluster[i]);
    }
    return kept;
}

namespace {

std::vector<Vec2> kmeanspp_seeds(const std::vector<Vec2>& pts, int k, std::mt19937_64& rng) {
    std::vector<Vec2> seeds;
    seeds.push_back(pts[uniform_index(rng, pts.size())]);
    std::vector<double> d2(pts.size());
    while (static_cast<int>(seeds.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double bd = dist2(pts[i], seeds[0]);
            for (std::size_t j = 1; j < seeds.size(); ++j)
                bd = std::min(bd, dist2(pts[i], seeds[j]));
            d2[i] = bd;
            total += bd;
        }
        if (total <= 0.0) break; // all remaining points coincide with a seed
        double r = uniform01(rng) * total;
        std::size_t pick = pts.size() - 1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        seeds.push_back(pts[pick]);
    }
    return seeds;
}

} // namespace

SymmetryInfo symmetry_angle(const std::vector<Event>& cluster, int n_events, std::uint64_t seed) {
    if (n_events < 1) throw ValidationError("symmetry_angle: n_events must be >= 1");
    if (static_cast<int>(cluster.size()) < n_events)
        throw SymmetryUndetermined("need " + std::to_string(n_events) + " events, have " +
                                   std::to_string(cluster.size()));

    std::vector<Vec2> pts;
    pts.reserve(n_events);
    for (int i = 0; i < n_events; ++i)
        pts.push_back(Vec2{static_cast<double>(cluster[i].x), static_cast<double>(cluster[i].y)});

    constexpr int kRestarts = 3;
    constexpr double kTwoPi = 6.283185307179586476925287;

    bool have_best = false;
    double best_dbi = std::numeric_limits<double>::infinity();
    std::vector<Vec2> best_centroids;
    for (int b = 2; b <= 6; ++b) {
        for (int restart = 0; restart < kRestarts; ++restart) {
            auto rng = seeded_engine(seed, static_cast<std::uint64_t>(b) * 16 + restart);
            const std::vector<Vec2> seeds = kmeanspp_seeds(pts, b, rng);
            if (static_cast<int>(seeds.size()) < 2) continue;
            const LloydResult lr = lloyd2d(pts, seeds);
            if (static_cast<int>(lr.centroids.size()) < 2) continue;
            const double score = dbi_points(pts, lr.assignment, lr.centroids);
            if (!have_best || score < best_dbi ||
                (score == best_dbi && lr.centroids.size() < best_centroids.size())) {
                best_dbi = score;
                best_centroids = lr.centroids;
                have_best = true;
            }
        }
    }

    SymmetryInfo info;
    info.n_repeats = 1;
    if (have_best && best_dbi <= 1.0) {
        // The repeated features are the blades, which radiate from the
        // rotation center in distinct directions. Clusters of the winning
        // partition that sit on the hub (tiny radius) or share a direction
        // with another cluster (radial splits of one blade) are not
        // additional repeats. The rotation center is the mean of the whole
        // cluster: the blades sweep it uniformly over the capture.
        Vec2 center{0.0, 0.0};
        for (const Event& e : cluster) {
            center.x += e.x;
            center.y += e.y;
        }
        center.x /= static_cast<double>(cluster.size());
        center.y /= static_cast<double>(cluster.size());

        std::vector<double> radii;
        radii.reserve(best_centroids.size());
        for (const Vec2& c : best_centroids) radii.push_back(std::sqrt(dist2(c, center)));
        const double typical = median(radii);

        std::vector<double> angles;
        for (std::size_t i = 0; i < best_centroids.size(); ++i) {
            if (radii[i] < 0.4 * typical) continue; // hub cluster
            angles.push_back(
                std::atan2(best_centroids[i].y - center.y, best_centroids[i].x - center.x));
        }
        std::sort(angles.begin(), angles.end());
        constexpr double kSameDirection = 0.52; // ~30 degrees
        int repeats = 0;
        for (std::size_t i = 0; i < angles.size(); ++i) {
            if (i == 0 || angles[i] - angles[i - 1] > kSameDirection) ++repeats;
        }
        if (repeats > 1 && (angles.front() + kTwoPi) - angles.back() <= kSameDirection)
            --repeats; // first and last group wrap around
        info.n_repeats = std::max(1, repeats);
    }
    info.theta_c = kTwoPi / static_cast<double>(info.n_repeats);
    return info;
}

} // namespace evtach::extract
