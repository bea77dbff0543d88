#include "emomap/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "emomap/error.hpp"

namespace emomap {

namespace {

struct RestartResult {
    std::vector<Point3> centers;
    std::vector<int> labels;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> trace;
};

void assign_all(std::span<const Point3> points, std::span<const Point3> centers, std::vector<int>& labels) {
    for (std::size_t i = 0; i < points.size(); ++i) labels[i] = nearest_center(points[i], centers);
}

RestartResult run_restart(std::span<const Point3> points, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& opts) {
    const std::size_t n = points.size();
    Rng rng(seed);
    RestartResult r;
    r.centers = kmeanspp_init(points, k, rng);
    r.labels.assign(n, 0);
    assign_all(points, r.centers, r.labels);
    r.trace.push_back(compute_inertia(points, r.centers, r.labels));

    std::vector<Point3> sums(k);
    std::vector<std::size_t> counts(k);
    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        std::fill(sums.begin(), sums.end(), Point3{0, 0, 0});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(r.labels[i]);
            for (int a = 0; a < 3; ++a) sums[c][a] += points[i][a];
            ++counts[c];
        }
        std::vector<Point3> next(k);
        std::vector<std::size_t> empty;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                next[c] = r.centers[c];
                empty.push_back(c);
                continue;
            }
            for (int a = 0; a < 3; ++a) next[c][a] = sums[c][a] / static_cast<double>(counts[c]);
        }

        if (!empty.empty()) {
            // farthest points from their own (updated) centers, largest first
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::vector<double> dist(n);
            for (std::size_t i = 0; i < n; ++i) {
                dist[i] = squared_distance(points[i], next[static_cast<std::size_t>(r.labels[i])]);
            }
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
            std::size_t pos = 0;
            for (auto c : empty) {
                while (pos < n && counts[static_cast<std::size_t>(r.labels[order[pos]])] <= 1) ++pos;
                if (pos == n) break;  // fewer distinct owners than clusters
                const auto i = order[pos++];
                --counts[static_cast<std::size_t>(r.labels[i])];
                r.labels[i] = static_cast<int>(c);
                counts[c] = 1;
                next[c] = points[i];
            }
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next[c], r.centers[c])));
        r.centers = std::move(next);
        assign_all(points, r.centers, r.labels);
        r.trace.push_back(compute_inertia(points, r.centers, r.labels));
        r.iterations = iter;
        if (shift < opts.tolerance) break;
    }
    r.inertia = r.trace.back();
    return r;
}

}  // namespace

double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

int nearest_center(const Point3& p, std::span<const Point3> centers) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = squared_distance(p, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

double compute_inertia(std::span<const Point3> points, std::span<const Point3> centers, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        total += squared_distance(points[i], centers[static_cast<std::size_t>(labels[i])]);
    }
    return total;
}

std::vector<Point3> kmeanspp_init(std::span<const Point3> points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<Point3> centers;
    centers.reserve(k);
    std::vector<bool> chosen(n, false);

    auto first = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    centers.push_back(points[first]);
    chosen[first] = true;

    std::vector<double> mind(n);
    for (std::size_t i = 0; i < n; ++i) mind[i] = squared_distance(points[i], centers[0]);

    while (centers.size() < k) {
        const double total = std::accumulate(mind.begin(), mind.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (mind[i] <= 0.0) continue;
                last_positive = i;
                cum += mind[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = last_positive;
        } else {
            // only duplicates of chosen centers remain
            rng.uniform();
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                if (!chosen[i]) pick = i;
            }
            if (pick == n) pick = 0;
        }
        chosen[pick] = true;
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) mind[i] = std::min(mind[i], squared_distance(points[i], points[pick]));
    }
    return centers;
}

ClusterModel cluster(std::span<const Point3> points, std::size_t n_regions, const KMeansOptions& opts) {
    if (points.empty()) throw ValidationError("cluster: no points");
    if (n_regions == 0) throw ValidationError("cluster: n_regions must be >= 1");
    if (opts.restarts < 1) throw ValidationError("cluster: restarts must be >= 1");
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (double x : points[i]) {
            if (!std::isfinite(x)) throw ValidationError("cluster: non-finite coordinate in point " + std::to_string(i));
        }
    }

    const std::size_t k = std::min(n_regions, points.size());
    Rng master(opts.seed);
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(opts.restarts));
    for (auto& s : seeds) s = master.next_u64();

    ClusterModel model;
    model.seed = opts.seed;
    model.restarts = opts.restarts;
    RestartResult best;
    for (int r = 0; r < opts.restarts; ++r) {
        auto res = run_restart(points, k, seeds[static_cast<std::size_t>(r)], opts);
        model.restart_inertia.push_back(res.inertia);
        if (r == 0 || res.inertia < best.inertia) {
            best = std::move(res);
            model.best_restart = r;
        }
    }

    model.centers = std::move(best.centers);
    model.labels.assign(points.size(), 0);
    assign_all(points, model.centers, model.labels);
    model.inertia = compute_inertia(points, model.centers, model.labels);
    model.iterations = best.iterations;
    model.inertia_trace = std::move(best.trace);
    return model;
}

}  // namespace emomap
