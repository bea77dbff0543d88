#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "emomap/reduction.hpp"

namespace emomap {

/// Portable random stream: std::mt19937_64 (sequence fixed by the standard)
/// with doubles formed from the top 53 bits, so a seed reproduces the same
/// draws on every conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 eng_;
};

struct KMeansOptions {
    std::uint64_t seed = 42;
    int restarts = 10;
    int max_iterations = 300;
    /// Stop when no center moves farther than this (Euclidean).
    double tolerance = 1e-4;
};

struct ClusterModel {
    std::vector<Point3> centers;  // k
    std::vector<int> labels;      // n, each in [0, k)
    double inertia = 0.0;
    std::uint64_t seed = 0;
    int restarts = 0;
    int best_restart = 0;
    int iterations = 0;                   // Lloyd iterations of the best restart
    std::vector<double> restart_inertia;  // final inertia of each restart
    /// Inertia after each assignment step of the best restart.
    std::vector<double> inertia_trace;

    std::size_t k() const { return centers.size(); }
};

/// Index of the nearest center; ties go to the lowest index.
int nearest_center(const Point3& p, std::span<const Point3> centers);

double squared_distance(const Point3& a, const Point3& b);

/// Sum of squared distances from each point to its labelled center.
double compute_inertia(std::span<const Point3> points, std::span<const Point3> centers, std::span<const int> labels);

/// k-means++ seeding (one draw per center, probability proportional to the
/// squared distance to the nearest chosen center).
std::vector<Point3> kmeanspp_init(std::span<const Point3> points, std::size_t k, Rng& rng);

/// Seeded, restarted k-means with k = min(n_regions, n). Per-restart seeds
/// are drawn up front from Rng(seed); the restart with the lowest inertia
/// wins (ties: lowest restart index). An emptied cluster is reseeded at the
/// point farthest from its current center. Final labels are the argmin
/// distance to the returned centers.
///
/// Throws ValidationError for n = 0, n_regions = 0, restarts < 1 or
/// non-finite points.
ClusterModel cluster(std::span<const Point3> points, std::size_t n_regions, const KMeansOptions& opts = {});

}  // namespace emomap
