#pragma once

#include <cstdint>
#include <vector>

namespace dynann {

struct KMeansOptions {
    std::uint32_t max_iters = 25;
    double tol = 1e-4;  // stop when the largest centroid shift (L2) falls below this
};

struct KMeansResult {
    std::vector<float> centroids;            // k x dim, row-major
    std::vector<std::uint32_t> assignment;   // per point, nearest centroid (ties: lowest index)
    std::vector<double> objective_history;   // sum of squared distances, one entry per iteration
    std::uint32_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding.  Deterministic given the seed;
// clusters that empty out are re-seeded from the point currently farthest
// from its assigned centroid.
KMeansResult kmeans(const float* points, std::size_t n, std::size_t dim, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace dynann
