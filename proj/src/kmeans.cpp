#include "dynann/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dynann/core.hpp"
#include "dynann/rng.hpp"

namespace dynann {
namespace {

std::uint32_t nearest_centroid(const float* point, const std::vector<float>& centroids,
                               std::size_t k, std::size_t dim, double* out_dist) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(point, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(c);
        }
    }
    if (out_dist != nullptr) *out_dist = best_d;
    return best;
}

}  // namespace

KMeansResult kmeans(const float* points, std::size_t n, std::size_t dim, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (n < k) {
        throw std::invalid_argument("kmeans: need at least k points (" + std::to_string(n) +
                                    " < " + std::to_string(k) + ")");
    }

    Xoshiro256ss rng(seed);
    KMeansResult result;
    result.centroids.resize(k * dim);

    // k-means++ seeding: first centroid uniform, then proportional to the
    // squared distance from the nearest chosen centroid.
    std::vector<double> d2(n);
    {
        const std::size_t first = static_cast<std::size_t>(rng.below(n));
        std::copy(points + first * dim, points + (first + 1) * dim, result.centroids.begin());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = squared_distance(points + i * dim, result.centroids.data(), dim);
            total += d2[i];
        }
        for (std::size_t c = 1; c < k; ++c) {
            std::size_t pick = 0;
            if (total > 0.0) {
                const double r = rng.uniform_open0() * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= r) {
                        pick = i;
                        break;
                    }
                }
            } else {
                // All remaining mass is zero (heavily duplicated data); take
                // the next index in order for determinism.
                pick = c % n;
            }
            std::copy(points + pick * dim, points + (pick + 1) * dim,
                      result.centroids.begin() + c * dim);
            total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(points + i * dim, result.centroids.data() + c * dim, dim);
                if (d < d2[i]) d2[i] = d;
                total += d2[i];
            }
        }
    }

    result.assignment.assign(n, 0);
    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    std::vector<float> previous(k * dim);

    for (std::uint32_t iter = 0; iter < options.max_iters; ++iter) {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            result.assignment[i] = nearest_centroid(points + i * dim, result.centroids, k, dim, &d);
            objective += d;
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;

        previous = result.centroids;
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = result.assignment[i];
            ++counts[c];
            for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += points[i * dim + j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < dim; ++j) {
                result.centroids[c * dim + j] =
                    static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
            }
        }

        // Re-seed each empty cluster from the point farthest from its
        // assigned centroid, one at a time so successive empties take
        // successively nearer points.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(
                    points + i * dim, result.centroids.data() + result.assignment[i] * dim, dim);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            std::copy(points + worst_i * dim, points + (worst_i + 1) * dim,
                      result.centroids.begin() + c * dim);
            counts[result.assignment[worst_i]] -= 1;
            result.assignment[worst_i] = static_cast<std::uint32_t>(c);
            counts[c] = 1;
        }

        double shift_sq = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift_sq = std::max(shift_sq, squared_distance(result.centroids.data() + c * dim,
                                                           previous.data() + c * dim, dim));
        }
        if (std::sqrt(shift_sq) < options.tol) break;
    }

    // Leave assignments consistent with the final centroids.
    for (std::size_t i = 0; i < n; ++i) {
        result.assignment[i] = nearest_centroid(points + i * dim, result.centroids, k, dim, nullptr);
    }
    return result;
}

}  // namespace dynann
