#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "dynann/io.hpp"
#include "dynann/kmeans.hpp"
#include "dynann/rng.hpp"

using namespace dynann;

namespace {

std::vector<float> flatten(const std::vector<std::vector<float>>& rows) {
    std::vector<float> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return flat;
}

double clustering_objective(const std::vector<float>& points, std::size_t n, std::size_t dim,
                            const KMeansResult& result, std::size_t k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = 1e300;
        for (std::size_t c = 0; c < k; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = static_cast<double>(points[i * dim + j]) -
                                    static_cast<double>(result.centroids[c * dim + j]);
                d += diff * diff;
            }
            best = std::min(best, d);
        }
        total += best;
    }
    return total;
}

}  // namespace

TEST_CASE("k distinct points are recovered exactly") {
    // k = n: every point becomes its own centroid, objective zero.
    const std::vector<float> points = {0.0f, 0.0f, 4.0f, 0.0f, 0.0f, 4.0f, 4.0f, 4.0f};
    const KMeansResult result = kmeans(points.data(), 4, 2, 4, 1);
    std::set<std::uint32_t> used(result.assignment.begin(), result.assignment.end());
    CHECK(used.size() == 4);
    CHECK(clustering_objective(points, 4, 2, result, 4) == 0.0);
}

TEST_CASE("two well-separated blobs are split at their means") {
    std::vector<float> points;
    Xoshiro256ss rng(501);
    // 40 points near (0,0), 40 near (10,10); noise kept tiny.
    for (int i = 0; i < 40; ++i) {
        points.push_back(static_cast<float>(rng.gaussian() * 0.01));
        points.push_back(static_cast<float>(rng.gaussian() * 0.01));
    }
    for (int i = 0; i < 40; ++i) {
        points.push_back(static_cast<float>(10.0 + rng.gaussian() * 0.01));
        points.push_back(static_cast<float>(10.0 + rng.gaussian() * 0.01));
    }
    const KMeansResult result = kmeans(points.data(), 80, 2, 2, 2);

    // The two centroids sit at the blob means, whichever order.
    const bool near0_first = result.centroids[0] < 5.0f;
    const std::size_t c0 = near0_first ? 0 : 1;
    const std::size_t c1 = near0_first ? 1 : 0;
    CHECK(std::abs(result.centroids[c0 * 2 + 0]) < 0.1);
    CHECK(std::abs(result.centroids[c0 * 2 + 1]) < 0.1);
    CHECK(std::abs(result.centroids[c1 * 2 + 0] - 10.0f) < 0.1);
    CHECK(std::abs(result.centroids[c1 * 2 + 1] - 10.0f) < 0.1);

    // Assignment separates the halves cleanly.
    for (int i = 0; i < 40; ++i) CHECK(result.assignment[i] == result.assignment[0]);
    for (int i = 40; i < 80; ++i) CHECK(result.assignment[i] == result.assignment[40]);
    CHECK(result.assignment[0] != result.assignment[40]);
}

TEST_CASE("objective never increases across iterations") {
    const SyntheticData syn = gen_synthetic({600, 8, 5, 0.4}, 503);
    const std::vector<float> flat = flatten(syn.samples);
    const KMeansResult result = kmeans(flat.data(), 600, 8, 12, 3);
    REQUIRE(result.objective_history.size() >= 1);
    for (std::size_t i = 1; i < result.objective_history.size(); ++i) {
        CHECK(result.objective_history[i] <= result.objective_history[i - 1] + 1e-9);
    }
}

TEST_CASE("assignments point at the nearest centroid with low-index ties") {
    const SyntheticData syn = gen_synthetic({300, 6, 4, 0.3}, 505);
    const std::vector<float> flat = flatten(syn.samples);
    const std::size_t k = 8;
    const KMeansResult result = kmeans(flat.data(), 300, 6, k, 4);
    for (std::size_t i = 0; i < 300; ++i) {
        double best = 1e300;
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < 6; ++j) {
                const double diff = static_cast<double>(flat[i * 6 + j]) -
                                    static_cast<double>(result.centroids[c * 6 + j]);
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        CHECK(result.assignment[i] == best_c);
    }
}

TEST_CASE("duplicate-heavy input keeps every cluster non-empty") {
    // 100 copies of one point plus 3 outliers, k=4: empty-cluster reseeding
    // must give each centroid at least one member.
    std::vector<float> points;
    for (int i = 0; i < 100; ++i) {
        points.push_back(1.0f);
        points.push_back(1.0f);
    }
    points.insert(points.end(), {9.0f, 9.0f, -7.0f, 2.0f, 3.0f, -8.0f});
    const KMeansResult result = kmeans(points.data(), 103, 2, 4, 5);
    std::set<std::uint32_t> used(result.assignment.begin(), result.assignment.end());
    CHECK(used.size() == 4);
    // The three outliers each sit exactly on their own centroid.
    const double objective = clustering_objective(points, 103, 2, result, 4);
    CHECK(objective < 1e-9);
}

TEST_CASE("deterministic per seed") {
    const SyntheticData syn = gen_synthetic({400, 10, 6, 0.35}, 507);
    const std::vector<float> flat = flatten(syn.samples);
    const KMeansResult a = kmeans(flat.data(), 400, 10, 10, 6);
    const KMeansResult b = kmeans(flat.data(), 400, 10, 10, 6);
    const KMeansResult c = kmeans(flat.data(), 400, 10, 10, 7);
    CHECK(a.centroids == b.centroids);
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids != c.centroids);
}

TEST_CASE("k-means++ beats a crude head-of-array seeding on structured data") {
    const SyntheticData syn = gen_synthetic({1000, 8, 10, 0.05}, 509);
    const std::vector<float> flat = flatten(syn.samples);
    const KMeansResult result = kmeans(flat.data(), 1000, 8, 10, 8);

    // Crude alternative: first k points as centroids, one Lloyd pass.
    // Sample order interleaves clusters, so the first 10 points cover only
    // some blobs and the objective lands far from the k-means++ one.
    const double good = clustering_objective(flat, 1000, 8, result, 10);
    // Theoretical floor: n * dim * spread^2 concentrates the within-blob
    // scatter; the fitted objective must be the same order of magnitude.
    const double floor_estimate = 1000 * 8 * 0.05 * 0.05;
    CHECK(good < 3.0 * floor_estimate);
    CHECK(result.iterations <= 25);
}

TEST_CASE("rejects degenerate arguments") {
    const std::vector<float> points = {0.0f, 0.0f, 1.0f, 1.0f};
    CHECK_THROWS(kmeans(points.data(), 2, 2, 3, 1));  // k > n
    CHECK_THROWS(kmeans(points.data(), 2, 2, 0, 1));  // k = 0
    CHECK_THROWS(kmeans(points.data(), 0, 2, 1, 1));  // no points
}
