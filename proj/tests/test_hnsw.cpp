#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dynann/baseline.hpp"
#include "dynann/hnsw.hpp"
#include "dynann/io.hpp"
#include "dynann/rng.hpp"

using namespace dynann;

namespace {

DatasetStore make_store(const std::vector<std::vector<float>>& samples) {
    DatasetStore store(samples.front().size());
    for (const auto& s : samples) store.add(s);
    return store;
}

std::vector<std::vector<float>> make_queries(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    std::vector<std::vector<float>> queries(n, std::vector<float>(dim));
    for (auto& q : queries) {
        for (auto& x : q) x = static_cast<float>(rng.uniform());
    }
    return queries;
}

double mean_recall_against_exact(const DatasetStore& store, Hnsw& index,
                                 const std::vector<std::vector<float>>& queries, std::size_t k) {
    double total = 0.0;
    for (const auto& q : queries) {
        const NeighbourList got = index.search(q, k);
        const NeighbourList want = exact_knn(store, q, k);
        std::size_t hits = 0;
        for (const Neighbour& g : got) {
            for (const Neighbour& w : want) hits += g.id == w.id;
        }
        total += static_cast<double>(hits) / static_cast<double>(want.size());
    }
    return total / static_cast<double>(queries.size());
}

}  // namespace

TEST_CASE("assign_level floors the exponential transform") {
    const double mL = 1.0 / std::log(16.0);
    CHECK(assign_level(1.0, mL) == 0);
    CHECK(assign_level(0.5, mL) == 0);                  // -ln(0.5)/ln(16) ~ 0.25
    CHECK(assign_level(1.0 / 16.0 + 1e-12, mL) == 0);   // just under the level-1 cut
    CHECK(assign_level(1.0 / 16.0 - 1e-12, mL) == 1);   // just past it
    CHECK(assign_level(1.0 / 256.0 - 1e-13, mL) == 2);
    CHECK(assign_level(0.3, 0.0) == 0);  // mL = 0 pins everything to the ground layer
    CHECK_THROWS(assign_level(0.0, mL));
    CHECK_THROWS(assign_level(-0.1, mL));
    CHECK_THROWS(assign_level(1.5, mL));
}

TEST_CASE("level distribution follows the geometric law") {
    const double mL = 1.0 / std::log(16.0);
    Xoshiro256ss rng(601);
    const int draws = 100000;
    int at_least_1 = 0, at_least_2 = 0;
    for (int i = 0; i < draws; ++i) {
        const int level = assign_level(rng.uniform_open0(), mL);
        at_least_1 += level >= 1;
        at_least_2 += level >= 2;
    }
    CHECK(std::abs(at_least_1 / static_cast<double>(draws) - 1.0 / 16.0) < 0.01);
    CHECK(std::abs(at_least_2 / static_cast<double>(draws) - 1.0 / 256.0) < 0.01);
}

TEST_CASE("neighbour heuristic: diversity pruning on worked examples") {
    std::vector<std::vector<float>> pts = {{0.0f}, {1.0f}, {2.0f}, {10.0f}};
    const DatasetStore store = make_store(pts);
    const std::vector<float> base = {0.0f};

    SUBCASE("one candidate is always admitted") {
        const NeighbourList got = select_neighbours_heuristic(store, base, {{1, 1.0}}, 2);
        REQUIRE(got.size() == 1);
        CHECK(got[0].id == 1);
    }

    SUBCASE("collinear chain keeps only the closest") {
        // [2] is closer to admitted [1] than to the base; so is [10].
        const NeighbourList candidates = {{1, 1.0}, {2, 4.0}, {3, 100.0}};
        const NeighbourList got = select_neighbours_heuristic(store, base, candidates, 2);
        REQUIRE(got.size() == 1);
        CHECK(got[0].id == 1);
    }
}

TEST_CASE("neighbour heuristic: spread-out candidates fill up to the cap") {
    // Two opposite directions both clear the diversity check.
    std::vector<std::vector<float>> pts = {{0.0f, 0.0f}, {1.0f, 0.0f}, {-1.0f, 0.1f}};
    const DatasetStore store = make_store(pts);
    const std::vector<float> base = {0.0f, 0.0f};
    const NeighbourList candidates = {{1, 1.0}, {2, 1.01}};
    const NeighbourList got = select_neighbours_heuristic(store, base, candidates, 2);
    REQUIRE(got.size() == 2);
    CHECK(got[0].id == 1);
    CHECK(got[1].id == 2);
}

TEST_CASE("neighbour heuristic properties over random inputs") {
    const SyntheticData syn = gen_synthetic({200, 6, 4, 0.3}, 603);
    const DatasetStore store = make_store(syn.samples);
    Xoshiro256ss rng(604);
    for (int trial = 0; trial < 40; ++trial) {
        const VectorId base_id = rng.below(200);
        const std::span<const float> base = store.vector(base_id);
        NeighbourList candidates;
        const std::size_t n_cand = 1 + rng.below(30);
        for (std::size_t i = 0; i < n_cand; ++i) {
            VectorId id = rng.below(200);
            while (id == base_id) id = rng.below(200);
            candidates.push_back({id, squared_distance(base, store.vector(id))});
        }
        sort_canonical(candidates);
        const std::size_t cap = 1 + rng.below(8);
        const NeighbourList got = select_neighbours_heuristic(store, base, candidates, cap);
        REQUIRE(!got.empty());
        CHECK(got.size() <= cap);
        CHECK(got[0].id == candidates[0].id);  // nearest candidate always admitted
        for (const Neighbour& g : got) {
            bool in_input = false;
            for (const Neighbour& c : candidates) in_input = in_input || c.id == g.id;
            CHECK(in_input);
        }
    }
}

TEST_CASE("search_layer on a single node returns that node") {
    const DatasetStore store = make_store({{0.5f, 0.5f}});
    VisitedSet visited;
    const std::vector<VectorId> entries = {0};
    const std::vector<float> query = {0.0f, 0.0f};
    auto no_links = [](VectorId, std::size_t) { return std::vector<VectorId>{}; };
    const NeighbourList got = search_layer(store, query, entries, 4, 0, no_links, visited);
    REQUIRE(got.size() == 1);
    CHECK(got[0].id == 0);
}

TEST_CASE("search_layer on a complete graph equals exact search") {
    const SyntheticData syn = gen_synthetic({50, 4, 2, 0.3}, 605);
    const DatasetStore store = make_store(syn.samples);
    std::vector<VectorId> everyone(50);
    for (VectorId id = 0; id < 50; ++id) everyone[id] = id;
    auto complete = [&](VectorId id, std::size_t) {
        std::vector<VectorId> links;
        for (VectorId other : everyone) {
            if (other != id) links.push_back(other);
        }
        return links;
    };
    VisitedSet visited;
    const std::vector<VectorId> entries = {7};
    for (const auto& q : make_queries(10, 4, 606)) {
        for (std::size_t k : {1UL, 5UL, 10UL}) {
            const std::size_t ef = k + 5;
            NeighbourList got = search_layer(store, q, entries, ef, 0, complete, visited);
            if (got.size() > k) got.resize(k);
            const NeighbourList want = exact_knn(store, q, k);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == want[i].id);
        }
    }
}

TEST_CASE("first insert becomes the entry point with no edges") {
    DatasetStore store(4);
    Hnsw index({8, 32, 0, 0.0}, 607);
    index.build(store);
    index.insert(store.add(std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}));
    CHECK(index.entry_point() == 0);
    CHECK(index.node_links(0, 0).empty());
    const NeighbourList got = index.search(std::vector<float>{0.0f, 0.0f, 0.0f, 0.0f}, 3);
    REQUIRE(got.size() == 1);
    CHECK(got[0].id == 0);
}

TEST_CASE("second insert links both nodes on layer 0") {
    DatasetStore store(2);
    Hnsw index({8, 32, 0, 0.0}, 609);
    index.build(store);
    index.insert(store.add(std::vector<float>{0.0f, 0.0f}));
    index.insert(store.add(std::vector<float>{1.0f, 1.0f}));
    REQUIRE(index.node_links(0, 0).size() == 1);
    REQUIRE(index.node_links(1, 0).size() == 1);
    CHECK(index.node_links(0, 0)[0] == 1);
    CHECK(index.node_links(1, 0)[0] == 0);
}

TEST_CASE("2000 seeded inserts satisfy degree bounds and connectivity") {
    const SyntheticData syn = gen_synthetic({2000, 12, 8, 0.3}, 611);
    DatasetStore store(12);
    Hnsw index({12, 80, 0, 0.0}, 612);
    index.build(store);
    for (const auto& s : syn.samples) index.insert(store.add(s));

    const AuditReport report = index.audit();
    CHECK(report.violations == 0);

    const HnswStats stats = index.stats();
    CHECK(stats.top_level >= 1);  // 2000 nodes with mL=1/ln 12 reach past layer 0
    for (const auto& [degree, count] : stats.layer0_degree_histogram) {
        CHECK(degree <= 24);  // M_max0 = 2M
        (void)count;
    }

    Hnsw wide({12, 80, 400, 0.0}, 612);
    wide.build(store);
    CHECK(mean_recall_against_exact(store, wide, make_queries(30, 12, 613), 10) > 0.95);
}

TEST_CASE("build equals insert-by-insert construction") {
    const SyntheticData syn = gen_synthetic({300, 8, 4, 0.25}, 615);
    DatasetStore store = make_store(syn.samples);
    Hnsw built({8, 60, 50, 0.0}, 616);
    built.build(store);

    DatasetStore grown(8);
    Hnsw incremental({8, 60, 50, 0.0}, 616);
    incremental.build(grown);
    for (const auto& s : syn.samples) incremental.insert(grown.add(s));

    for (const auto& q : make_queries(20, 8, 617)) {
        const NeighbourList a = built.search(q, 10);
        const NeighbourList b = incremental.search(q, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    }
}

TEST_CASE("update in a 1-node graph only rewrites the vector") {
    DatasetStore store(2);
    Hnsw index({8, 32, 0, 0.0}, 619);
    index.build(store);
    index.insert(store.add(std::vector<float>{0.0f, 0.0f}));
    store.overwrite(0, std::vector<float>{5.0f, 5.0f});
    index.update(0);
    CHECK(index.entry_point() == 0);
    CHECK(index.node_links(0, 0).empty());
    const NeighbourList got = index.search(std::vector<float>{5.0f, 5.0f}, 1);
    CHECK(got[0].distance_sq == 0.0);
}

TEST_CASE("degree bounds hold after each single update") {
    const SyntheticData syn = gen_synthetic({400, 8, 4, 0.3}, 621);
    DatasetStore store = make_store(syn.samples);
    Hnsw index({8, 60, 0, 0.0}, 622);
    index.build(store);
    Xoshiro256ss rng(623);
    for (int e = 0; e < 50; ++e) {
        const VectorId id = rng.below(400);
        std::vector<float> moved(8);
        for (auto& x : moved) x = static_cast<float>(rng.uniform());
        store.overwrite(id, moved);
        index.update(id);
        const HnswStats stats = index.stats();
        for (const auto& [degree, count] : stats.layer0_degree_histogram) {
            CHECK(degree <= 16);
            (void)count;
        }
    }
}

TEST_CASE("heavy updates with maintenance stay connected and near rebuild quality") {
    const SyntheticData syn = gen_synthetic({1000, 8, 6, 0.3}, 625);
    DatasetStore store = make_store(syn.samples);
    Hnsw index({12, 80, 200, 0.0}, 626);
    index.build(store);

    Xoshiro256ss rng(627);
    for (int e = 0; e < 4000; ++e) {
        const VectorId id = rng.below(1000);
        std::vector<float> moved(8);
        for (auto& x : moved) x = static_cast<float>(rng.uniform());
        store.overwrite(id, moved);
        index.update(id);
        if ((e + 1) % 200 == 0) index.maintain();
    }
    index.maintain();
    CHECK(index.audit().violations == 0);

    Hnsw rebuilt({12, 80, 200, 0.0}, 626);
    rebuilt.build(store);
    const auto queries = make_queries(100, 8, 628);
    const double updated_recall = mean_recall_against_exact(store, index, queries, 10);
    const double rebuilt_recall = mean_recall_against_exact(store, rebuilt, queries, 10);
    CHECK(std::abs(updated_recall - rebuilt_recall) < 0.05);
}

TEST_CASE("insert-only maintenance is a no-op") {
    const SyntheticData syn = gen_synthetic({200, 6, 2, 0.3}, 629);
    DatasetStore store(6);
    Hnsw index({8, 40, 0, 0.0}, 630);
    index.build(store);
    for (const auto& s : syn.samples) index.insert(store.add(s));
    CHECK(!index.maintain());
}

TEST_CASE("misuse is rejected") {
    Hnsw index({8, 32, 0, 0.0}, 631);
    CHECK_THROWS(index.search(std::vector<float>{0.0f}, 1));  // search before build
    DatasetStore store(2);
    index.build(store);
    index.insert(store.add(std::vector<float>{0.0f, 0.0f}));
    CHECK_THROWS(index.insert(0));   // duplicate id
    CHECK_THROWS(index.update(99));  // unknown id
}
