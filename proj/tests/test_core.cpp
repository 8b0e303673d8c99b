#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "dynann/core.hpp"
#include "dynann/neighbours.hpp"
#include "dynann/rng.hpp"

using namespace dynann;

TEST_CASE("squared_distance is exact on integer grids") {
    const float a[] = {0.0f, 3.0f, -2.0f};
    const float b[] = {4.0f, 0.0f, -2.0f};
    CHECK(squared_distance(a, b, 3) == 25.0);
    CHECK(squared_distance(a, a, 3) == 0.0);

    const std::vector<float> u = {1.0f, 2.0f};
    const std::vector<float> v = {1.0f, 2.0f, 3.0f};
    CHECK_THROWS_AS(squared_distance(std::span<const float>(u), std::span<const float>(v)),
                    std::invalid_argument);
}

TEST_CASE("store assigns dense ids and bumps versions per mutation") {
    DatasetStore store(2);
    CHECK(store.empty());
    CHECK(store.snapshot_version() == 0);

    const std::vector<float> v0 = {1.0f, 2.0f};
    const std::vector<float> v1 = {3.0f, 4.0f};
    CHECK(store.add(v0) == 0);
    CHECK(store.add(v1) == 1);
    CHECK(store.size() == 2);
    CHECK(store.snapshot_version() == 2);

    CHECK(store.vector(0)[0] == 1.0f);
    CHECK(store.vector(1)[1] == 4.0f);
    CHECK(store.data()[2] == 3.0f);

    const std::vector<float> v0b = {9.0f, 8.0f};
    store.overwrite(0, v0b);
    CHECK(store.size() == 2);
    CHECK(store.snapshot_version() == 3);
    CHECK(store.vector(0)[0] == 9.0f);

    CHECK(store.contains(1));
    CHECK(!store.contains(2));
    CHECK_THROWS_AS(store.vector(5), std::out_of_range);
    CHECK_THROWS_AS(store.overwrite(7, v0b), std::out_of_range);

    const std::vector<float> bad = {1.0f};
    CHECK_THROWS_AS(store.add(bad), std::invalid_argument);
}

TEST_CASE("apply routes events and returns the new version") {
    DatasetStore store(2);
    const std::uint64_t v1 = store.apply(Event::addition({1.0f, 1.0f}));
    CHECK(v1 == 1);
    CHECK(store.size() == 1);

    const std::uint64_t v2 = store.apply(Event::update(0, {5.0f, 5.0f}));
    CHECK(v2 == 2);
    CHECK(store.size() == 1);
    CHECK(store.vector(0)[0] == 5.0f);

    CHECK_THROWS_AS(store.apply(Event::update(9, {0.0f, 0.0f})), std::out_of_range);
}

TEST_CASE("memory accounting grows with the data") {
    DatasetStore store(8);
    const std::size_t empty_bytes = store.memory_bytes();
    std::vector<float> v(8, 0.5f);
    for (int i = 0; i < 100; ++i) store.add(v);
    CHECK(store.memory_bytes() >= empty_bytes + 100 * 8 * sizeof(float));
    CHECK(store.snapshot_ids().size() == 100);
    CHECK(store.snapshot_ids().front() == 0);
    CHECK(store.snapshot_ids().back() == 99);
}

TEST_CASE("canonical order breaks distance ties by ascending id") {
    NeighbourList list = {{3, 2.0}, {1, 1.0}, {2, 1.0}, {0, 5.0}};
    sort_canonical(list);
    CHECK(list[0].id == 1);
    CHECK(list[1].id == 2);
    CHECK(list[2].id == 3);
    CHECK(list[3].id == 0);
}

TEST_CASE("topk keeps the canonical best k against a full sort oracle") {
    Xoshiro256ss rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        const std::size_t k = 1 + rng.below(20);
        NeighbourList all;
        TopK top(k);
        for (std::size_t id = 0; id < n; ++id) {
            // Coarse grid so distance ties are common.
            const double d = static_cast<double>(rng.below(8));
            all.push_back({id, d});
            top.offer(id, d);
        }
        sort_canonical(all);
        all.resize(std::min(k, n));
        const NeighbourList got = top.take();
        REQUIRE(got.size() == all.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == all[i].id);
            CHECK(got[i].distance_sq == all[i].distance_sq);
        }
    }
}

TEST_CASE("topk would_accept agrees with offer under ties") {
    TopK top(2);
    top.offer(5, 1.0);
    top.offer(7, 1.0);
    CHECK(top.full());
    CHECK(top.worst().id == 7);
    CHECK(top.would_accept(1.0, 6));   // same distance, lower id than worst
    CHECK(!top.would_accept(1.0, 8));  // same distance, higher id
    top.offer(6, 1.0);
    const NeighbourList got = top.take();
    CHECK(got[0].id == 5);
    CHECK(got[1].id == 6);
}
