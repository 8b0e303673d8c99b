#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dynann/baseline.hpp"
#include "dynann/io.hpp"
#include "dynann/ivfpq.hpp"
#include "dynann/rng.hpp"

using namespace dynann;

namespace {

DatasetStore make_store(const std::vector<std::vector<float>>& samples) {
    DatasetStore store(samples.front().size());
    for (const auto& s : samples) store.add(s);
    return store;
}

// Integer-lattice dataset whose sub-vectors take at most two distinct values
// per subspace, so 1-bit codebooks can represent every point exactly and
// every distance computation is exact in double arithmetic.
std::vector<std::vector<float>> lattice_samples(std::size_t n, std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    std::vector<std::vector<float>> samples(n, std::vector<float>(8));
    for (auto& s : samples) {
        for (int sub = 0; sub < 4; ++sub) {
            const float v = rng.below(2) == 0 ? 0.0f : 8.0f;
            s[2 * sub] = v;
            s[2 * sub + 1] = v;
        }
    }
    return samples;
}

std::vector<float> lattice_query(Xoshiro256ss& rng) {
    std::vector<float> q(8);
    for (auto& x : q) x = static_cast<float>(rng.below(17));  // integers 0..16
    return q;
}

double mean_recall_against_exact(const DatasetStore& store, IvfPq& index,
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

TEST_CASE("lossless codes make ADC search equal exact search") {
    const auto samples = lattice_samples(256, 701);
    const DatasetStore store = make_store(samples);
    IvfPqParams params;
    params.nlist = 1;
    params.m = 4;
    params.nbits = 1;
    params.nprobe = 1;
    IvfPq index(params, 71);
    index.build(store);

    // Every stored code must decode to the original vector bit for bit.
    for (VectorId id = 0; id < 256; ++id) {
        const std::vector<float> rebuilt = index.decode(id);
        for (std::size_t j = 0; j < 8; ++j) CHECK(rebuilt[j] == samples[id][j]);
    }

    Xoshiro256ss rng(702);
    for (int q = 0; q < 50; ++q) {
        const std::vector<float> query = lattice_query(rng);
        const NeighbourList got = index.search(query, 10);
        const NeighbourList want = exact_knn(store, query, 10);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == want[i].id);
            CHECK(got[i].distance_sq == want[i].distance_sq);
        }
    }
}

TEST_CASE("m is clamped to the largest divisor of dim") {
    const SyntheticData syn = gen_synthetic({300, 12, 4, 0.3}, 703);
    const DatasetStore store = make_store(syn.samples);
    IvfPqParams params;
    params.m = 8;  // 8 does not divide 12; largest divisor <= 8 is 6
    IvfPq index(params, 72);
    index.build(store);
    CHECK(index.m() == 6);
    CHECK(index.trained());
}

TEST_CASE("default nlist is the square-root rule") {
    const SyntheticData syn = gen_synthetic({400, 8, 4, 0.3}, 705);
    const DatasetStore store = make_store(syn.samples);
    IvfPqParams params;
    params.m = 4;
    IvfPq index(params, 73);
    index.build(store);
    CHECK(index.nlist() == 20);  // ceil(sqrt(400))
}

TEST_CASE("nprobe widens the scan and lifts recall") {
    const SyntheticData syn = gen_synthetic({3000, 16, 12, 0.2}, 707);
    const DatasetStore store = make_store(syn.samples);
    Xoshiro256ss rng(708);
    std::vector<std::vector<float>> queries(40, std::vector<float>(16));
    for (auto& q : queries) {
        for (auto& x : q) x = static_cast<float>(rng.uniform());
    }
    double previous = -1.0;
    std::uint64_t previous_scanned = 0;
    for (std::uint32_t nprobe : {1u, 4u, 16u, 64u}) {
        IvfPqParams params;
        params.nlist = 32;
        params.m = 8;
        params.nprobe = nprobe;
        IvfPq index(params, 74);
        index.build(store);
        double total_scanned = 0.0;
        double total = 0.0;
        for (const auto& q : queries) {
            const NeighbourList got = index.search(q, 20);
            total_scanned += static_cast<double>(index.last_scanned_codes());
            const NeighbourList want = exact_knn(store, q, 20);
            std::size_t hits = 0;
            for (const Neighbour& g : got) {
                for (const Neighbour& w : want) hits += g.id == w.id;
            }
            total += static_cast<double>(hits) / static_cast<double>(want.size());
        }
        const double mean = total / static_cast<double>(queries.size());
        CHECK(mean >= previous - 0.02);
        CHECK(total_scanned >= static_cast<double>(previous_scanned));
        previous = mean;
        previous_scanned = static_cast<std::uint64_t>(total_scanned);
    }
    // nprobe = nlist scans every list: recall is then bounded only by code
    // truncation, which exact rerank removes entirely.
    IvfPqParams params;
    params.nlist = 32;
    params.m = 8;
    params.nprobe = 32;
    params.exact_rerank = true;
    IvfPq full(params, 74);
    full.build(store);
    CHECK(mean_recall_against_exact(store, full, queries, 20) > 0.95);
}

TEST_CASE("dynamic events keep list membership auditable") {
    const SyntheticData syn = gen_synthetic({1200, 8, 6, 0.25}, 709);
    DatasetStore store(8);
    for (std::size_t i = 0; i < 600; ++i) store.add(syn.samples[i]);
    IvfPqParams params;
    params.nlist = 16;
    params.m = 4;
    params.nprobe = 4;
    IvfPq index(params, 75);
    index.build(store);

    for (std::size_t i = 600; i < 1200; ++i) index.insert(store.add(syn.samples[i]));
    CHECK(index.audit().violations == 0);

    Xoshiro256ss rng(710);
    for (int e = 0; e < 800; ++e) {
        const VectorId id = rng.below(1200);
        std::vector<float> moved(8);
        for (auto& x : moved) x = static_cast<float>(rng.uniform());
        store.overwrite(id, moved);
        index.update(id);
    }
    CHECK(index.audit().violations == 0);
}

TEST_CASE("retrain counter refreshes codebooks and preserves the id set") {
    const SyntheticData syn = gen_synthetic({800, 8, 4, 0.3}, 711);
    DatasetStore store(8);
    for (std::size_t i = 0; i < 400; ++i) store.add(syn.samples[i]);
    IvfPqParams params;
    params.nlist = 8;
    params.m = 4;
    params.nprobe = 8;
    params.retrain_every = 100;
    IvfPq index(params, 76);
    index.build(store);

    CHECK(index.retrains() == 0);
    for (std::size_t i = 400; i < 520; ++i) index.insert(store.add(syn.samples[i]));
    CHECK(index.maintain());
    CHECK(index.retrains() == 1);
    CHECK(!index.maintain());  // counter reset, nothing due
    CHECK(index.audit().violations == 0);

    // Every id must remain searchable after the retrain.
    const NeighbourList everyone = index.search(syn.samples[0], 5);
    CHECK(!everyone.empty());
}

TEST_CASE("retraining tracks drift that frozen codebooks miss") {
    // Move every point far from the trained region, then compare recall
    // with and without retrain.
    const SyntheticData syn = gen_synthetic({1000, 8, 5, 0.15}, 713);
    DatasetStore store_a = make_store(syn.samples);
    DatasetStore store_b = make_store(syn.samples);
    IvfPqParams frozen;
    frozen.nlist = 16;
    frozen.m = 4;
    frozen.nprobe = 4;
    IvfPqParams refreshed = frozen;
    refreshed.retrain_every = 500;
    IvfPq stale(frozen, 77);
    IvfPq fresh(refreshed, 77);
    stale.build(store_a);
    fresh.build(store_b);

    Xoshiro256ss rng(714);
    for (int e = 0; e < 2000; ++e) {
        const VectorId id = rng.below(1000);
        std::vector<float> moved(8);
        for (auto& x : moved) x = static_cast<float>(5.0 + rng.uniform());
        store_a.overwrite(id, moved);
        store_b.overwrite(id, moved);
        stale.update(id);
        fresh.update(id);
        if ((e + 1) % 500 == 0) {
            stale.maintain();
            fresh.maintain();
        }
    }
    CHECK(stale.retrains() == 0);
    CHECK(fresh.retrains() == 4);
    CHECK(stale.audit().violations == 0);
    CHECK(fresh.audit().violations == 0);

    Xoshiro256ss qrng(715);
    std::vector<std::vector<float>> queries(40, std::vector<float>(8));
    for (auto& q : queries) {
        for (auto& x : q) x = static_cast<float>(5.0 + qrng.uniform());
    }
    const double stale_recall = mean_recall_against_exact(store_a, stale, queries, 10);
    const double fresh_recall = mean_recall_against_exact(store_b, fresh, queries, 10);
    CHECK(fresh_recall >= stale_recall);
}

TEST_CASE("exported codebooks match decode output") {
    const auto samples = lattice_samples(128, 717);
    const DatasetStore store = make_store(samples);
    IvfPqParams params;
    params.nlist = 2;
    params.m = 4;
    params.nbits = 1;
    IvfPq index(params, 78);
    index.build(store);

    const auto dir = std::filesystem::temp_directory_path() / "dynann_codebooks";
    std::filesystem::create_directories(dir);
    index.export_codebooks(dir.string());

    std::ifstream coarse(dir / "coarse_centroids.f32", std::ios::binary);
    REQUIRE(coarse.good());
    std::vector<float> coarse_data(2 * 8);
    coarse.read(reinterpret_cast<char*>(coarse_data.data()),
                static_cast<std::streamsize>(coarse_data.size() * sizeof(float)));
    REQUIRE(coarse.gcount() ==
            static_cast<std::streamsize>(coarse_data.size() * sizeof(float)));

    std::ifstream books(dir / "pq_codebooks.f32", std::ios::binary);
    REQUIRE(books.good());
    std::vector<float> book_data(4 * 2 * 2);  // m x ksub x dsub
    books.read(reinterpret_cast<char*>(book_data.data()),
               static_cast<std::streamsize>(book_data.size() * sizeof(float)));
    REQUIRE(books.gcount() == static_cast<std::streamsize>(book_data.size() * sizeof(float)));

    std::filesystem::remove_all(dir);
}

TEST_CASE("rejects invalid configuration and misuse") {
    CHECK_THROWS(IvfPq({0, 4, 0, 1, 0, false}, 1));   // nbits = 0
    CHECK_THROWS(IvfPq({0, 4, 9, 1, 0, false}, 1));   // nbits = 9
    CHECK_THROWS(IvfPq({0, 0, 8, 1, 0, false}, 1));   // m = 0
    CHECK_THROWS(IvfPq({0, 4, 8, 0, 0, false}, 1));   // nprobe = 0

    IvfPqParams params;
    params.m = 4;
    IvfPq index(params, 79);
    CHECK_THROWS(index.search(std::vector<float>{0.0f}, 1));  // search before build

    // Training demands at least max(nlist, ksub) samples.
    DatasetStore tiny(4);
    tiny.add(std::vector<float>{0.0f, 0.0f, 0.0f, 0.0f});
    IvfPqParams big;
    big.nlist = 4;
    big.m = 2;
    IvfPq starving(big, 80);
    CHECK_THROWS(starving.build(tiny));
}
