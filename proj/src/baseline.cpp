#include "dynann/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dynann/io.hpp"
#include "dynann/rng.hpp"

namespace dynann {

NeighbourList exact_knn(const DatasetStore& store, std::span<const float> query, std::size_t k) {
    if (k == 0) throw std::invalid_argument("exact_knn: k must be positive");
    if (query.size() != store.dimension()) {
        throw std::invalid_argument("exact_knn: query dimension mismatch");
    }
    const std::size_t dim = store.dimension();
    const float* base = store.data();
    TopK top(k);
    for (std::size_t id = 0; id < store.size(); ++id) {
        top.offer(id, squared_distance(query.data(), base + id * dim, dim));
    }
    return top.take();
}

NeighbourList subset_knn(const DatasetStore& store, std::span<const VectorId> subset,
                         std::span<const float> query, std::size_t k) {
    if (k == 0) throw std::invalid_argument("subset_knn: k must be positive");
    if (query.size() != store.dimension()) {
        throw std::invalid_argument("subset_knn: query dimension mismatch");
    }
    const std::size_t dim = store.dimension();
    const float* base = store.data();
    TopK top(k);
    for (VectorId id : subset) {
        if (!store.contains(id)) {
            throw std::out_of_range("subset_knn: subset contains unknown id " + std::to_string(id));
        }
        top.offer(id, squared_distance(query.data(), base + id * dim, dim));
    }
    return top.take();
}

std::uint64_t fingerprint64(std::span<const float> query) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(query.data());
    for (std::size_t i = 0; i < query.size() * sizeof(float); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

SubsetScanner::SubsetScanner(double p, std::uint64_t seed, bool rotate)
    : p_(p), seed_(seed), rotate_(rotate) {
    if (!(p > 0.0) || p > 1.0) {
        throw std::invalid_argument("SubsetScanner: p must lie in (0, 1]");
    }
}

void SubsetScanner::refresh(const DatasetStore& store) {
    permutation_ = store.snapshot_ids();
    // Fisher-Yates with a seed derived from (seed, version) so the subset for
    // any snapshot is reproducible without replaying earlier queries.
    Xoshiro256ss rng(mix_seed(seed_, store.snapshot_version()));
    for (std::size_t i = permutation_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(permutation_[i - 1], permutation_[j]);
    }
    seen_version_ = store.snapshot_version();
    cursor_ = 0;
}

NeighbourList SubsetScanner::search(const DatasetStore& store, std::span<const float> query,
                                    std::size_t k) {
    if (store.empty()) return {};
    if (seen_version_ != store.snapshot_version()) refresh(store);
    const std::size_t n = permutation_.size();
    std::size_t take = static_cast<std::size_t>(std::ceil(p_ * static_cast<double>(n)));
    if (take == 0) take = 1;
    if (take > n) take = n;
    if (take == n) return exact_knn(store, query, k);

    const std::size_t dim = store.dimension();
    const float* base = store.data();
    TopK top(k);
    for (std::size_t i = 0; i < take; ++i) {
        const VectorId id = permutation_[(cursor_ + i) % n];
        top.offer(id, squared_distance(query.data(), base + id * dim, dim));
    }
    if (rotate_) cursor_ = (cursor_ + take) % n;
    return top.take();
}

std::size_t GroundTruthCache::KeyHash::operator()(const Key& key) const {
    std::uint64_t h = key.fingerprint;
    h = mix_seed(h, key.version);
    h = mix_seed(h, key.k);
    return static_cast<std::size_t>(h);
}

const NeighbourList& GroundTruthCache::lookup(const DatasetStore& store,
                                              std::span<const float> query, std::size_t k) {
    const Key key{fingerprint64(query), store.snapshot_version(), k};
    auto it = cache_.find(key);
    if (it != cache_.end()) {
        ++hits_;
        return it->second;
    }
    ++misses_;
    return cache_.emplace(key, exact_knn(store, query, k)).first->second;
}

namespace {
constexpr char kGtMagic[4] = {'D', 'Y', 'N', 'G'};
constexpr std::uint32_t kGtVersion = 1;
}  // namespace

void GroundTruthCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kGtMagic, 4);
    out.write(reinterpret_cast<const char*>(&kGtVersion), 4);
    const std::uint64_t count = cache_.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    // Entries are written in sorted key order so the same cache contents
    // always produce the same bytes.
    std::vector<const std::pair<const Key, NeighbourList>*> entries;
    entries.reserve(cache_.size());
    for (const auto& kv : cache_) entries.push_back(&kv);
    std::sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
        const Key& x = a->first;
        const Key& y = b->first;
        if (x.version != y.version) return x.version < y.version;
        if (x.fingerprint != y.fingerprint) return x.fingerprint < y.fingerprint;
        return x.k < y.k;
    });
    for (const auto* kv : entries) {
        out.write(reinterpret_cast<const char*>(&kv->first.fingerprint), 8);
        out.write(reinterpret_cast<const char*>(&kv->first.version), 8);
        out.write(reinterpret_cast<const char*>(&kv->first.k), 8);
        const std::uint64_t len = kv->second.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        for (const Neighbour& n : kv->second) {
            out.write(reinterpret_cast<const char*>(&n.id), 8);
            out.write(reinterpret_cast<const char*>(&n.distance_sq), 8);
        }
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

void GroundTruthCache::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    char magic[4];
    std::uint32_t version = 0;
    if (!in.read(magic, 4) || std::memcmp(magic, kGtMagic, 4) != 0) {
        throw ParseError(path + ": bad ground-truth cache magic");
    }
    if (!in.read(reinterpret_cast<char*>(&version), 4) || version != kGtVersion) {
        throw ParseError(path + ": unsupported ground-truth cache version");
    }
    std::uint64_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), 8)) throw ParseError(path + ": truncated ground-truth cache header");
    for (std::uint64_t i = 0; i < count; ++i) {
        Key key{};
        std::uint64_t len = 0;
        if (!in.read(reinterpret_cast<char*>(&key.fingerprint), 8) ||
            !in.read(reinterpret_cast<char*>(&key.version), 8) ||
            !in.read(reinterpret_cast<char*>(&key.k), 8) ||
            !in.read(reinterpret_cast<char*>(&len), 8)) {
            throw ParseError(path + ": truncated cache entry header");
        }
        NeighbourList list(len);
        for (auto& n : list) {
            if (!in.read(reinterpret_cast<char*>(&n.id), 8) ||
                !in.read(reinterpret_cast<char*>(&n.distance_sq), 8)) {
                throw ParseError(path + ": truncated cache entry payload");
            }
        }
        cache_[key] = std::move(list);
    }
}

}  // namespace dynann
