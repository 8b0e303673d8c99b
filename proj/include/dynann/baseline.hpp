#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynann/core.hpp"
#include "dynann/neighbours.hpp"

namespace dynann {

// Exhaustively scores the query against every stored vector and returns the
// k nearest in canonical order (fewer if the store holds fewer than k).
NeighbourList exact_knn(const DatasetStore& store, std::span<const float> query, std::size_t k);

// Exact scan restricted to the ids in `subset`.
NeighbourList subset_knn(const DatasetStore& store, std::span<const VectorId> subset,
                         std::span<const float> query, std::size_t k);

// 64-bit FNV-1a over the raw query bytes; cache key material.
std::uint64_t fingerprint64(std::span<const float> query);

// The baseline's accuracy/runtime dial: scan a seeded random subset holding
// a fraction p of the store.  The permutation is regenerated whenever the
// store's snapshot version changes (so fresh samples become reachable), and
// consecutive queries rotate their window through the permutation so the
// subsets are not frozen for the whole run.
class SubsetScanner {
public:
    SubsetScanner(double p, std::uint64_t seed, bool rotate = true);

    double fraction() const { return p_; }

    NeighbourList search(const DatasetStore& store, std::span<const float> query, std::size_t k);

private:
    void refresh(const DatasetStore& store);

    double p_;
    std::uint64_t seed_;
    bool rotate_;
    std::uint64_t seen_version_ = ~0ULL;
    std::size_t cursor_ = 0;
    std::vector<VectorId> permutation_;
};

// Memoised exact ground truth, keyed by (query fingerprint, snapshot
// version, k).  Shared across every run of the same workload script so the
// exhaustive oracle pass is paid once, and persistable so a warmed cache can
// be reused between processes.
class GroundTruthCache {
public:
    const NeighbourList& lookup(const DatasetStore& store, std::span<const float> query,
                                std::size_t k);

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    std::size_t size() const { return cache_.size(); }

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    struct Key {
        std::uint64_t fingerprint;
        std::uint64_t version;
        std::uint64_t k;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& key) const;
    };

    std::unordered_map<Key, NeighbourList, KeyHash> cache_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

}  // namespace dynann
