#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynann/core.hpp"

namespace dynann {

// One query inside a SearchBlock: the index of the query in its source set
// (pool position for query-then-insert scripts, query-set position
// otherwise) plus the payload itself.
struct SearchItem {
    std::uint64_t query_index = 0;
    std::vector<float> query;
};

enum class BlockKind : std::uint8_t { Event = 0, Search = 1 };

// A contiguous run of work of one kind.  Exactly one of the two payload
// vectors is populated, matching `kind`.
struct Block {
    BlockKind kind = BlockKind::Event;
    std::vector<Event> events;
    std::vector<SearchItem> searches;

    std::size_t size() const {
        return kind == BlockKind::Event ? events.size() : searches.size();
    }
};

struct ScriptMeta {
    std::string scenario;  // "odc", "ofl", or free-form for rescheduled scripts
    std::uint64_t dim = 0;
    std::uint64_t n0 = 0;        // initial dataset size
    std::uint64_t n_events = 0;
    std::uint64_t n_searches = 0;
    std::uint64_t event_batch = 1;
    std::uint64_t search_batch = 1;
    double eta = 0.0;   // convergence step for update scripts, 0 otherwise
    double rate = 1.0;  // event blocks interleaved per search block
    std::uint64_t clusters = 0;  // target derivation: >0 cluster means, 0 neighbour means
    std::uint64_t seed = 0;

    bool operator==(const ScriptMeta&) const = default;
};

// A fully materialised benchmark run: the starting dataset plus an ordered
// block list.  Every event payload is precomputed at generation time, so
// replaying a script is pure bookkeeping and bitwise deterministic.
struct WorkloadScript {
    ScriptMeta meta;
    std::vector<float> initial;  // n0 x dim, row-major
    std::vector<Block> blocks;
};

// Interleaving ratio for the rate experiments: r event blocks per search
// block when r >= 1, one event block per 1/r search blocks when r < 1.
struct RateSpec {
    double events_per_search = 1.0;
    std::uint64_t event_batch = 0;   // 0 = keep the script's batch size
    std::uint64_t search_batch = 0;
};

// Query-then-insert script: initial dataset = pool[0..n0), then alternating
// search/event block pairs consuming pool vectors in order, where each
// query is added right after it is searched.  Requires B_e == B_s so the
// pairing stays aligned; other shapes come from reschedule().
WorkloadScript gen_odc(const std::vector<std::vector<float>>& pool, std::size_t n0,
                       std::size_t n_events, std::size_t event_batch, std::size_t search_batch,
                       std::uint64_t seed);

struct GenOflOptions {
    double eta = 0.1;
    std::size_t event_batch = 200;
    std::size_t search_batch = 200;
    // >0: sample i converges to the mean of initial samples with the same
    // i % clusters (the synthetic generator's assignment rule).  0: target
    // is the mean of the sample's 10 exact nearest neighbours at t=0.
    std::size_t clusters = 0;
};

// Converging-update script: sample ids cycle through one seeded permutation,
// each update moving the vector one eta-step towards its fixed target.
// Blocks alternate E,S,E,S..., with one search block of search_batch
// round-robin queries after every event block.
WorkloadScript gen_ofl(const std::vector<std::vector<float>>& pool, std::size_t n0,
                       std::size_t n_events, const GenOflOptions& options,
                       const std::vector<std::vector<float>>& queries, std::uint64_t seed);

// Fixed per-sample convergence targets, exposed for tests and tooling.
std::vector<std::vector<float>> targets_from_clusters(const std::vector<std::vector<float>>& pool,
                                                      std::size_t n0, std::size_t clusters);
std::vector<std::vector<float>> targets_from_knn(const std::vector<std::vector<float>>& pool,
                                                 std::size_t n0, std::size_t k);

// Re-chunks both underlying streams to the new batch sizes and interleaves
// them at the requested ratio.  Payload-preserving: concatenating either
// stream gives back the original order and content, and totals never
// change.  The leading block kind of the source script is kept, so a ratio
// of 1 with unchanged batch sizes is the identity.
WorkloadScript reschedule(const WorkloadScript& script, const RateSpec& rate);

// Throws std::invalid_argument if any update references an id that does not
// exist at its execution point, or any payload has the wrong dimension.
void validate_script(const WorkloadScript& script);

// FNV-1a over the exact serialised byte stream; names one script.
std::uint64_t script_digest(const WorkloadScript& script);

// Binary container, little-endian throughout: magic "DYNW", u32 version,
// u64 metadata JSON length + JSON bytes, then dataset and blocks.  Layout
// documented in docs/formats.md.
void save_script(const std::string& path, const WorkloadScript& script);
WorkloadScript load_script(const std::string& path);

}  // namespace dynann
