#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <stdexcept>
#include <vector>

#include "dynann/index.hpp"
#include "dynann/rng.hpp"

namespace dynann {

struct HnswParams {
    std::uint32_t M = 16;
    std::uint32_t ef_construction = 200;
    std::uint32_t ef_search = 0;  // query-time beam width; 0 = use k
    double mL = 0.0;              // level multiplier; 0 = 1 / ln M
};

// Geometric level assignment: floor(-ln(u) * mL) for u in (0, 1].
inline int assign_level(double u, double mL) {
    if (!(u > 0.0) || u > 1.0) throw std::invalid_argument("assign_level: u must be in (0, 1]");
    return static_cast<int>(std::floor(-std::log(u) * mL));
}

// Diversity pruning from the HNSW reference: walk candidates in ascending
// distance-to-base order and admit one iff it is strictly closer to the base
// point than to every neighbour admitted so far, stopping at max_links.
// Candidates must arrive canonically sorted by distance to the base point.
NeighbourList select_neighbours_heuristic(const DatasetStore& store, std::span<const float> base,
                                          const NeighbourList& candidates, std::size_t max_links);

// Scratch for search_layer: epoch-marked visited flags over dense ids.
struct VisitedSet {
    std::vector<std::uint32_t> marks;
    std::uint32_t epoch = 0;

    void begin(std::size_t n) {
        if (marks.size() < n) marks.resize(n, 0);
        ++epoch;
    }
    bool test_and_set(VectorId id) {
        if (marks[id] == epoch) return true;
        marks[id] = epoch;
        return false;
    }
};

// Greedy best-first beam search on one layer of an arbitrary adjacency.
// `links(id, layer)` must return something iterable over VectorId.  Keeps
// the ef best results; expands the nearest unexpanded candidate until it is
// farther than the current worst result.  Returns results in canonical
// order.  Exposed as a template so tests can drive it with synthetic graphs.
template <typename LinkFn>
NeighbourList search_layer(const DatasetStore& store, std::span<const float> query,
                           std::span<const VectorId> entries, std::size_t ef, std::size_t layer,
                           LinkFn&& links, VisitedSet& visited) {
    const std::size_t dim = store.dimension();
    const float* base = store.data();
    visited.begin(store.size());

    auto farther = canonical_less;  // max-heap on canonical order: top = worst kept
    std::priority_queue<Neighbour, std::vector<Neighbour>, decltype(farther)> results(farther);
    auto nearer = [](const Neighbour& a, const Neighbour& b) { return canonical_less(b, a); };
    std::priority_queue<Neighbour, std::vector<Neighbour>, decltype(nearer)> frontier(nearer);

    for (VectorId e : entries) {
        if (visited.test_and_set(e)) continue;
        const Neighbour n{e, squared_distance(query.data(), base + e * dim, dim)};
        frontier.push(n);
        results.push(n);
        if (results.size() > ef) results.pop();
    }
    while (!frontier.empty()) {
        const Neighbour cur = frontier.top();
        frontier.pop();
        if (results.size() >= ef && canonical_less(results.top(), cur)) break;
        for (VectorId nb : links(cur.id, layer)) {
            if (visited.test_and_set(nb)) continue;
            const Neighbour cand{nb, squared_distance(query.data(), base + nb * dim, dim)};
            if (results.size() < ef || canonical_less(cand, results.top())) {
                frontier.push(cand);
                results.push(cand);
                if (results.size() > ef) results.pop();
            }
        }
    }
    NeighbourList out(results.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = results.top();
        results.pop();
    }
    return out;
}

struct HnswStats {
    int top_level = -1;
    std::int64_t entry = -1;
    std::vector<std::size_t> nodes_per_level;
    std::map<std::size_t, std::size_t> layer0_degree_histogram;
};

// Hierarchical navigable small world graph with insert-only construction per
// the reference scheme and update support implemented as unlink + reinsert
// (the node keeps its originally drawn level) plus repair of former
// neighbours whose adjacency lists fall below M/2.  Degree-capped pruning
// anywhere (inserts included) can strand a node by dropping its last
// incoming layer-0 edge, so the structure tracks layer-0 in-degrees
// incrementally and queues any node whose count hits zero; maintain()
// relinks the queued nodes, forcing an edge from the nearest reachable
// neighbour when diversity pruning alone would reject every backlink.
class Hnsw : public DynamicIndex {
public:
    Hnsw(HnswParams params, std::uint64_t seed);

    std::string name() const override { return "hnsw"; }
    void build(const DatasetStore& store) override;
    void insert(VectorId id) override;
    void update(VectorId id) override;
    NeighbourList search(std::span<const float> query, std::size_t k) override;
    bool maintain() override;
    std::size_t memory_bytes() const override;
    AuditReport audit() const override;

    HnswStats stats() const;
    int top_level() const { return top_level_; }
    std::int64_t entry_point() const { return entry_; }
    int node_level(VectorId id) const { return nodes_[id].level; }
    std::span<const VectorId> node_links(VectorId id, std::size_t layer) const {
        return nodes_[id].links[layer];
    }

private:
    struct Node {
        int level = -1;
        std::vector<std::vector<VectorId>> links;  // one list per layer 0..level
    };

    std::size_t max_links(std::size_t layer) const { return layer == 0 ? 2 * params_.M : params_.M; }
    double distance(VectorId a, std::span<const float> v) const;
    VectorId greedy_descend(std::span<const float> query, VectorId from, int from_level,
                            int to_level) const;
    void link_into_graph(VectorId id, std::span<const float> v, int level);
    void repair_node(VectorId id, std::size_t layer);
    void note_gain(std::size_t layer, VectorId target);
    void note_loss(std::size_t layer, VectorId target);
    void set_own_links(VectorId id, std::size_t layer, const NeighbourList& selected);
    void add_backlink(VectorId host, std::size_t layer, VectorId id);
    void hand_over_entry(std::int64_t new_entry, int new_top);
    void force_inbound(VectorId id);
    bool drain_strands();

    HnswParams params_;
    double mL_;
    Xoshiro256ss rng_;
    std::uint64_t seed_;
    const DatasetStore* store_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> in0_;       // layer-0 in-degree per id
    std::vector<VectorId> strand_queue_;   // ids whose layer-0 in-degree hit zero
    std::int64_t entry_ = -1;
    int top_level_ = -1;
    bool needs_sweep_ = false;
    bool updates_pending_ = false;
    VisitedSet visited_;
};

}  // namespace dynann
