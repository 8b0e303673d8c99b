#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dynann/index.hpp"
#include "dynann/rng.hpp"

namespace dynann {

struct RpForestParams {
    std::uint32_t n_trees = 10;
    std::uint32_t leaf_capacity = 32;
    std::uint64_t search_k = 0;     // candidate budget across the forest; 0 = k * n_trees
    std::uint64_t rebuild_every = 0;  // events between full forest rebuilds; 0 = never
};

// Hyperplane through the perpendicular bisector of two sampled points.
// normal = a - b, offset = normal . midpoint(a, b); a point x with
// normal . x - offset > 0 routes left.
struct RpSplitPlane {
    std::vector<float> normal;
    double offset = 0.0;
};

RpSplitPlane rp_split(std::span<const float> a, std::span<const float> b);

// ANNOY-style forest of random-projection trees.  Each tree recursively
// bisects its subset with rp_split planes drawn from that tree's own seeded
// stream.  Queries run one shared priority queue over all trees, ordered by
// signed margin, until search_k distinct candidates are gathered, then
// rerank candidates by true distance.  Inserts route through the existing
// planes (splitting overflowing leaves); updates are remove + reinsert per
// tree; quality is recovered by the rebuild_every maintenance counter.
class RpForest : public DynamicIndex {
public:
    explicit RpForest(RpForestParams params, std::uint64_t seed);

    std::string name() const override { return "rpforest"; }
    void build(const DatasetStore& store) override;
    void insert(VectorId id) override;
    void update(VectorId id) override;
    NeighbourList search(std::span<const float> query, std::size_t k) override;
    bool maintain() override;
    std::size_t memory_bytes() const override;
    AuditReport audit() const override;

    std::uint64_t last_candidates() const { return last_candidates_; }
    std::uint64_t forest_rebuilds() const { return forest_rebuilds_; }

private:
    struct Node {
        std::int32_t parent = -1;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::vector<float> normal;
        double offset = 0.0;
        std::vector<VectorId> ids;  // leaves only

        bool leaf() const { return left < 0; }
    };

    struct Tree {
        std::vector<Node> nodes;
        std::int32_t root = -1;
        std::unordered_map<VectorId, std::int32_t> leaf_of;
    };

    std::int32_t build_subtree(Tree& tree, Xoshiro256ss& rng, std::vector<VectorId>& ids,
                               std::size_t begin, std::size_t end, std::int32_t parent);
    bool choose_plane(Xoshiro256ss& rng, const std::vector<VectorId>& ids, std::size_t begin,
                      std::size_t end, RpSplitPlane& plane) const;
    void split_leaf(Tree& tree, Xoshiro256ss& rng, std::int32_t n);
    void route_insert(Tree& tree, Xoshiro256ss& rng, VectorId id);
    double margin(const Node& node, const float* v) const;
    void rebuild_all();

    RpForestParams params_;
    std::uint64_t seed_;
    std::uint64_t generation_ = 0;
    const DatasetStore* store_ = nullptr;
    std::vector<Tree> trees_;
    std::vector<Xoshiro256ss> tree_rngs_;
    std::uint64_t events_since_rebuild_ = 0;
    std::uint64_t forest_rebuilds_ = 0;
    std::uint64_t last_candidates_ = 0;

    // Per-search scratch: epoch-marked visited flags over the dense id space.
    std::vector<std::uint32_t> seen_;
    std::uint32_t epoch_ = 0;
};

}  // namespace dynann
