#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dynann/index.hpp"

namespace dynann {

struct KdTreeParams {
    std::uint32_t leaf_capacity = 32;
    std::uint64_t max_leaves_visited = 0;  // 0 means unlimited, i.e. exact search
    double rebuild_imbalance = 4.0;        // sibling size ratio that triggers a subtree rebuild
};

// Dynamic k-d tree.  Splits are axis-aligned at the median of the
// maximum-variance dimension.  Every node carries a bounding box of the
// points below it, which gives the best-first search a valid lower bound;
// boxes are grown on insert and left conservative on delete, so they stay
// correct (if loose) under any event sequence.  Updates are handled as
// delete + reinsert, and a subtree whose sibling sizes drift past
// rebuild_imbalance is rebuilt from its points.
class KdTree : public DynamicIndex {
public:
    explicit KdTree(KdTreeParams params);

    std::string name() const override { return "kdtree"; }
    void build(const DatasetStore& store) override;
    void insert(VectorId id) override;
    void update(VectorId id) override;
    NeighbourList search(std::span<const float> query, std::size_t k) override;
    std::size_t memory_bytes() const override;
    AuditReport audit() const override;

    // Introspection used by tests and reports.
    std::uint64_t last_leaves_visited() const { return last_leaves_visited_; }
    std::uint64_t subtree_rebuilds() const { return subtree_rebuilds_; }
    std::size_t leaf_count() const;
    std::size_t indexed_count() const { return root_ < 0 ? 0 : nodes_[root_].count; }

private:
    struct Node {
        std::int32_t parent = -1;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t split_dim = 0;
        float split_value = 0.0f;
        std::uint32_t count = 0;
        std::vector<float> box_min;
        std::vector<float> box_max;
        std::vector<VectorId> ids;  // populated for leaves only

        bool leaf() const { return left < 0; }
    };

    std::int32_t alloc_node();
    void free_node(std::int32_t n);
    void reset();

    std::int32_t build_subtree(std::vector<VectorId>& ids, std::size_t begin, std::size_t end,
                               std::int32_t parent);
    bool choose_split(const std::vector<VectorId>& ids, std::size_t begin, std::size_t end,
                      std::uint32_t& dim, float& value) const;
    void compute_box(Node& node, const std::vector<VectorId>& ids, std::size_t begin,
                     std::size_t end) const;

    void insert_routed(VectorId id);
    void split_leaf(std::int32_t n);
    void remove(VectorId id);
    void collect_ids(std::int32_t n, std::vector<VectorId>& out) const;
    void rebalance_path(std::int32_t leaf);
    void rebuild_subtree(std::int32_t n);

    double box_distance(const Node& node, const float* query) const;

    KdTreeParams params_;
    const DatasetStore* store_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<std::int32_t> free_nodes_;
    std::int32_t root_ = -1;
    std::unordered_map<VectorId, std::int32_t> leaf_of_;
    std::uint64_t last_leaves_visited_ = 0;
    std::uint64_t subtree_rebuilds_ = 0;
};

}  // namespace dynann
