#include "dynann/rpforest.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace dynann {
namespace {

double raw_margin(const std::vector<float>& normal, double offset, const float* v) {
    double dot = 0.0;
    for (std::size_t i = 0; i < normal.size(); ++i) {
        dot += static_cast<double>(normal[i]) * static_cast<double>(v[i]);
    }
    return dot - offset;
}

}  // namespace

RpSplitPlane rp_split(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("rp_split: dimension mismatch");
    RpSplitPlane plane;
    plane.normal.resize(a.size());
    double offset = 0.0;
    bool distinct = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float n = a[i] - b[i];
        plane.normal[i] = n;
        if (n != 0.0f) distinct = true;
        const double mid = (static_cast<double>(a[i]) + static_cast<double>(b[i])) * 0.5;
        offset += static_cast<double>(n) * mid;
    }
    if (!distinct) throw std::invalid_argument("rp_split: identical points");
    plane.offset = offset;
    return plane;
}

RpForest::RpForest(RpForestParams params, std::uint64_t seed) : params_(params), seed_(seed) {
    if (params_.n_trees == 0) throw std::invalid_argument("RpForest: n_trees must be positive");
    if (params_.leaf_capacity == 0) {
        throw std::invalid_argument("RpForest: leaf_capacity must be positive");
    }
}

double RpForest::margin(const Node& node, const float* v) const {
    return raw_margin(node.normal, node.offset, v);
}

// Draws two distinct points from the subset and takes their bisector.  After
// a few failed attempts (duplicate vectors, or all points landing on one
// side) it falls back to an axis-aligned split at the median of the widest
// dimension; if the points are identical in every coordinate the caller
// keeps an oversized leaf.
bool RpForest::choose_plane(Xoshiro256ss& rng, const std::vector<VectorId>& ids, std::size_t begin,
                            std::size_t end, RpSplitPlane& plane) const {
    const std::size_t n = end - begin;
    const std::size_t dim = store_->dimension();
    const float* base = store_->data();
    constexpr int kAttempts = 3;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const std::size_t i = static_cast<std::size_t>(rng.below(n));
        std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
        if (j >= i) ++j;
        const float* a = base + ids[begin + i] * dim;
        const float* b = base + ids[begin + j] * dim;
        if (std::equal(a, a + dim, b)) continue;
        plane = rp_split({a, dim}, {b, dim});
        // The sampled pair always straddles the bisector, but duplicated
        // mass can still leave one side empty; verify before accepting.
        bool any_left = false, any_right = false;
        for (std::size_t t = begin; t < end && !(any_left && any_right); ++t) {
            (raw_margin(plane.normal, plane.offset, base + ids[t] * dim) > 0.0 ? any_left
                                                                               : any_right) = true;
        }
        if (any_left && any_right) return true;
    }

    // Axis fallback: median threshold on the widest dimension, encoded as a
    // one-hot hyperplane so routing stays uniform.
    std::size_t best_dim = 0;
    float best_span = -1.0f;
    for (std::size_t d = 0; d < dim; ++d) {
        float lo = std::numeric_limits<float>::max();
        float hi = std::numeric_limits<float>::lowest();
        for (std::size_t t = begin; t < end; ++t) {
            const float x = base[ids[t] * dim + d];
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (hi - lo > best_span) {
            best_span = hi - lo;
            best_dim = d;
        }
    }
    if (best_span <= 0.0f) return false;  // identical points
    std::vector<float> values(n);
    for (std::size_t t = begin; t < end; ++t) values[t - begin] = base[ids[t] * dim + best_dim];
    std::sort(values.begin(), values.end());
    float threshold = values[n / 2];
    if (threshold == values.back()) {
        // x > threshold routes left, so the threshold must sit below the max.
        auto it = std::lower_bound(values.begin(), values.end(), threshold);
        threshold = *(it - 1);
    }
    plane.normal.assign(dim, 0.0f);
    plane.normal[best_dim] = 1.0f;
    plane.offset = threshold;
    return true;
}

std::int32_t RpForest::build_subtree(Tree& tree, Xoshiro256ss& rng, std::vector<VectorId>& ids,
                                     std::size_t begin, std::size_t end, std::int32_t parent) {
    tree.nodes.emplace_back();
    const std::int32_t n = static_cast<std::int32_t>(tree.nodes.size() - 1);
    tree.nodes[n].parent = parent;

    RpSplitPlane plane;
    if (end - begin <= params_.leaf_capacity ||
        !choose_plane(rng, ids, begin, end, plane)) {
        tree.nodes[n].ids.assign(ids.begin() + begin, ids.begin() + end);
        for (std::size_t i = begin; i < end; ++i) tree.leaf_of[ids[i]] = n;
        return n;
    }

    tree.nodes[n].normal = std::move(plane.normal);
    tree.nodes[n].offset = plane.offset;
    const float* base = store_->data();
    const std::size_t dim = store_->dimension();
    const Node& split_node = tree.nodes[n];
    const auto mid_it = std::partition(ids.begin() + begin, ids.begin() + end, [&](VectorId id) {
        return margin(split_node, base + id * dim) > 0.0;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - ids.begin());
    const std::int32_t left = build_subtree(tree, rng, ids, begin, mid, n);
    const std::int32_t right = build_subtree(tree, rng, ids, mid, end, n);
    tree.nodes[n].left = left;
    tree.nodes[n].right = right;
    return n;
}

void RpForest::build(const DatasetStore& store) {
    store_ = &store;
    trees_.assign(params_.n_trees, {});
    tree_rngs_.clear();
    events_since_rebuild_ = 0;
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        tree_rngs_.emplace_back(mix_seed(mix_seed(seed_, generation_), t));
    }
    std::vector<VectorId> ids = store.snapshot_ids();
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        if (!ids.empty()) {
            std::vector<VectorId> scratch = ids;
            trees_[t].root = build_subtree(trees_[t], tree_rngs_[t], scratch, 0, scratch.size(), -1);
        }
    }
}

void RpForest::split_leaf(Tree& tree, Xoshiro256ss& rng, std::int32_t n) {
    RpSplitPlane plane;
    if (!choose_plane(rng, tree.nodes[n].ids, 0, tree.nodes[n].ids.size(), plane)) {
        return;  // identical points; oversized leaf
    }
    std::vector<VectorId> ids = std::move(tree.nodes[n].ids);
    tree.nodes[n].ids.clear();
    tree.nodes[n].normal = std::move(plane.normal);
    tree.nodes[n].offset = plane.offset;

    const float* base = store_->data();
    const std::size_t dim = store_->dimension();
    const Node& split_node = tree.nodes[n];
    const auto mid_it = std::partition(ids.begin(), ids.end(), [&](VectorId id) {
        return margin(split_node, base + id * dim) > 0.0;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - ids.begin());

    tree.nodes.emplace_back();
    const std::int32_t left = static_cast<std::int32_t>(tree.nodes.size() - 1);
    tree.nodes.emplace_back();
    const std::int32_t right = static_cast<std::int32_t>(tree.nodes.size() - 1);
    tree.nodes[n].left = left;
    tree.nodes[n].right = right;
    tree.nodes[left].parent = n;
    tree.nodes[right].parent = n;
    tree.nodes[left].ids.assign(ids.begin(), ids.begin() + mid);
    tree.nodes[right].ids.assign(ids.begin() + mid, ids.end());
    for (VectorId id : tree.nodes[left].ids) tree.leaf_of[id] = left;
    for (VectorId id : tree.nodes[right].ids) tree.leaf_of[id] = right;
}

void RpForest::route_insert(Tree& tree, Xoshiro256ss& rng, VectorId id) {
    const float* v = store_->vector(id).data();
    if (tree.root < 0) {
        tree.nodes.emplace_back();
        tree.root = static_cast<std::int32_t>(tree.nodes.size() - 1);
    }
    std::int32_t n = tree.root;
    while (!tree.nodes[n].leaf()) {
        n = margin(tree.nodes[n], v) > 0.0 ? tree.nodes[n].left : tree.nodes[n].right;
    }
    tree.nodes[n].ids.push_back(id);
    tree.leaf_of[id] = n;
    if (tree.nodes[n].ids.size() > params_.leaf_capacity) split_leaf(tree, rng, n);
}

void RpForest::insert(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("RpForest: insert before build");
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        if (trees_[t].leaf_of.count(id) != 0) {
            throw std::logic_error("RpForest: duplicate insert of id " + std::to_string(id));
        }
        route_insert(trees_[t], tree_rngs_[t], id);
    }
    ++events_since_rebuild_;
}

void RpForest::update(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("RpForest: update before build");
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        Tree& tree = trees_[t];
        auto it = tree.leaf_of.find(id);
        if (it == tree.leaf_of.end()) {
            throw std::logic_error("RpForest: updating unknown id " + std::to_string(id));
        }
        auto& ids = tree.nodes[it->second].ids;
        auto pos = std::find(ids.begin(), ids.end(), id);
        *pos = ids.back();
        ids.pop_back();
        tree.leaf_of.erase(it);
        route_insert(tree, tree_rngs_[t], id);
    }
    ++events_since_rebuild_;
}

void RpForest::rebuild_all() {
    ++generation_;
    ++forest_rebuilds_;
    build(*store_);
}

bool RpForest::maintain() {
    if (params_.rebuild_every == 0 || events_since_rebuild_ < params_.rebuild_every) return false;
    rebuild_all();
    return true;
}

NeighbourList RpForest::search(std::span<const float> query, std::size_t k) {
    if (store_ == nullptr) throw std::logic_error("RpForest: search before build");
    if (k == 0) throw std::invalid_argument("RpForest: k must be positive");
    const std::uint64_t budget = params_.search_k != 0
                                     ? params_.search_k
                                     : static_cast<std::uint64_t>(k) * params_.n_trees;
    if (budget < k) {
        throw std::invalid_argument("RpForest: search_k must be at least k");
    }
    last_candidates_ = 0;
    if (store_->empty()) return {};

    if (seen_.size() < store_->size()) seen_.resize(store_->size(), 0);
    ++epoch_;

    // One queue across all trees, keyed by the smallest |margin| along the
    // path so far; higher priority = deeper inside its region.  Ties break
    // on (tree, node) to keep traversal order deterministic.
    using Entry = std::tuple<double, std::uint32_t, std::int32_t>;
    auto lower_priority = [](const Entry& a, const Entry& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) > std::get<2>(b);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> frontier(lower_priority);
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        if (trees_[t].root >= 0) {
            frontier.emplace(std::numeric_limits<double>::infinity(), t, trees_[t].root);
        }
    }

    std::vector<VectorId> candidates;
    candidates.reserve(budget < 4096 ? budget : 4096);
    while (!frontier.empty() && last_candidates_ < budget) {
        const auto [priority, t, n] = frontier.top();
        frontier.pop();
        const Node& node = trees_[t].nodes[n];
        if (node.leaf()) {
            for (VectorId id : node.ids) {
                if (seen_[id] != epoch_) {
                    seen_[id] = epoch_;
                    candidates.push_back(id);
                    ++last_candidates_;
                }
            }
        } else {
            const double m = margin(node, query.data());
            frontier.emplace(std::min(priority, m), t, node.left);
            frontier.emplace(std::min(priority, -m), t, node.right);
        }
    }

    const std::size_t dim = store_->dimension();
    const float* base = store_->data();
    TopK top(k);
    for (VectorId id : candidates) {
        top.offer(id, squared_distance(query.data(), base + id * dim, dim));
    }
    return top.take();
}

std::size_t RpForest::memory_bytes() const {
    std::size_t total = sizeof(*this);
    for (const Tree& tree : trees_) {
        total += tree.nodes.capacity() * sizeof(Node);
        for (const Node& n : tree.nodes) {
            total += n.normal.capacity() * sizeof(float);
            total += n.ids.capacity() * sizeof(VectorId);
        }
        total += tree.leaf_of.bucket_count() * sizeof(void*);
        total += tree.leaf_of.size() * (sizeof(std::pair<VectorId, std::int32_t>) + 2 * sizeof(void*));
    }
    total += seen_.capacity() * sizeof(std::uint32_t);
    return total;
}

AuditReport RpForest::audit() const {
    AuditReport report;
    if (store_ == nullptr) return report;
    const float* base = store_->data();
    const std::size_t dim = store_->dimension();
    for (std::uint32_t t = 0; t < params_.n_trees; ++t) {
        const Tree& tree = trees_[t];
        if (tree.root < 0) {
            if (store_->size() != 0) report.flag("tree " + std::to_string(t) + " is empty");
            continue;
        }
        std::size_t seen = 0;
        std::vector<std::int32_t> stack{tree.root};
        while (!stack.empty()) {
            const std::int32_t n = stack.back();
            stack.pop_back();
            const Node& node = tree.nodes[n];
            if (!node.leaf()) {
                if (tree.nodes[node.left].parent != n || tree.nodes[node.right].parent != n) {
                    report.flag("parent mismatch in tree " + std::to_string(t));
                }
                stack.push_back(node.left);
                stack.push_back(node.right);
                continue;
            }
            seen += node.ids.size();
            for (VectorId id : node.ids) {
                auto it = tree.leaf_of.find(id);
                if (it == tree.leaf_of.end() || it->second != n) {
                    report.flag("leaf map disagrees in tree " + std::to_string(t) + " for id " +
                                std::to_string(id));
                }
                // Routing consistency through every ancestor plane.
                const float* v = base + id * dim;
                std::int32_t child = n;
                for (std::int32_t up = node.parent; up >= 0; up = tree.nodes[up].parent) {
                    const Node& anc = tree.nodes[up];
                    const bool left = margin(anc, v) > 0.0;
                    if ((left && anc.left != child) || (!left && anc.right != child)) {
                        report.flag("routing violation in tree " + std::to_string(t) + " for id " +
                                    std::to_string(id));
                        break;
                    }
                    child = up;
                }
            }
        }
        if (seen != store_->size()) {
            report.flag("tree " + std::to_string(t) + " holds " + std::to_string(seen) +
                        " ids, store has " + std::to_string(store_->size()));
        }
        if (tree.leaf_of.size() != store_->size()) {
            report.flag("tree " + std::to_string(t) + " leaf map size mismatch");
        }
    }
    return report;
}

}  // namespace dynann
