#include "dynann/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace dynann {

KdTree::KdTree(KdTreeParams params) : params_(params) {
    if (params_.leaf_capacity == 0) {
        throw std::invalid_argument("KdTree: leaf_capacity must be positive");
    }
    if (!(params_.rebuild_imbalance >= 1.0)) {
        throw std::invalid_argument("KdTree: rebuild_imbalance must be >= 1");
    }
}

std::int32_t KdTree::alloc_node() {
    if (!free_nodes_.empty()) {
        const std::int32_t n = free_nodes_.back();
        free_nodes_.pop_back();
        nodes_[n] = Node{};
        return n;
    }
    nodes_.emplace_back();
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

void KdTree::free_node(std::int32_t n) {
    nodes_[n] = Node{};
    free_nodes_.push_back(n);
}

void KdTree::reset() {
    nodes_.clear();
    free_nodes_.clear();
    leaf_of_.clear();
    root_ = -1;
    last_leaves_visited_ = 0;
}

void KdTree::build(const DatasetStore& store) {
    store_ = &store;
    reset();
    std::vector<VectorId> ids = store.snapshot_ids();
    if (!ids.empty()) {
        root_ = build_subtree(ids, 0, ids.size(), -1);
    }
}

void KdTree::compute_box(Node& node, const std::vector<VectorId>& ids, std::size_t begin,
                         std::size_t end) const {
    const std::size_t dim = store_->dimension();
    const float* base = store_->data();
    node.box_min.assign(dim, std::numeric_limits<float>::max());
    node.box_max.assign(dim, std::numeric_limits<float>::lowest());
    for (std::size_t i = begin; i < end; ++i) {
        const float* v = base + ids[i] * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            node.box_min[d] = std::min(node.box_min[d], v[d]);
            node.box_max[d] = std::max(node.box_max[d], v[d]);
        }
    }
}

// Picks the maximum-variance dimension and a median threshold that puts at
// least one point on each side.  Returns false when the points are identical
// along every dimension, in which case the caller keeps an oversized leaf.
bool KdTree::choose_split(const std::vector<VectorId>& ids, std::size_t begin, std::size_t end,
                          std::uint32_t& dim, float& value) const {
    const std::size_t d = store_->dimension();
    const std::size_t n = end - begin;
    const float* base = store_->data();
    double best_var = -1.0;
    std::uint32_t best_dim = 0;
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double x = base[ids[i] * d + j];
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = sum_sq / static_cast<double>(n) - mean * mean;
        if (var > best_var) {
            best_var = var;
            best_dim = static_cast<std::uint32_t>(j);
        }
    }

    std::vector<float> values(n);
    for (std::size_t i = begin; i < end; ++i) {
        values[i - begin] = base[ids[i] * d + best_dim];
    }
    std::sort(values.begin(), values.end());
    float threshold = values[n / 2];
    if (threshold == values.front()) {
        // The median equals the minimum (duplicate-heavy data); move the
        // threshold up to the first strictly larger value so the left side
        // (x < threshold) is non-empty.
        auto it = std::upper_bound(values.begin(), values.end(), threshold);
        if (it == values.end()) return false;  // constant along the chosen dimension
        threshold = *it;
    }
    dim = best_dim;
    value = threshold;
    return true;
}

std::int32_t KdTree::build_subtree(std::vector<VectorId>& ids, std::size_t begin, std::size_t end,
                                   std::int32_t parent) {
    const std::int32_t n = alloc_node();
    nodes_[n].parent = parent;
    nodes_[n].count = static_cast<std::uint32_t>(end - begin);
    compute_box(nodes_[n], ids, begin, end);

    std::uint32_t dim = 0;
    float value = 0.0f;
    if (end - begin <= params_.leaf_capacity ||
        !choose_split(ids, begin, end, dim, value)) {
        nodes_[n].ids.assign(ids.begin() + begin, ids.begin() + end);
        for (std::size_t i = begin; i < end; ++i) leaf_of_[ids[i]] = n;
        return n;
    }

    const float* base = store_->data();
    const auto mid_it = std::partition(ids.begin() + begin, ids.begin() + end, [&](VectorId id) {
        return base[id * store_->dimension() + dim] < value;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - ids.begin());
    nodes_[n].split_dim = dim;
    nodes_[n].split_value = value;
    const std::int32_t left = build_subtree(ids, begin, mid, n);
    const std::int32_t right = build_subtree(ids, mid, end, n);
    nodes_[n].left = left;
    nodes_[n].right = right;
    return n;
}

void KdTree::insert(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("KdTree: insert before build");
    insert_routed(id);
    auto it = leaf_of_.find(id);
    if (it != leaf_of_.end()) rebalance_path(it->second);
}

void KdTree::insert_routed(VectorId id) {
    const float* v = store_->vector(id).data();
    const std::size_t dim = store_->dimension();
    if (root_ < 0) {
        root_ = alloc_node();
        Node& r = nodes_[root_];
        r.count = 1;
        r.box_min.assign(v, v + dim);
        r.box_max.assign(v, v + dim);
        r.ids.push_back(id);
        leaf_of_[id] = root_;
        return;
    }
    std::int32_t n = root_;
    for (;;) {
        Node& node = nodes_[n];
        node.count += 1;
        for (std::size_t d = 0; d < dim; ++d) {
            node.box_min[d] = std::min(node.box_min[d], v[d]);
            node.box_max[d] = std::max(node.box_max[d], v[d]);
        }
        if (node.leaf()) break;
        n = v[node.split_dim] < node.split_value ? node.left : node.right;
    }
    nodes_[n].ids.push_back(id);
    leaf_of_[id] = n;
    if (nodes_[n].ids.size() > params_.leaf_capacity) split_leaf(n);
}

void KdTree::split_leaf(std::int32_t n) {
    std::uint32_t dim = 0;
    float value = 0.0f;
    if (!choose_split(nodes_[n].ids, 0, nodes_[n].ids.size(), dim, value)) {
        return;  // identical points; the leaf stays oversized
    }
    std::vector<VectorId> ids = std::move(nodes_[n].ids);
    nodes_[n].ids.clear();
    const float* base = store_->data();
    const std::size_t d = store_->dimension();
    const auto mid_it = std::partition(ids.begin(), ids.end(), [&](VectorId id) {
        return base[id * d + dim] < value;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - ids.begin());

    const std::int32_t left = alloc_node();
    const std::int32_t right = alloc_node();
    // alloc_node may reallocate nodes_, so take the parent reference last.
    Node& parent = nodes_[n];
    parent.split_dim = dim;
    parent.split_value = value;
    parent.left = left;
    parent.right = right;

    nodes_[left].parent = n;
    nodes_[left].count = static_cast<std::uint32_t>(mid);
    nodes_[left].ids.assign(ids.begin(), ids.begin() + mid);
    compute_box(nodes_[left], nodes_[left].ids, 0, nodes_[left].ids.size());
    for (VectorId id : nodes_[left].ids) leaf_of_[id] = left;

    nodes_[right].parent = n;
    nodes_[right].count = static_cast<std::uint32_t>(ids.size() - mid);
    nodes_[right].ids.assign(ids.begin() + mid, ids.end());
    compute_box(nodes_[right], nodes_[right].ids, 0, nodes_[right].ids.size());
    for (VectorId id : nodes_[right].ids) leaf_of_[id] = right;
}

void KdTree::remove(VectorId id) {
    auto it = leaf_of_.find(id);
    if (it == leaf_of_.end()) throw std::logic_error("KdTree: removing id not in tree");
    const std::int32_t leaf = it->second;
    leaf_of_.erase(it);
    auto& ids = nodes_[leaf].ids;
    ids.erase(std::find(ids.begin(), ids.end(), id));
    for (std::int32_t n = leaf; n >= 0; n = nodes_[n].parent) nodes_[n].count -= 1;

    if (!ids.empty() || leaf == root_) return;
    // Splice the empty leaf out: its parent is replaced by the sibling so
    // internal nodes keep two non-empty children.
    const std::int32_t parent = nodes_[leaf].parent;
    const std::int32_t sibling =
        nodes_[parent].left == leaf ? nodes_[parent].right : nodes_[parent].left;
    const std::int32_t grand = nodes_[parent].parent;
    nodes_[sibling].parent = grand;
    if (grand < 0) {
        root_ = sibling;
    } else if (nodes_[grand].left == parent) {
        nodes_[grand].left = sibling;
    } else {
        nodes_[grand].right = sibling;
    }
    free_node(parent);
    free_node(leaf);
}

void KdTree::update(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("KdTree: update before build");
    remove(id);
    insert_routed(id);
    auto it = leaf_of_.find(id);
    if (it != leaf_of_.end()) rebalance_path(it->second);
}

void KdTree::collect_ids(std::int32_t n, std::vector<VectorId>& out) const {
    const Node& node = nodes_[n];
    if (node.leaf()) {
        out.insert(out.end(), node.ids.begin(), node.ids.end());
        return;
    }
    collect_ids(node.left, out);
    collect_ids(node.right, out);
}

// Walks from the root towards `leaf` and rebuilds the highest subtree whose
// sibling sizes are out of ratio.  One rebuild per call keeps the amortised
// cost bounded.
void KdTree::rebalance_path(std::int32_t leaf) {
    std::vector<std::int32_t> path;
    for (std::int32_t n = leaf; n >= 0; n = nodes_[n].parent) path.push_back(n);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        const Node& node = nodes_[*it];
        if (node.leaf()) continue;
        const double lo = static_cast<double>(std::min(nodes_[node.left].count, nodes_[node.right].count));
        const double hi = static_cast<double>(std::max(nodes_[node.left].count, nodes_[node.right].count));
        if (lo == 0.0 || hi / lo > params_.rebuild_imbalance) {
            rebuild_subtree(*it);
            return;
        }
    }
}

void KdTree::rebuild_subtree(std::int32_t n) {
    std::vector<VectorId> ids;
    ids.reserve(nodes_[n].count);
    collect_ids(n, ids);
    const std::int32_t parent = nodes_[n].parent;

    // Free the old subtree before building the replacement.
    std::vector<std::int32_t> stack{n};
    while (!stack.empty()) {
        const std::int32_t cur = stack.back();
        stack.pop_back();
        if (!nodes_[cur].leaf()) {
            stack.push_back(nodes_[cur].left);
            stack.push_back(nodes_[cur].right);
        }
        free_node(cur);
    }

    const std::int32_t fresh = build_subtree(ids, 0, ids.size(), parent);
    if (parent < 0) {
        root_ = fresh;
    } else if (nodes_[parent].left == n) {
        nodes_[parent].left = fresh;
    } else {
        nodes_[parent].right = fresh;
    }
    ++subtree_rebuilds_;
}

double KdTree::box_distance(const Node& node, const float* query) const {
    const std::size_t dim = store_->dimension();
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double q = query[d];
        double gap = 0.0;
        if (q < node.box_min[d]) {
            gap = node.box_min[d] - q;
        } else if (q > node.box_max[d]) {
            gap = q - node.box_max[d];
        }
        acc += gap * gap;
    }
    return acc;
}

NeighbourList KdTree::search(std::span<const float> query, std::size_t k) {
    if (store_ == nullptr) throw std::logic_error("KdTree: search before build");
    if (k == 0) throw std::invalid_argument("KdTree: k must be positive");
    last_leaves_visited_ = 0;
    if (root_ < 0) return {};

    // Best-first branch and bound over box lower bounds; ties resolved on
    // node index so traversal order is deterministic.
    using Entry = std::pair<double, std::int32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
    frontier.emplace(box_distance(nodes_[root_], query.data()), root_);

    const std::size_t dim = store_->dimension();
    const float* base = store_->data();
    TopK top(k);
    while (!frontier.empty()) {
        const auto [bound, n] = frontier.top();
        frontier.pop();
        if (top.full() && bound > top.worst().distance_sq) break;
        const Node& node = nodes_[n];
        if (node.leaf()) {
            for (VectorId id : node.ids) {
                top.offer(id, squared_distance(query.data(), base + id * dim, dim));
            }
            ++last_leaves_visited_;
            if (params_.max_leaves_visited != 0 &&
                last_leaves_visited_ >= params_.max_leaves_visited) {
                break;
            }
        } else {
            frontier.emplace(box_distance(nodes_[node.left], query.data()), node.left);
            frontier.emplace(box_distance(nodes_[node.right], query.data()), node.right);
        }
    }
    return top.take();
}

std::size_t KdTree::leaf_count() const {
    std::size_t leaves = 0;
    if (root_ < 0) return 0;
    std::vector<std::int32_t> stack{root_};
    while (!stack.empty()) {
        const std::int32_t n = stack.back();
        stack.pop_back();
        if (nodes_[n].leaf()) {
            ++leaves;
        } else {
            stack.push_back(nodes_[n].left);
            stack.push_back(nodes_[n].right);
        }
    }
    return leaves;
}

std::size_t KdTree::memory_bytes() const {
    std::size_t total = sizeof(*this);
    total += nodes_.capacity() * sizeof(Node);
    for (const Node& n : nodes_) {
        total += (n.box_min.capacity() + n.box_max.capacity()) * sizeof(float);
        total += n.ids.capacity() * sizeof(VectorId);
    }
    total += free_nodes_.capacity() * sizeof(std::int32_t);
    // unordered_map footprint estimate: buckets plus one allocation per entry.
    total += leaf_of_.bucket_count() * sizeof(void*);
    total += leaf_of_.size() * (sizeof(std::pair<VectorId, std::int32_t>) + 2 * sizeof(void*));
    return total;
}

AuditReport KdTree::audit() const {
    AuditReport report;
    if (root_ < 0) {
        if (store_ != nullptr && store_->size() != 0 && !leaf_of_.empty()) {
            report.flag("empty tree but leaf map non-empty");
        }
        return report;
    }
    const std::size_t dim = store_->dimension();
    std::size_t seen = 0;

    struct Frame {
        std::int32_t node;
    };
    std::vector<Frame> stack{{root_}};
    if (nodes_[root_].parent != -1) report.flag("root has a parent");
    while (!stack.empty()) {
        const std::int32_t n = stack.back().node;
        stack.pop_back();
        const Node& node = nodes_[n];
        if (node.leaf()) {
            if (node.count != node.ids.size()) {
                report.flag("leaf count mismatch at node " + std::to_string(n));
            }
            seen += node.ids.size();
            for (VectorId id : node.ids) {
                auto it = leaf_of_.find(id);
                if (it == leaf_of_.end() || it->second != n) {
                    report.flag("leaf map disagrees for id " + std::to_string(id));
                }
                const float* v = store_->vector(id).data();
                for (std::size_t d = 0; d < dim; ++d) {
                    if (v[d] < node.box_min[d] || v[d] > node.box_max[d]) {
                        report.flag("point outside leaf box at id " + std::to_string(id));
                        break;
                    }
                }
                // Check routing consistency against every ancestor plane.
                std::int32_t child = n;
                for (std::int32_t up = node.parent; up >= 0; up = nodes_[up].parent) {
                    const Node& anc = nodes_[up];
                    const bool goes_left = v[anc.split_dim] < anc.split_value;
                    if ((goes_left && anc.left != child) || (!goes_left && anc.right != child)) {
                        report.flag("routing violation for id " + std::to_string(id));
                        break;
                    }
                    child = up;
                }
            }
        } else {
            if (node.right < 0) {
                report.flag("internal node with one child at " + std::to_string(n));
                continue;
            }
            if (nodes_[node.left].count == 0 || nodes_[node.right].count == 0) {
                report.flag("internal node with empty child at " + std::to_string(n));
            }
            if (node.count != nodes_[node.left].count + nodes_[node.right].count) {
                report.flag("count mismatch at node " + std::to_string(n));
            }
            if (nodes_[node.left].parent != n || nodes_[node.right].parent != n) {
                report.flag("parent pointer mismatch at node " + std::to_string(n));
            }
            stack.push_back({node.left});
            stack.push_back({node.right});
        }
    }
    if (store_ != nullptr && seen != store_->size()) {
        report.flag("tree holds " + std::to_string(seen) + " ids, store has " +
                    std::to_string(store_->size()));
    }
    return report;
}

}  // namespace dynann
