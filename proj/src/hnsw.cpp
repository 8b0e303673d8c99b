#include "dynann/hnsw.hpp"

#include <algorithm>

namespace dynann {

NeighbourList select_neighbours_heuristic(const DatasetStore& store, std::span<const float> base,
                                          const NeighbourList& candidates, std::size_t max_links) {
    (void)base;
    NeighbourList admitted;
    const std::size_t dim = store.dimension();
    const float* data = store.data();
    for (const Neighbour& c : candidates) {
        if (admitted.size() >= max_links) break;
        const float* cv = data + c.id * dim;
        bool keep = true;
        for (const Neighbour& a : admitted) {
            if (squared_distance(cv, data + a.id * dim, dim) <= c.distance_sq) {
                keep = false;  // closer to an admitted neighbour than to the base point
                break;
            }
        }
        if (keep) admitted.push_back(c);
    }
    return admitted;
}

Hnsw::Hnsw(HnswParams params, std::uint64_t seed)
    : params_(params),
      mL_(params.mL > 0.0 ? params.mL : 1.0 / std::log(static_cast<double>(params.M))),
      rng_(seed),
      seed_(seed) {
    if (params_.M < 2) throw std::invalid_argument("Hnsw: M must be at least 2");
    if (params_.ef_construction < params_.M) {
        throw std::invalid_argument("Hnsw: ef_construction must be at least M");
    }
}

double Hnsw::distance(VectorId a, std::span<const float> v) const {
    const std::size_t dim = store_->dimension();
    return squared_distance(store_->data() + a * dim, v.data(), dim);
}

void Hnsw::build(const DatasetStore& store) {
    store_ = &store;
    nodes_.clear();
    in0_.clear();
    strand_queue_.clear();
    entry_ = -1;
    top_level_ = -1;
    needs_sweep_ = false;
    updates_pending_ = false;
    rng_ = Xoshiro256ss(seed_);
    for (VectorId id = 0; id < store.size(); ++id) insert(id);
}

void Hnsw::note_gain(std::size_t layer, VectorId target) {
    if (layer != 0) return;
    if (target >= in0_.size()) in0_.resize(target + 1, 0);
    ++in0_[target];
}

void Hnsw::note_loss(std::size_t layer, VectorId target) {
    if (layer != 0) return;
    if (--in0_[target] == 0) {
        strand_queue_.push_back(target);
        needs_sweep_ = true;
    }
}

void Hnsw::set_own_links(VectorId id, std::size_t layer, const NeighbourList& selected) {
    auto& own = nodes_[id].links[layer];
    for (VectorId nb : own) note_loss(layer, nb);
    own.clear();
    own.reserve(selected.size());
    for (const Neighbour& nb : selected) {
        own.push_back(nb.id);
        note_gain(layer, nb.id);
    }
}

void Hnsw::add_backlink(VectorId host, std::size_t layer, VectorId id) {
    auto& back = nodes_[host].links[layer];
    if (std::find(back.begin(), back.end(), id) != back.end()) return;
    back.push_back(id);
    note_gain(layer, id);
    const std::size_t cap = max_links(layer);
    if (back.size() <= cap) return;
    const std::size_t dim = store_->dimension();
    const float* hv = store_->data() + host * dim;
    NeighbourList pool;
    pool.reserve(back.size());
    for (VectorId x : back) pool.push_back({x, squared_distance(hv, store_->data() + x * dim, dim)});
    sort_canonical(pool);
    NeighbourList kept = select_neighbours_heuristic(*store_, {hv, dim}, pool, cap);
    std::vector<VectorId> fresh;
    fresh.reserve(kept.size());
    for (const Neighbour& x : kept) fresh.push_back(x.id);
    for (VectorId x : back) {
        if (std::find(fresh.begin(), fresh.end(), x) == fresh.end()) note_loss(layer, x);
    }
    back = std::move(fresh);
}

void Hnsw::hand_over_entry(std::int64_t new_entry, int new_top) {
    const std::int64_t old = entry_;
    entry_ = new_entry;
    top_level_ = new_top;
    if (old < 0 || old == new_entry) return;
    const auto o = static_cast<std::size_t>(old);
    if (o < nodes_.size() && nodes_[o].level >= 0 && o < in0_.size() && in0_[o] == 0) {
        // The outgoing entry point never needed inbound edges; now it does.
        strand_queue_.push_back(static_cast<VectorId>(old));
        needs_sweep_ = true;
    }
}

VectorId Hnsw::greedy_descend(std::span<const float> query, VectorId from, int from_level,
                              int to_level) const {
    VectorId cur = from;
    double cur_d = distance(cur, query);
    for (int l = from_level; l > to_level; --l) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (VectorId nb : nodes_[cur].links[l]) {
                const double d = distance(nb, query);
                if (canonical_less({nb, d}, {cur, cur_d})) {
                    cur = nb;
                    cur_d = d;
                    changed = true;
                }
            }
        }
    }
    return cur;
}

void Hnsw::link_into_graph(VectorId id, std::span<const float> v, int level) {
    auto member_links = [this](VectorId n, std::size_t layer) -> const std::vector<VectorId>& {
        return nodes_[n].links[layer];
    };

    VectorId cur = static_cast<VectorId>(entry_);
    if (top_level_ > level) cur = greedy_descend(v, cur, top_level_, level);

    std::vector<VectorId> entries{cur};
    for (int l = std::min(level, top_level_); l >= 0; --l) {
        NeighbourList found = search_layer(*store_, v, entries, params_.ef_construction,
                                           static_cast<std::size_t>(l), member_links, visited_);
        // A node being relinked can reach itself through leftover one-way
        // edges; it must never become its own neighbour.
        std::erase_if(found, [id](const Neighbour& n) { return n.id == id; });

        NeighbourList selected = select_neighbours_heuristic(*store_, v, found, params_.M);
        set_own_links(id, static_cast<std::size_t>(l), selected);
        for (const Neighbour& nb : selected) add_backlink(nb.id, static_cast<std::size_t>(l), id);

        entries.clear();
        for (const Neighbour& n : found) entries.push_back(n.id);
        if (entries.empty()) entries.push_back(cur);
    }
}

void Hnsw::insert(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("Hnsw: insert before build");
    if (id >= nodes_.size()) nodes_.resize(id + 1);
    if (nodes_[id].level >= 0) {
        throw std::logic_error("Hnsw: duplicate insert of id " + std::to_string(id));
    }
    const int level = assign_level(rng_.uniform_open0(), mL_);
    nodes_[id].level = level;
    nodes_[id].links.assign(static_cast<std::size_t>(level) + 1, {});
    if (in0_.size() < nodes_.size()) in0_.resize(nodes_.size(), 0);

    if (entry_ < 0) {
        entry_ = static_cast<std::int64_t>(id);
        top_level_ = level;
        return;
    }
    link_into_graph(id, store_->vector(id), level);
    if (level > top_level_) hand_over_entry(static_cast<std::int64_t>(id), level);
}

void Hnsw::repair_node(VectorId id, std::size_t layer) {
    const std::span<const float> v = store_->vector(id);
    auto member_links = [this](VectorId n, std::size_t l) -> const std::vector<VectorId>& {
        return nodes_[n].links[l];
    };
    VectorId cur = static_cast<VectorId>(entry_);
    if (static_cast<std::size_t>(top_level_) > layer) {
        cur = greedy_descend(v, cur, top_level_, static_cast<int>(layer));
    }
    std::vector<VectorId> entries{cur};
    NeighbourList found =
        search_layer(*store_, v, entries, params_.ef_construction, layer, member_links, visited_);
    std::erase_if(found, [id](const Neighbour& n) { return n.id == id; });
    NeighbourList selected = select_neighbours_heuristic(*store_, v, found, params_.M);
    set_own_links(id, layer, selected);
    for (const Neighbour& nb : selected) add_backlink(nb.id, layer, id);
}

void Hnsw::update(VectorId id) {
    if (store_ == nullptr) throw std::logic_error("Hnsw: update before build");
    if (id >= nodes_.size() || nodes_[id].level < 0) {
        throw std::logic_error("Hnsw: updating unknown id " + std::to_string(id));
    }
    if (store_->size() == 1) return;  // sole node: the store overwrite is the whole story

    // Unlink: drop the node's edges with their reciprocals, remembering who
    // lost an edge so their lists can be repaired afterwards.
    Node& node = nodes_[id];
    std::vector<std::pair<std::size_t, VectorId>> former;
    for (std::size_t l = 0; l < node.links.size(); ++l) {
        for (VectorId nb : node.links[l]) {
            auto& back = nodes_[nb].links[l];
            auto pos = std::find(back.begin(), back.end(), id);
            if (pos != back.end()) {
                back.erase(pos);
                note_loss(l, id);
            }
            note_loss(l, nb);
            former.emplace_back(l, nb);
        }
        node.links[l].clear();
    }

    if (entry_ == static_cast<std::int64_t>(id)) {
        // The node being rewired cannot serve as the traversal entry point;
        // hand the role to the highest remaining node.
        std::int64_t replacement = -1;
        int best = -1;
        for (VectorId other = 0; other < nodes_.size(); ++other) {
            if (other == id || nodes_[other].level < 0) continue;
            if (nodes_[other].level > best) {
                best = nodes_[other].level;
                replacement = static_cast<std::int64_t>(other);
            }
        }
        entry_ = replacement;
        top_level_ = best;
    }

    // Reinsert at the originally drawn level (no fresh draw: the layer
    // assignment is a property of the node, and keeping it makes updates
    // cheaper and replay-stable).
    link_into_graph(id, store_->vector(id), node.level);
    if (node.level > top_level_) hand_over_entry(static_cast<std::int64_t>(id), node.level);

    std::sort(former.begin(), former.end());
    former.erase(std::unique(former.begin(), former.end()), former.end());
    const std::size_t floor_links = params_.M / 2;
    for (const auto& [layer, nb] : former) {
        if (nodes_[nb].links[layer].size() < floor_links) repair_node(nb, layer);
    }
    needs_sweep_ = true;
    updates_pending_ = true;
}

void Hnsw::force_inbound(VectorId id) {
    // Diversity pruning rejected every backlink the repair offered, so the
    // node still has no incoming layer-0 edge.  Claim one outright: append
    // to any nearby node with spare capacity, or failing that evict the
    // nearest node's farthest edge.  The evicted target's counter drops and
    // requeues it if that edge was its last, so the drain loop follows up.
    const std::span<const float> v = store_->vector(id);
    auto member_links = [this](VectorId n, std::size_t layer) -> const std::vector<VectorId>& {
        return nodes_[n].links[layer];
    };
    VectorId cur = static_cast<VectorId>(entry_);
    if (top_level_ > 0) cur = greedy_descend(v, cur, top_level_, 0);
    std::vector<VectorId> entries{cur};
    NeighbourList found =
        search_layer(*store_, v, entries, params_.ef_construction, 0, member_links, visited_);
    std::erase_if(found, [id](const Neighbour& n) { return n.id == id; });
    if (found.empty() && entry_ != static_cast<std::int64_t>(id)) {
        found.push_back({static_cast<VectorId>(entry_), distance(static_cast<VectorId>(entry_), v)});
    }
    for (const Neighbour& host : found) {
        auto& back = nodes_[host.id].links[0];
        if (std::find(back.begin(), back.end(), id) != back.end()) return;
        if (back.size() < max_links(0)) {
            back.push_back(id);
            note_gain(0, id);
            return;
        }
    }
    for (const Neighbour& host : found) {
        auto& back = nodes_[host.id].links[0];
        if (std::find(back.begin(), back.end(), id) != back.end()) return;
        const std::size_t dim = store_->dimension();
        const float* hv = store_->data() + host.id * dim;
        std::size_t worst = 0;
        Neighbour worst_n{back[0], squared_distance(hv, store_->data() + back[0] * dim, dim)};
        for (std::size_t i = 1; i < back.size(); ++i) {
            const Neighbour cand{back[i], squared_distance(hv, store_->data() + back[i] * dim, dim)};
            if (canonical_less(worst_n, cand)) {
                worst = i;
                worst_n = cand;
            }
        }
        note_loss(0, back[worst]);
        back[worst] = id;
        note_gain(0, id);
        return;
    }
}

bool Hnsw::drain_strands() {
    bool repaired = false;
    std::size_t budget = strand_queue_.size() * 4 + 64;
    while (!strand_queue_.empty() && budget-- > 0) {
        const VectorId id = strand_queue_.back();
        strand_queue_.pop_back();
        if (static_cast<std::int64_t>(id) == entry_) continue;
        if (id >= nodes_.size() || nodes_[id].level < 0) continue;
        if (in0_[id] != 0) continue;  // healed since it was queued
        for (int l = nodes_[id].level; l >= 0; --l) repair_node(id, static_cast<std::size_t>(l));
        if (in0_[id] == 0) force_inbound(id);
        repaired = true;
    }
    if (!strand_queue_.empty()) needs_sweep_ = true;
    return repaired;
}

bool Hnsw::maintain() {
    // A node whose layer-0 in-degree hit zero keeps outgoing links but no
    // search can ever reach it again.  The counters queued every such node
    // as the edges came off; relink them, forcing an inbound edge where the
    // neighbour heuristic alone would leave none.  Repair pruning can also
    // detach a group whose members still point at each other, which no
    // counter sees, so any maintain that touched the graph (and every
    // update-bearing block) ends with a reachability sweep from the entry
    // point that relinks whatever the counters missed.
    if (!needs_sweep_ || entry_ < 0) {
        needs_sweep_ = false;
        updates_pending_ = false;
        strand_queue_.clear();
        return false;
    }
    needs_sweep_ = false;
    const bool had_updates = updates_pending_;
    updates_pending_ = false;
    bool repaired_any = drain_strands();
    if (!had_updates && !repaired_any) return false;
    for (int pass = 0; pass < 8; ++pass) {
        std::vector<char> reached(nodes_.size(), 0);
        std::vector<VectorId> queue{static_cast<VectorId>(entry_)};
        reached[static_cast<std::size_t>(entry_)] = 1;
        while (!queue.empty()) {
            const VectorId cur = queue.back();
            queue.pop_back();
            for (VectorId nb : nodes_[cur].links[0]) {
                if (!reached[nb]) {
                    reached[nb] = 1;
                    queue.push_back(nb);
                }
            }
        }
        bool repaired_here = false;
        for (VectorId id = 0; id < nodes_.size(); ++id) {
            if (reached[id] || nodes_[id].level < 0) continue;
            for (int l = nodes_[id].level; l >= 0; --l) {
                repair_node(id, static_cast<std::size_t>(l));
            }
            if (in0_[id] == 0) force_inbound(id);
            repaired_here = true;
            repaired_any = true;
        }
        if (repaired_here) drain_strands();
        if (!repaired_here) break;
    }
    return repaired_any;
}

NeighbourList Hnsw::search(std::span<const float> query, std::size_t k) {
    if (store_ == nullptr) throw std::logic_error("Hnsw: search before build");
    if (k == 0) throw std::invalid_argument("Hnsw: k must be positive");
    if (entry_ < 0) return {};
    const std::size_t ef = params_.ef_search != 0 ? params_.ef_search : k;
    if (ef < k) throw std::invalid_argument("Hnsw: ef_search must be at least k");

    auto member_links = [this](VectorId n, std::size_t layer) -> const std::vector<VectorId>& {
        return nodes_[n].links[layer];
    };
    const VectorId start = greedy_descend(query, static_cast<VectorId>(entry_), top_level_, 0);
    std::vector<VectorId> entries{start};
    NeighbourList found = search_layer(*store_, query, entries, ef, 0, member_links, visited_);
    if (found.size() > k) found.resize(k);
    return found;
}

std::size_t Hnsw::memory_bytes() const {
    std::size_t total = sizeof(*this);
    total += nodes_.capacity() * sizeof(Node);
    for (const Node& n : nodes_) {
        total += n.links.capacity() * sizeof(std::vector<VectorId>);
        for (const auto& l : n.links) total += l.capacity() * sizeof(VectorId);
    }
    total += in0_.capacity() * sizeof(std::uint32_t);
    total += strand_queue_.capacity() * sizeof(VectorId);
    total += visited_.marks.capacity() * sizeof(std::uint32_t);
    return total;
}

AuditReport Hnsw::audit() const {
    AuditReport report;
    if (store_ == nullptr) return report;
    if (nodes_.size() != store_->size()) {
        report.flag("node table size " + std::to_string(nodes_.size()) + " vs store " +
                    std::to_string(store_->size()));
    }
    if (store_->empty()) return report;
    if (entry_ < 0 || static_cast<std::size_t>(entry_) >= nodes_.size()) {
        report.flag("missing entry point");
        return report;
    }
    if (nodes_[entry_].level != top_level_) report.flag("entry level disagrees with top level");

    for (VectorId id = 0; id < nodes_.size(); ++id) {
        const Node& node = nodes_[id];
        if (node.level < 0) {
            report.flag("node " + std::to_string(id) + " missing");
            continue;
        }
        if (node.level > top_level_) report.flag("node above top level");
        if (node.links.size() != static_cast<std::size_t>(node.level) + 1) {
            report.flag("layer list count mismatch at " + std::to_string(id));
            continue;
        }
        for (std::size_t l = 0; l < node.links.size(); ++l) {
            const auto& list = node.links[l];
            if (list.size() > max_links(l)) {
                report.flag("degree bound exceeded at node " + std::to_string(id) + " layer " +
                            std::to_string(l));
            }
            std::vector<VectorId> sorted(list.begin(), list.end());
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                report.flag("duplicate link at node " + std::to_string(id));
            }
            for (VectorId nb : list) {
                if (nb == id) {
                    report.flag("self link at node " + std::to_string(id));
                } else if (nb >= nodes_.size() || nodes_[nb].level < static_cast<int>(l)) {
                    report.flag("dangling link " + std::to_string(id) + " -> " + std::to_string(nb) +
                                " at layer " + std::to_string(l));
                }
            }
        }
    }

    // Directed reachability over layer 0 from the entry point.
    std::vector<char> reached(nodes_.size(), 0);
    std::vector<VectorId> queue{static_cast<VectorId>(entry_)};
    reached[entry_] = 1;
    std::size_t count = 0;
    while (!queue.empty()) {
        const VectorId cur = queue.back();
        queue.pop_back();
        ++count;
        for (VectorId nb : nodes_[cur].links[0]) {
            if (nb < nodes_.size() && !reached[nb]) {
                reached[nb] = 1;
                queue.push_back(nb);
            }
        }
    }
    if (count != nodes_.size()) {
        report.violations += nodes_.size() - count;
        report.notes.push_back(std::to_string(nodes_.size() - count) +
                               " nodes unreachable from entry on layer 0");
    }
    return report;
}

HnswStats Hnsw::stats() const {
    HnswStats out;
    out.top_level = top_level_;
    out.entry = entry_;
    out.nodes_per_level.assign(static_cast<std::size_t>(std::max(top_level_, -1)) + 1, 0);
    for (const Node& n : nodes_) {
        if (n.level < 0) continue;
        for (int l = 0; l <= n.level && l <= top_level_; ++l) ++out.nodes_per_level[l];
        ++out.layer0_degree_histogram[n.links.empty() ? 0 : n.links[0].size()];
    }
    return out;
}

}  // namespace dynann
