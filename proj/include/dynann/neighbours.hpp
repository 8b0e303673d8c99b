#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dynann/core.hpp"

namespace dynann {

struct Neighbour {
    VectorId id = 0;
    double distance_sq = 0.0;
};

// The one tie rule used everywhere: ascending squared distance, then
// ascending id.  Every search result in the project is sorted by this order,
// which is what makes exact methods comparable id-for-id.
inline bool canonical_less(const Neighbour& a, const Neighbour& b) {
    if (a.distance_sq != b.distance_sq) return a.distance_sq < b.distance_sq;
    return a.id < b.id;
}

using NeighbourList = std::vector<Neighbour>;

inline void sort_canonical(NeighbourList& list) {
    std::sort(list.begin(), list.end(), canonical_less);
}

// Bounded accumulator for the k best candidates seen so far, with the
// canonical tie rule.  Implemented as a max-heap on (distance, id) so that
// offer() is O(log k) and worst() is O(1).
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) {}

    std::size_t capacity() const { return k_; }
    std::size_t size() const { return heap_.size(); }
    bool full() const { return heap_.size() == k_; }

    // The current k-th best entry; only meaningful when full().
    const Neighbour& worst() const { return heap_.front(); }

    // True if a candidate at this (distance, id) would be accepted.
    bool would_accept(double distance_sq, VectorId id) const {
        if (heap_.size() < k_) return true;
        return canonical_less({id, distance_sq}, heap_.front());
    }

    void offer(VectorId id, double distance_sq) {
        if (heap_.size() < k_) {
            heap_.push_back({id, distance_sq});
            std::push_heap(heap_.begin(), heap_.end(), canonical_less);
        } else if (canonical_less({id, distance_sq}, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), canonical_less);
            heap_.back() = {id, distance_sq};
            std::push_heap(heap_.begin(), heap_.end(), canonical_less);
        }
    }

    // Drains the heap into a canonically sorted list.
    NeighbourList take() {
        NeighbourList out = std::move(heap_);
        heap_.clear();
        sort_canonical(out);
        return out;
    }

private:
    std::size_t k_;
    NeighbourList heap_;
};

}  // namespace dynann
