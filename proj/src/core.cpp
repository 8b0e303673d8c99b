#include "dynann/core.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dynann {

double squared_distance_checked(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("squared_distance: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    return squared_distance(a.data(), b.data(), a.size());
}

DatasetStore::DatasetStore(std::size_t dimension) : dim_(dimension) {
    if (dimension == 0) {
        throw std::invalid_argument("DatasetStore: dimension must be positive");
    }
}

std::span<const float> DatasetStore::vector(VectorId id) const {
    if (!contains(id)) {
        throw std::out_of_range("DatasetStore: unknown id " + std::to_string(id));
    }
    return {data_.data() + id * dim_, dim_};
}

VectorId DatasetStore::add(std::span<const float> v) {
    if (v.size() != dim_) {
        throw std::invalid_argument("DatasetStore::add: expected dimension " +
                                    std::to_string(dim_) + ", got " +
                                    std::to_string(v.size()));
    }
    data_.insert(data_.end(), v.begin(), v.end());
    const VectorId id = count_++;
    ++version_;
    return id;
}

void DatasetStore::overwrite(VectorId id, std::span<const float> v) {
    if (!contains(id)) {
        throw std::out_of_range("DatasetStore::overwrite: unknown id " + std::to_string(id));
    }
    if (v.size() != dim_) {
        throw std::invalid_argument("DatasetStore::overwrite: expected dimension " +
                                    std::to_string(dim_) + ", got " +
                                    std::to_string(v.size()));
    }
    std::copy(v.begin(), v.end(), data_.begin() + id * dim_);
    ++version_;
}

std::uint64_t DatasetStore::apply(const Event& e) {
    if (e.kind == Event::Kind::addition) {
        add(e.value);
    } else {
        overwrite(e.id, e.value);
    }
    return version_;
}

std::vector<VectorId> DatasetStore::snapshot_ids() const {
    std::vector<VectorId> ids(count_);
    for (std::size_t i = 0; i < count_; ++i) ids[i] = i;
    return ids;
}

std::size_t DatasetStore::memory_bytes() const {
    return data_.capacity() * sizeof(float) + sizeof(*this);
}

}  // namespace dynann
