#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dynann {

using VectorId = std::uint64_t;

// Squared Euclidean distance.  Inputs are float32 but the accumulation runs
// in double so the result does not depend on how a compiler chooses to
// associate a float sum.  Square roots are never taken anywhere in the
// project; all comparisons and reported distances are in the squared metric.
inline double squared_distance(const float* a, const float* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

// A single mutation of the dataset.  Additions append a fresh vector and are
// assigned the next dense id; updates overwrite the payload of an existing id
// in place.
struct Event {
    enum class Kind : std::uint8_t { addition = 0, update = 1 };

    Kind kind = Kind::addition;
    VectorId id = 0;  // meaningful for updates only
    std::vector<float> value;

    static Event addition(std::vector<float> v) {
        Event e;
        e.kind = Kind::addition;
        e.value = std::move(v);
        return e;
    }

    static Event update(VectorId id, std::vector<float> v) {
        Event e;
        e.kind = Kind::update;
        e.id = id;
        e.value = std::move(v);
        return e;
    }
};

// Flat, append-only vector store.  Ids are dense (0..size-1) and never
// reused; updates overwrite in place.  Every mutation bumps
// snapshot_version(), which downstream caches use as part of their keys.
class DatasetStore {
public:
    explicit DatasetStore(std::size_t dimension);

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    std::uint64_t snapshot_version() const { return version_; }

    bool contains(VectorId id) const { return id < count_; }

    std::span<const float> vector(VectorId id) const;
    const float* data() const { return data_.data(); }

    VectorId add(std::span<const float> v);
    void overwrite(VectorId id, std::span<const float> v);

    // Applies one event (routing on its kind) and returns the new version.
    std::uint64_t apply(const Event& e);

    std::vector<VectorId> snapshot_ids() const;

    std::size_t memory_bytes() const;

private:
    std::size_t dim_;
    std::size_t count_ = 0;
    std::uint64_t version_ = 0;
    std::vector<float> data_;
};

double squared_distance_checked(std::span<const float> a, std::span<const float> b);

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
    return squared_distance_checked(a, b);
}

}  // namespace dynann
