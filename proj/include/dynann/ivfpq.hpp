#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynann/index.hpp"

namespace dynann {

struct IvfPqParams {
    std::uint32_t nlist = 0;    // coarse clusters; 0 = ceil(sqrt(N)) at build time
    std::uint32_t m = 8;        // subquantisers; clamped to the largest divisor of dim <= m
    std::uint32_t nbits = 8;    // bits per code, 1..8
    std::uint32_t nprobe = 1;   // coarse lists scanned per query
    std::uint64_t retrain_every = 0;  // events between codebook retrains; 0 = never
    bool exact_rerank = false;  // optional exact rerank of the ADC shortlist
};

// Inverted-file index with product-quantised residuals.  Vectors live in
// the list of their nearest coarse centroid as m-byte codes; queries scan
// nprobe lists with per-list ADC tables.  Events re-encode against the
// codebooks trained at build time until the retrain_every counter triggers
// a full retrain (which preserves the id set).
class IvfPq : public DynamicIndex {
public:
    IvfPq(IvfPqParams params, std::uint64_t seed);

    std::string name() const override { return "ivfpq"; }
    void build(const DatasetStore& store) override;
    void insert(VectorId id) override;
    void update(VectorId id) override;
    NeighbourList search(std::span<const float> query, std::size_t k) override;
    bool maintain() override;
    std::size_t memory_bytes() const override;
    AuditReport audit() const override;

    bool trained() const { return trained_; }
    std::uint32_t nlist() const { return nlist_; }
    std::uint32_t m() const { return m_; }
    std::uint32_t ksub() const { return 1u << params_.nbits; }
    std::uint64_t last_scanned_codes() const { return last_scanned_codes_; }
    std::uint64_t retrains() const { return retrains_; }

    // Reconstructs the stored approximation of an id from its code.
    std::vector<float> decode(VectorId id) const;

    // Raw little-endian float32 blobs: <dir>/coarse_centroids.f32 holds
    // nlist x dim floats, <dir>/pq_codebooks.f32 holds m x 2^nbits x (dim/m)
    // floats, both row-major in that order.
    void export_codebooks(const std::string& dir) const;

private:
    void train(std::uint64_t salt);
    std::uint32_t nearest_coarse(const float* v, double* out_dist) const;
    void encode(const float* v, std::uint32_t list, std::uint8_t* code_out) const;
    void append(VectorId id, const float* v);
    void remove(VectorId id);

    IvfPqParams params_;
    std::uint64_t seed_;
    const DatasetStore* store_ = nullptr;
    bool trained_ = false;
    std::uint32_t nlist_ = 0;
    std::uint32_t m_ = 0;
    std::size_t dsub_ = 0;

    std::vector<float> coarse_;     // nlist x dim
    std::vector<float> codebooks_;  // m x ksub x dsub

    std::vector<std::vector<VectorId>> list_ids_;
    std::vector<std::vector<std::uint8_t>> list_codes_;  // m bytes per entry, parallel to list_ids_
    std::unordered_map<VectorId, std::uint32_t> list_of_;

    std::uint64_t events_since_train_ = 0;
    std::uint64_t generation_ = 0;
    std::uint64_t retrains_ = 0;
    std::uint64_t last_scanned_codes_ = 0;

    // Per-query scratch.
    std::vector<double> table_;
    std::vector<float> residual_;
};

}  // namespace dynann
