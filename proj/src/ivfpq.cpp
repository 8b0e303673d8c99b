#include "dynann/ivfpq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dynann/kmeans.hpp"
#include "dynann/rng.hpp"

namespace dynann {

IvfPq::IvfPq(IvfPqParams params, std::uint64_t seed) : params_(params), seed_(seed) {
    if (params_.nbits < 1 || params_.nbits > 8) {
        throw std::invalid_argument("IvfPq: nbits must be in 1..8");
    }
    if (params_.m == 0) throw std::invalid_argument("IvfPq: m must be positive");
    if (params_.nprobe == 0) throw std::invalid_argument("IvfPq: nprobe must be positive");
}

void IvfPq::build(const DatasetStore& store) {
    store_ = &store;
    train(generation_);
}

void IvfPq::train(std::uint64_t salt) {
    const std::size_t n = store_->size();
    const std::size_t dim = store_->dimension();

    nlist_ = params_.nlist != 0
                 ? params_.nlist
                 : static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    if (nlist_ == 0) nlist_ = 1;
    // m must divide the dimension; fall back to the largest divisor <= m.
    m_ = std::min<std::uint32_t>(params_.m, static_cast<std::uint32_t>(dim));
    while (dim % m_ != 0) --m_;
    dsub_ = dim / m_;

    const std::size_t ksub_n = ksub();
    if (n < std::max<std::size_t>(nlist_, ksub_n)) {
        throw std::invalid_argument("IvfPq: need at least max(nlist, 2^nbits) = " +
                                    std::to_string(std::max<std::size_t>(nlist_, ksub_n)) +
                                    " training vectors, have " + std::to_string(n));
    }

    KMeansResult coarse = kmeans(store_->data(), n, dim, nlist_, mix_seed(seed_, salt * 1000 + 1));
    coarse_ = std::move(coarse.centroids);

    // Residuals against the assigned coarse centroid, regrouped per
    // subquantiser for the per-sub-space trainings.
    std::vector<float> residuals(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const float* v = store_->data() + i * dim;
        const float* c = coarse_.data() + coarse.assignment[i] * dim;
        for (std::size_t j = 0; j < dim; ++j) residuals[i * dim + j] = v[j] - c[j];
    }

    codebooks_.assign(static_cast<std::size_t>(m_) * ksub_n * dsub_, 0.0f);
    std::vector<float> sub(n * dsub_);
    for (std::uint32_t q = 0; q < m_; ++q) {
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(residuals.data() + i * dim + q * dsub_,
                      residuals.data() + i * dim + (q + 1) * dsub_, sub.data() + i * dsub_);
        }
        KMeansResult book = kmeans(sub.data(), n, dsub_, ksub_n, mix_seed(seed_, salt * 1000 + 2 + q));
        std::copy(book.centroids.begin(), book.centroids.end(),
                  codebooks_.begin() + static_cast<std::size_t>(q) * ksub_n * dsub_);
    }

    trained_ = true;
    list_ids_.assign(nlist_, {});
    list_codes_.assign(nlist_, {});
    list_of_.clear();
    for (std::size_t i = 0; i < n; ++i) append(static_cast<VectorId>(i), store_->data() + i * dim);
    events_since_train_ = 0;
}

std::uint32_t IvfPq::nearest_coarse(const float* v, double* out_dist) const {
    const std::size_t dim = store_->dimension();
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < nlist_; ++c) {
        const double d = squared_distance(v, coarse_.data() + static_cast<std::size_t>(c) * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (out_dist != nullptr) *out_dist = best_d;
    return best;
}

void IvfPq::encode(const float* v, std::uint32_t list, std::uint8_t* code_out) const {
    const std::size_t dim = store_->dimension();
    const float* c = coarse_.data() + static_cast<std::size_t>(list) * dim;
    const std::size_t ksub_n = ksub();
    for (std::uint32_t q = 0; q < m_; ++q) {
        double best_d = std::numeric_limits<double>::infinity();
        std::uint8_t best = 0;
        const float* book = codebooks_.data() + static_cast<std::size_t>(q) * ksub_n * dsub_;
        for (std::size_t t = 0; t < ksub_n; ++t) {
            double d = 0.0;
            for (std::size_t j = 0; j < dsub_; ++j) {
                const double r = static_cast<double>(v[q * dsub_ + j]) -
                                 static_cast<double>(c[q * dsub_ + j]);
                const double diff = r - static_cast<double>(book[t * dsub_ + j]);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::uint8_t>(t);
            }
        }
        code_out[q] = best;
    }
}

void IvfPq::append(VectorId id, const float* v) {
    const std::uint32_t list = nearest_coarse(v, nullptr);
    list_ids_[list].push_back(id);
    auto& codes = list_codes_[list];
    codes.resize(codes.size() + m_);
    encode(v, list, codes.data() + codes.size() - m_);
    list_of_[id] = list;
}

void IvfPq::remove(VectorId id) {
    auto it = list_of_.find(id);
    if (it == list_of_.end()) {
        throw std::logic_error("IvfPq: id " + std::to_string(id) + " not in any list");
    }
    const std::uint32_t list = it->second;
    auto& ids = list_ids_[list];
    auto& codes = list_codes_[list];
    const auto pos = std::find(ids.begin(), ids.end(), id);
    const std::size_t idx = static_cast<std::size_t>(pos - ids.begin());
    const std::size_t last = ids.size() - 1;
    ids[idx] = ids[last];
    ids.pop_back();
    std::copy(codes.begin() + last * m_, codes.begin() + (last + 1) * m_, codes.begin() + idx * m_);
    codes.resize(last * m_);
    list_of_.erase(it);
}

void IvfPq::insert(VectorId id) {
    if (!trained_) throw std::logic_error("IvfPq: insert before build");
    if (list_of_.count(id) != 0) {
        throw std::logic_error("IvfPq: duplicate insert of id " + std::to_string(id));
    }
    append(id, store_->vector(id).data());
    ++events_since_train_;
}

void IvfPq::update(VectorId id) {
    if (!trained_) throw std::logic_error("IvfPq: update before build");
    remove(id);
    append(id, store_->vector(id).data());
    ++events_since_train_;
}

bool IvfPq::maintain() {
    if (params_.retrain_every == 0 || events_since_train_ < params_.retrain_every) return false;
    ++generation_;
    ++retrains_;
    train(generation_);
    return true;
}

NeighbourList IvfPq::search(std::span<const float> query, std::size_t k) {
    if (!trained_) throw std::logic_error("IvfPq: search before build");
    if (k == 0) throw std::invalid_argument("IvfPq: k must be positive");
    const std::size_t dim = store_->dimension();
    if (query.size() != dim) throw std::invalid_argument("IvfPq: query dimension mismatch");
    last_scanned_codes_ = 0;

    const std::uint32_t nprobe = std::min(params_.nprobe, nlist_);
    std::vector<std::pair<double, std::uint32_t>> order(nlist_);
    for (std::uint32_t c = 0; c < nlist_; ++c) {
        order[c] = {squared_distance(query.data(), coarse_.data() + static_cast<std::size_t>(c) * dim, dim), c};
    }
    std::sort(order.begin(), order.end());

    const std::size_t ksub_n = ksub();
    table_.resize(static_cast<std::size_t>(m_) * ksub_n);
    residual_.resize(dim);

    const bool rerank = params_.exact_rerank;
    TopK top(rerank ? std::max<std::size_t>(4 * k, k) : k);
    for (std::uint32_t p = 0; p < nprobe; ++p) {
        const std::uint32_t list = order[p].second;
        const float* c = coarse_.data() + static_cast<std::size_t>(list) * dim;
        for (std::size_t j = 0; j < dim; ++j) residual_[j] = query[j] - c[j];
        // ADC table: squared distance from each query-residual sub-vector to
        // every codeword in that sub-space.
        for (std::uint32_t q = 0; q < m_; ++q) {
            const float* book = codebooks_.data() + static_cast<std::size_t>(q) * ksub_n * dsub_;
            for (std::size_t t = 0; t < ksub_n; ++t) {
                table_[q * ksub_n + t] =
                    squared_distance(residual_.data() + q * dsub_, book + t * dsub_, dsub_);
            }
        }
        const auto& ids = list_ids_[list];
        const auto& codes = list_codes_[list];
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::uint8_t* code = codes.data() + i * m_;
            double score = 0.0;
            for (std::uint32_t q = 0; q < m_; ++q) score += table_[q * ksub_n + code[q]];
            top.offer(ids[i], score);
        }
        last_scanned_codes_ += ids.size();
    }

    if (!rerank) return top.take();
    NeighbourList shortlist = top.take();
    TopK exact(k);
    const float* base = store_->data();
    for (const Neighbour& n : shortlist) {
        exact.offer(n.id, squared_distance(query.data(), base + n.id * dim, dim));
    }
    return exact.take();
}

std::vector<float> IvfPq::decode(VectorId id) const {
    if (!trained_) throw std::logic_error("IvfPq: decode before build");
    auto it = list_of_.find(id);
    if (it == list_of_.end()) throw std::out_of_range("IvfPq: unknown id " + std::to_string(id));
    const std::uint32_t list = it->second;
    const auto& ids = list_ids_[list];
    const std::size_t idx =
        static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
    const std::uint8_t* code = list_codes_[list].data() + idx * m_;

    const std::size_t dim = store_->dimension();
    const std::size_t ksub_n = ksub();
    std::vector<float> out(dim);
    const float* c = coarse_.data() + static_cast<std::size_t>(list) * dim;
    for (std::uint32_t q = 0; q < m_; ++q) {
        const float* word =
            codebooks_.data() + (static_cast<std::size_t>(q) * ksub_n + code[q]) * dsub_;
        for (std::size_t j = 0; j < dsub_; ++j) out[q * dsub_ + j] = c[q * dsub_ + j] + word[j];
    }
    return out;
}

void IvfPq::export_codebooks(const std::string& dir) const {
    if (!trained_) throw std::logic_error("IvfPq: export before build");
    const auto dump = [](const std::string& path, const std::vector<float>& data) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(path + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
        if (!out) throw std::runtime_error(path + ": write failed");
    };
    dump(dir + "/coarse_centroids.f32", coarse_);
    dump(dir + "/pq_codebooks.f32", codebooks_);
}

std::size_t IvfPq::memory_bytes() const {
    std::size_t total = sizeof(*this);
    total += coarse_.capacity() * sizeof(float);
    total += codebooks_.capacity() * sizeof(float);
    for (const auto& l : list_ids_) total += l.capacity() * sizeof(VectorId);
    for (const auto& l : list_codes_) total += l.capacity();
    total += list_ids_.capacity() * sizeof(std::vector<VectorId>);
    total += list_codes_.capacity() * sizeof(std::vector<std::uint8_t>);
    total += list_of_.bucket_count() * sizeof(void*);
    total += list_of_.size() * (sizeof(std::pair<VectorId, std::uint32_t>) + 2 * sizeof(void*));
    total += table_.capacity() * sizeof(double);
    total += residual_.capacity() * sizeof(float);
    return total;
}

AuditReport IvfPq::audit() const {
    AuditReport report;
    if (!trained_) return report;
    const std::size_t dim = store_->dimension();
    std::size_t held = 0;
    for (std::uint32_t list = 0; list < nlist_; ++list) {
        const auto& ids = list_ids_[list];
        if (list_codes_[list].size() != ids.size() * m_) {
            report.flag("code buffer length mismatch in list " + std::to_string(list));
        }
        held += ids.size();
        for (VectorId id : ids) {
            auto it = list_of_.find(id);
            if (it == list_of_.end() || it->second != list) {
                report.flag("list map disagrees for id " + std::to_string(id));
            }
            // Membership must equal the nearest-centroid assignment of the
            // vector as stored right now.
            const std::uint32_t expect = nearest_coarse(store_->data() + id * dim, nullptr);
            if (expect != list) {
                report.flag("id " + std::to_string(id) + " in list " + std::to_string(list) +
                            ", nearest centroid is " + std::to_string(expect));
            }
        }
    }
    if (held != store_->size() || list_of_.size() != store_->size()) {
        report.flag("lists hold " + std::to_string(held) + " ids, store has " +
                    std::to_string(store_->size()));
    }
    return report;
}

}  // namespace dynann
