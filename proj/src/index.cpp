#include "dynann/index.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "dynann/baseline.hpp"
#include "dynann/hnsw.hpp"
#include "dynann/ivfpq.hpp"
#include "dynann/kdtree.hpp"
#include "dynann/rpforest.hpp"

namespace dynann {

namespace {

[[noreturn]] void bad_param(const std::string& name, const char* expected) {
    throw std::invalid_argument("parameter '" + name + "' must be " + expected);
}

void check_known(const std::string& method, const ParamMap& params,
                 std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : params) {
        if (ok.count(key) == 0) {
            throw std::invalid_argument("unknown parameter '" + key + "' for method '" + method +
                                        "'");
        }
    }
}

std::int64_t require_nonneg(const std::string& name, std::int64_t v) {
    if (v < 0) bad_param(name, "non-negative");
    return v;
}

}  // namespace

std::int64_t param_int(const ParamMap& params, const std::string& name, std::int64_t fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    bad_param(name, "an integer");
}

double param_double(const ParamMap& params, const std::string& name, double fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*v);
    bad_param(name, "a number");
}

bool param_bool(const ParamMap& params, const std::string& name, bool fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (const auto* v = std::get_if<bool>(&it->second)) return *v;
    bad_param(name, "a boolean");
}

std::string format_params(const ParamMap& params) {
    std::ostringstream out;
    bool first = true;
    for (const auto& [key, value] : params) {
        if (!first) out << ';';
        first = false;
        out << key << '=';
        std::visit(
            [&out](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, bool>) {
                    out << (v ? "true" : "false");
                } else {
                    out << v;
                }
            },
            value);
    }
    return out.str();
}

namespace {

// Adapts the subset scanner to the index contract.  The store itself is the
// structure, so events are free and searches rescan whatever is current.
class BaselineIndex : public DynamicIndex {
public:
    BaselineIndex(double p, bool rotate, std::uint64_t seed)
        : scanner_(p, seed, rotate) {}

    std::string name() const override { return "baseline"; }

    void build(const DatasetStore& store) override { store_ = &store; }
    void insert(VectorId) override {}
    void update(VectorId) override {}

    NeighbourList search(std::span<const float> query, std::size_t k) override {
        if (store_ == nullptr) throw std::logic_error("baseline: search before build");
        return scanner_.search(*store_, query, k);
    }

    std::size_t memory_bytes() const override { return sizeof(*this); }

private:
    SubsetScanner scanner_;
    const DatasetStore* store_ = nullptr;
};

}  // namespace

std::unique_ptr<DynamicIndex> make_index(const std::string& method, const ParamMap& params,
                                         std::uint64_t seed) {
    if (method == "baseline") {
        check_known(method, params, {"p", "rotate"});
        const double p = param_double(params, "p", 1.0);
        return std::make_unique<BaselineIndex>(p, param_bool(params, "rotate", true), seed);
    }
    if (method == "kdtree") {
        check_known(method, params, {"leaf_capacity", "max_leaves_visited", "rebuild_imbalance"});
        KdTreeParams kp;
        const std::int64_t leaf = param_int(params, "leaf_capacity", 32);
        if (leaf < 1) bad_param("leaf_capacity", "at least 1");
        kp.leaf_capacity = static_cast<std::size_t>(leaf);
        kp.max_leaves_visited = static_cast<std::size_t>(
            require_nonneg("max_leaves_visited", param_int(params, "max_leaves_visited", 0)));
        kp.rebuild_imbalance = param_double(params, "rebuild_imbalance", 4.0);
        if (kp.rebuild_imbalance <= 1.0) bad_param("rebuild_imbalance", "greater than 1");
        return std::make_unique<KdTree>(kp);
    }
    if (method == "rpforest") {
        check_known(method, params, {"n_trees", "leaf_capacity", "search_k", "rebuild_every"});
        RpForestParams rp;
        const std::int64_t trees = param_int(params, "n_trees", 10);
        if (trees < 1) bad_param("n_trees", "at least 1");
        rp.n_trees = static_cast<std::size_t>(trees);
        const std::int64_t leaf = param_int(params, "leaf_capacity", 32);
        if (leaf < 1) bad_param("leaf_capacity", "at least 1");
        rp.leaf_capacity = static_cast<std::size_t>(leaf);
        rp.search_k =
            static_cast<std::size_t>(require_nonneg("search_k", param_int(params, "search_k", 0)));
        rp.rebuild_every = static_cast<std::uint64_t>(
            require_nonneg("rebuild_every", param_int(params, "rebuild_every", 0)));
        return std::make_unique<RpForest>(rp, seed);
    }
    if (method == "hnsw") {
        check_known(method, params, {"M", "ef_construction", "ef_search", "mL"});
        HnswParams hp;
        const std::int64_t m = param_int(params, "M", 16);
        if (m < 2) bad_param("M", "at least 2");
        hp.M = static_cast<std::size_t>(m);
        const std::int64_t efc = param_int(params, "ef_construction", 200);
        if (efc < 1) bad_param("ef_construction", "at least 1");
        hp.ef_construction = static_cast<std::size_t>(efc);
        hp.ef_search = static_cast<std::size_t>(
            require_nonneg("ef_search", param_int(params, "ef_search", 0)));
        hp.mL = param_double(params, "mL", 0.0);
        if (hp.mL < 0.0) bad_param("mL", "non-negative");
        return std::make_unique<Hnsw>(hp, seed);
    }
    if (method == "ivfpq") {
        check_known(method, params,
                    {"nlist", "m", "nbits", "nprobe", "retrain_every", "exact_rerank"});
        IvfPqParams ip;
        ip.nlist =
            static_cast<std::uint32_t>(require_nonneg("nlist", param_int(params, "nlist", 0)));
        const std::int64_t m = param_int(params, "m", 8);
        if (m < 1) bad_param("m", "at least 1");
        ip.m = static_cast<std::uint32_t>(m);
        const std::int64_t nbits = param_int(params, "nbits", 8);
        if (nbits < 1 || nbits > 8) bad_param("nbits", "in 1..8");
        ip.nbits = static_cast<std::uint32_t>(nbits);
        const std::int64_t nprobe = param_int(params, "nprobe", 1);
        if (nprobe < 1) bad_param("nprobe", "at least 1");
        ip.nprobe = static_cast<std::uint32_t>(nprobe);
        ip.retrain_every = static_cast<std::uint64_t>(
            require_nonneg("retrain_every", param_int(params, "retrain_every", 0)));
        ip.exact_rerank = param_bool(params, "exact_rerank", false);
        return std::make_unique<IvfPq>(ip, seed);
    }
    throw std::invalid_argument("unknown method '" + method + "'");
}

std::vector<std::string> known_methods() {
    return {"baseline", "kdtree", "rpforest", "hnsw", "ivfpq"};
}

}  // namespace dynann
