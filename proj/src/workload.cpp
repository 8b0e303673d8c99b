#include "dynann/workload.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dynann/baseline.hpp"
#include "dynann/io.hpp"
#include "dynann/rng.hpp"

namespace dynann {

namespace {

void check_pool_dim(const std::vector<std::vector<float>>& pool, std::size_t needed,
                    const char* who) {
    if (pool.size() < needed) {
        throw std::invalid_argument(std::string(who) + ": pool holds " +
                                    std::to_string(pool.size()) + " vectors, need " +
                                    std::to_string(needed));
    }
    if (needed > 0 && pool.front().empty()) {
        throw std::invalid_argument(std::string(who) + ": zero-dimensional pool");
    }
    for (const auto& v : pool) {
        if (v.size() != pool.front().size()) {
            throw std::invalid_argument(std::string(who) + ": ragged pool");
        }
    }
}

}  // namespace

WorkloadScript gen_odc(const std::vector<std::vector<float>>& pool, std::size_t n0,
                       std::size_t n_events, std::size_t event_batch, std::size_t search_batch,
                       std::uint64_t seed) {
    if (event_batch == 0 || search_batch == 0) {
        throw std::invalid_argument("gen_odc: batch sizes must be positive");
    }
    if (event_batch != search_batch) {
        // Each query becomes the very next addition, so the two block sizes
        // must line up at generation time; other interleavings are produced
        // by reschedule() on top of this script.
        throw std::invalid_argument("gen_odc: event and search batches must match");
    }
    check_pool_dim(pool, n0 + n_events, "gen_odc");
    if (n0 == 0) throw std::invalid_argument("gen_odc: n0 must be positive");
    const std::size_t dim = pool.front().size();

    WorkloadScript script;
    script.meta.scenario = "odc";
    script.meta.dim = dim;
    script.meta.n0 = n0;
    script.meta.n_events = n_events;
    script.meta.n_searches = n_events;
    script.meta.event_batch = event_batch;
    script.meta.search_batch = search_batch;
    script.meta.seed = seed;

    script.initial.reserve(n0 * dim);
    for (std::size_t i = 0; i < n0; ++i) {
        script.initial.insert(script.initial.end(), pool[i].begin(), pool[i].end());
    }

    const std::size_t batch = event_batch;
    for (std::size_t done = 0; done < n_events;) {
        const std::size_t take = std::min(batch, n_events - done);
        Block searches;
        searches.kind = BlockKind::Search;
        Block events;
        events.kind = BlockKind::Event;
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t pos = n0 + done + i;
            searches.searches.push_back({pos, pool[pos]});
            events.events.push_back(Event::addition(pool[pos]));
        }
        script.blocks.push_back(std::move(searches));
        script.blocks.push_back(std::move(events));
        done += take;
    }
    return script;
}

std::vector<std::vector<float>> targets_from_clusters(const std::vector<std::vector<float>>& pool,
                                                      std::size_t n0, std::size_t clusters) {
    check_pool_dim(pool, n0, "targets_from_clusters");
    if (clusters == 0) throw std::invalid_argument("targets_from_clusters: clusters must be positive");
    const std::size_t dim = n0 > 0 ? pool.front().size() : 0;

    std::vector<std::vector<double>> sums(clusters, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n0; ++i) {
        const std::size_t g = i % clusters;
        ++counts[g];
        for (std::size_t j = 0; j < dim; ++j) sums[g][j] += static_cast<double>(pool[i][j]);
    }
    std::vector<std::vector<float>> targets(n0);
    for (std::size_t i = 0; i < n0; ++i) {
        const std::size_t g = i % clusters;
        std::vector<float> t(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            t[j] = static_cast<float>(sums[g][j] / static_cast<double>(counts[g]));
        }
        targets[i] = std::move(t);
    }
    return targets;
}

std::vector<std::vector<float>> targets_from_knn(const std::vector<std::vector<float>>& pool,
                                                 std::size_t n0, std::size_t k) {
    check_pool_dim(pool, n0, "targets_from_knn");
    if (k == 0) throw std::invalid_argument("targets_from_knn: k must be positive");
    const std::size_t dim = n0 > 0 ? pool.front().size() : 0;

    DatasetStore store(dim);
    for (std::size_t i = 0; i < n0; ++i) store.add({pool[i].data(), dim});

    std::vector<std::vector<float>> targets(n0);
    for (std::size_t i = 0; i < n0; ++i) {
        NeighbourList found = exact_knn(store, {pool[i].data(), dim}, k + 1);
        std::erase_if(found, [i](const Neighbour& n) { return n.id == i; });
        if (found.size() > k) found.resize(k);
        std::vector<double> sum(dim, 0.0);
        for (const Neighbour& n : found) {
            const float* v = store.data() + n.id * dim;
            for (std::size_t j = 0; j < dim; ++j) sum[j] += static_cast<double>(v[j]);
        }
        std::vector<float> t(dim);
        const double denom = found.empty() ? 1.0 : static_cast<double>(found.size());
        for (std::size_t j = 0; j < dim; ++j) t[j] = static_cast<float>(sum[j] / denom);
        targets[i] = std::move(t);
    }
    return targets;
}

WorkloadScript gen_ofl(const std::vector<std::vector<float>>& pool, std::size_t n0,
                       std::size_t n_events, const GenOflOptions& options,
                       const std::vector<std::vector<float>>& queries, std::uint64_t seed) {
    if (!(options.eta > 0.0) || options.eta > 1.0) {
        throw std::invalid_argument("gen_ofl: eta must be in (0, 1]");
    }
    if (options.event_batch == 0 || options.search_batch == 0) {
        throw std::invalid_argument("gen_ofl: batch sizes must be positive");
    }
    if (n0 == 0) throw std::invalid_argument("gen_ofl: n0 must be positive");
    check_pool_dim(pool, n0, "gen_ofl");
    if (queries.empty()) throw std::invalid_argument("gen_ofl: query set must be non-empty");
    const std::size_t dim = pool.front().size();
    for (const auto& q : queries) {
        if (q.size() != dim) throw std::invalid_argument("gen_ofl: query dimension mismatch");
    }

    WorkloadScript script;
    script.meta.scenario = "ofl";
    script.meta.dim = dim;
    script.meta.n0 = n0;
    script.meta.n_events = n_events;
    script.meta.event_batch = options.event_batch;
    script.meta.search_batch = options.search_batch;
    script.meta.eta = options.eta;
    script.meta.clusters = options.clusters;
    script.meta.seed = seed;

    script.initial.reserve(n0 * dim);
    for (std::size_t i = 0; i < n0; ++i) {
        script.initial.insert(script.initial.end(), pool[i].begin(), pool[i].end());
    }

    const std::vector<std::vector<float>> targets =
        options.clusters > 0 ? targets_from_clusters(pool, n0, options.clusters)
                             : targets_from_knn(pool, n0, 10);

    // The update order is one fixed seeded permutation, cycled.
    std::vector<VectorId> order(n0);
    for (std::size_t i = 0; i < n0; ++i) order[i] = i;
    Xoshiro256ss rng(mix_seed(seed, 0x0f1));
    for (std::size_t i = n0 - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(i + 1)]);
    }

    // Working copy that evolves exactly as a replay would, so event payloads
    // are the bitwise values the store will hold.
    std::vector<std::vector<float>> current(pool.begin(), pool.begin() + n0);

    const double eta = options.eta;
    std::size_t query_cursor = 0;
    std::size_t emitted = 0;
    while (emitted < n_events) {
        const std::size_t take = std::min(options.event_batch, n_events - emitted);
        Block events;
        events.kind = BlockKind::Event;
        for (std::size_t i = 0; i < take; ++i) {
            const VectorId id = order[(emitted + i) % n0];
            std::vector<float>& x = current[id];
            const std::vector<float>& t = targets[id];
            for (std::size_t j = 0; j < dim; ++j) {
                x[j] = static_cast<float>((1.0 - eta) * static_cast<double>(x[j]) +
                                          eta * static_cast<double>(t[j]));
            }
            events.events.push_back(Event::update(id, x));
        }
        script.blocks.push_back(std::move(events));
        emitted += take;

        Block searches;
        searches.kind = BlockKind::Search;
        for (std::size_t i = 0; i < options.search_batch; ++i) {
            const std::size_t q = query_cursor % queries.size();
            searches.searches.push_back({q, queries[q]});
            ++query_cursor;
        }
        script.blocks.push_back(std::move(searches));
    }
    script.meta.n_searches = query_cursor;
    return script;
}

WorkloadScript reschedule(const WorkloadScript& script, const RateSpec& rate) {
    if (!(rate.events_per_search > 0.0)) {
        throw std::invalid_argument("reschedule: rate must be positive");
    }
    const std::uint64_t be = rate.event_batch != 0 ? rate.event_batch : script.meta.event_batch;
    const std::uint64_t bs = rate.search_batch != 0 ? rate.search_batch : script.meta.search_batch;
    if (be == 0 || bs == 0) throw std::invalid_argument("reschedule: batch sizes must be positive");

    // Flatten both streams, preserving order.
    std::vector<const Event*> events;
    std::vector<const SearchItem*> searches;
    BlockKind phase = BlockKind::Search;
    bool phase_set = false;
    for (const Block& b : script.blocks) {
        if (!phase_set) {
            phase = b.kind;
            phase_set = true;
        }
        if (b.kind == BlockKind::Event) {
            for (const Event& e : b.events) events.push_back(&e);
        } else {
            for (const SearchItem& s : b.searches) searches.push_back(&s);
        }
    }

    std::vector<Block> event_blocks;
    for (std::size_t i = 0; i < events.size(); i += be) {
        Block b;
        b.kind = BlockKind::Event;
        for (std::size_t j = i; j < std::min(events.size(), i + be); ++j) {
            b.events.push_back(*events[j]);
        }
        event_blocks.push_back(std::move(b));
    }
    std::vector<Block> search_blocks;
    for (std::size_t i = 0; i < searches.size(); i += bs) {
        Block b;
        b.kind = BlockKind::Search;
        for (std::size_t j = i; j < std::min(searches.size(), i + bs); ++j) {
            b.searches.push_back(*searches[j]);
        }
        search_blocks.push_back(std::move(b));
    }

    WorkloadScript out;
    out.meta = script.meta;
    out.meta.event_batch = be;
    out.meta.search_batch = bs;
    out.meta.rate = rate.events_per_search;
    out.initial = script.initial;

    // One round emits one search block plus however many event blocks the
    // accumulated ratio grants (r >= 1: about r per round; r < 1: one every
    // 1/r rounds).  The source script's leading kind decides which half of
    // the round comes first, which makes r=1 the identity.
    std::size_t ei = 0, si = 0;
    double acc = 0.0;
    const double r = rate.events_per_search;
    while (ei < event_blocks.size() || si < search_blocks.size()) {
        std::size_t grant = 0;
        if (si < search_blocks.size()) {
            acc += r;
            grant = static_cast<std::size_t>(acc);
            acc -= static_cast<double>(grant);
        } else {
            grant = event_blocks.size() - ei;  // searches done: flush events
        }
        if (phase == BlockKind::Search && si < search_blocks.size()) {
            out.blocks.push_back(std::move(search_blocks[si++]));
        }
        for (std::size_t g = 0; g < grant && ei < event_blocks.size(); ++g) {
            out.blocks.push_back(std::move(event_blocks[ei++]));
        }
        if (phase == BlockKind::Event && si < search_blocks.size()) {
            out.blocks.push_back(std::move(search_blocks[si++]));
        }
    }
    return out;
}

void validate_script(const WorkloadScript& script) {
    const std::size_t dim = script.meta.dim;
    if (dim == 0) throw std::invalid_argument("script: zero dimension");
    if (script.initial.size() != script.meta.n0 * dim) {
        throw std::invalid_argument("script: initial dataset holds " +
                                    std::to_string(script.initial.size()) + " floats, expected " +
                                    std::to_string(script.meta.n0 * dim));
    }
    std::size_t live = script.meta.n0;
    std::size_t n_events = 0, n_searches = 0;
    for (std::size_t b = 0; b < script.blocks.size(); ++b) {
        const Block& block = script.blocks[b];
        if (block.kind == BlockKind::Event) {
            if (!block.searches.empty()) {
                throw std::invalid_argument("script: event block " + std::to_string(b) +
                                            " carries searches");
            }
            for (const Event& e : block.events) {
                if (e.value.size() != dim) {
                    throw std::invalid_argument("script: event payload dimension mismatch in block " +
                                                std::to_string(b));
                }
                if (e.kind == Event::Kind::update) {
                    if (e.id >= live) {
                        throw std::invalid_argument(
                            "script: update of id " + std::to_string(e.id) + " in block " +
                            std::to_string(b) + " references a vector that does not exist yet");
                    }
                } else {
                    ++live;
                }
                ++n_events;
            }
        } else {
            if (!block.events.empty()) {
                throw std::invalid_argument("script: search block " + std::to_string(b) +
                                            " carries events");
            }
            for (const SearchItem& s : block.searches) {
                if (s.query.size() != dim) {
                    throw std::invalid_argument(
                        "script: query dimension mismatch in block " + std::to_string(b));
                }
                ++n_searches;
            }
        }
    }
    if (n_events != script.meta.n_events) {
        throw std::invalid_argument("script: metadata claims " +
                                    std::to_string(script.meta.n_events) + " events, blocks hold " +
                                    std::to_string(n_events));
    }
    if (n_searches != script.meta.n_searches) {
        throw std::invalid_argument("script: metadata claims " +
                                    std::to_string(script.meta.n_searches) +
                                    " searches, blocks hold " + std::to_string(n_searches));
    }
}

namespace {

constexpr char kMagic[4] = {'D', 'Y', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::vector<std::uint8_t>& buf, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
}

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(buf, &v, sizeof(T));
}

nlohmann::json meta_to_json(const ScriptMeta& meta) {
    nlohmann::json j;
    j["scenario"] = meta.scenario;
    j["dim"] = meta.dim;
    j["n0"] = meta.n0;
    j["n_events"] = meta.n_events;
    j["n_searches"] = meta.n_searches;
    j["event_batch"] = meta.event_batch;
    j["search_batch"] = meta.search_batch;
    j["eta"] = meta.eta;
    j["rate"] = meta.rate;
    j["clusters"] = meta.clusters;
    j["seed"] = meta.seed;
    return j;
}

ScriptMeta meta_from_json(const nlohmann::json& j) {
    ScriptMeta meta;
    meta.scenario = j.at("scenario").get<std::string>();
    meta.dim = j.at("dim").get<std::uint64_t>();
    meta.n0 = j.at("n0").get<std::uint64_t>();
    meta.n_events = j.at("n_events").get<std::uint64_t>();
    meta.n_searches = j.at("n_searches").get<std::uint64_t>();
    meta.event_batch = j.at("event_batch").get<std::uint64_t>();
    meta.search_batch = j.at("search_batch").get<std::uint64_t>();
    meta.eta = j.at("eta").get<double>();
    meta.rate = j.at("rate").get<double>();
    meta.clusters = j.at("clusters").get<std::uint64_t>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    return meta;
}

std::vector<std::uint8_t> serialise_script(const WorkloadScript& script) {
    std::vector<std::uint8_t> buf;
    put_bytes(buf, kMagic, 4);
    put(buf, kVersion);

    const std::string meta = meta_to_json(script.meta).dump();
    put(buf, static_cast<std::uint64_t>(meta.size()));
    put_bytes(buf, meta.data(), meta.size());

    put(buf, static_cast<std::uint64_t>(script.meta.n0));
    put(buf, static_cast<std::uint64_t>(script.meta.dim));
    put_bytes(buf, script.initial.data(), script.initial.size() * sizeof(float));

    put(buf, static_cast<std::uint64_t>(script.blocks.size()));
    for (const Block& block : script.blocks) {
        put(buf, static_cast<std::uint8_t>(block.kind));
        if (block.kind == BlockKind::Event) {
            put(buf, static_cast<std::uint64_t>(block.events.size()));
            for (const Event& e : block.events) {
                put(buf, static_cast<std::uint8_t>(e.kind));
                put(buf, static_cast<std::uint64_t>(e.id));
                put_bytes(buf, e.value.data(), e.value.size() * sizeof(float));
            }
        } else {
            put(buf, static_cast<std::uint64_t>(block.searches.size()));
            for (const SearchItem& s : block.searches) {
                put(buf, static_cast<std::uint64_t>(s.query_index));
                put_bytes(buf, s.query.data(), s.query.size() * sizeof(float));
            }
        }
    }
    return buf;
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, const std::string& path)
        : buf_(buf), path_(path) {}

    void read(void* out, std::size_t n) {
        if (pos_ + n > buf_.size()) {
            throw ParseError(path_ + ": truncated at byte " + std::to_string(pos_));
        }
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }

    template <typename T>
    T get() {
        T v;
        read(&v, sizeof(T));
        return v;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& buf_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t script_digest(const WorkloadScript& script) {
    const std::vector<std::uint8_t> buf = serialise_script(script);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : buf) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void save_script(const std::string& path, const WorkloadScript& script) {
    const std::vector<std::uint8_t> buf = serialise_script(script);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ParseError(path + ": write failed");
}

WorkloadScript load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    ByteReader reader(buf, path);

    char magic[4];
    reader.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError(path + ": bad magic, not a workload script");
    }
    const auto version = reader.get<std::uint32_t>();
    if (version != kVersion) {
        throw ParseError(path + ": unsupported version " + std::to_string(version));
    }

    const auto meta_len = reader.get<std::uint64_t>();
    std::string meta_text(meta_len, '\0');
    reader.read(meta_text.data(), meta_len);
    WorkloadScript script;
    try {
        script.meta = meta_from_json(nlohmann::json::parse(meta_text));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad metadata: " + e.what());
    }

    const auto n0 = reader.get<std::uint64_t>();
    const auto dim = reader.get<std::uint64_t>();
    if (n0 != script.meta.n0 || dim != script.meta.dim) {
        throw ParseError(path + ": header counts disagree with metadata");
    }
    if (dim == 0 || dim > (1u << 20)) throw ParseError(path + ": implausible dimension");
    script.initial.resize(n0 * dim);
    reader.read(script.initial.data(), script.initial.size() * sizeof(float));

    const auto n_blocks = reader.get<std::uint64_t>();
    script.blocks.reserve(n_blocks);
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
        const auto kind = reader.get<std::uint8_t>();
        if (kind > 1) {
            throw ParseError(path + ": unknown block kind at byte " + std::to_string(reader.pos()));
        }
        Block block;
        block.kind = static_cast<BlockKind>(kind);
        const auto count = reader.get<std::uint64_t>();
        if (block.kind == BlockKind::Event) {
            block.events.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                Event e;
                const auto ekind = reader.get<std::uint8_t>();
                if (ekind > 1) {
                    throw ParseError(path + ": unknown event kind at byte " +
                                     std::to_string(reader.pos()));
                }
                e.kind = static_cast<Event::Kind>(ekind);
                e.id = reader.get<std::uint64_t>();
                e.value.resize(dim);
                reader.read(e.value.data(), dim * sizeof(float));
                block.events.push_back(std::move(e));
            }
        } else {
            block.searches.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                SearchItem s;
                s.query_index = reader.get<std::uint64_t>();
                s.query.resize(dim);
                reader.read(s.query.data(), dim * sizeof(float));
                block.searches.push_back(std::move(s));
            }
        }
        script.blocks.push_back(std::move(block));
    }
    if (reader.remaining() != 0) {
        throw ParseError(path + ": " + std::to_string(reader.remaining()) +
                         " trailing bytes after last block");
    }
    return script;
}

}  // namespace dynann
