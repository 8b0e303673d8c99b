#include "dynann/harness.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace dynann {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace

double recall_score(const NeighbourList& result, const NeighbourList& truth) {
    if (truth.empty()) return 1.0;
    std::vector<VectorId> truth_ids;
    truth_ids.reserve(truth.size());
    for (const Neighbour& t : truth) truth_ids.push_back(t.id);
    std::sort(truth_ids.begin(), truth_ids.end());
    std::size_t hits = 0;
    for (const Neighbour& r : result) {
        if (std::binary_search(truth_ids.begin(), truth_ids.end(), r.id)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth_ids.size());
}

RunRecord run_script(const WorkloadScript& script, const RunConfig& config,
                     GroundTruthCache* cache) {
    validate_script(script);
    GroundTruthCache local;
    if (cache == nullptr) cache = &local;

    RunRecord record;
    record.config = config;
    record.script_digest = script_digest(script);

    const std::size_t dim = script.meta.dim;
    DatasetStore store(dim);
    for (std::size_t i = 0; i < script.meta.n0; ++i) {
        store.add({script.initial.data() + i * dim, dim});
    }

    auto index = make_index(config.method, config.params, config.seed);

    const auto build_start = Clock::now();
    index->build(store);
    record.build_seconds = seconds_between(build_start, Clock::now());
    record.event_seconds = record.build_seconds;

    std::size_t peak = store.memory_bytes() + index->memory_bytes();
    const std::size_t sample_stride = std::max<std::size_t>(1, script.blocks.size() / 256);

    double recall_sum = 0.0;
    for (std::size_t b = 0; b < script.blocks.size(); ++b) {
        const Block& block = script.blocks[b];
        if (block.kind == BlockKind::Event) {
            const auto t0 = Clock::now();
            for (const Event& e : block.events) {
                if (e.kind == Event::Kind::addition) {
                    const VectorId id = store.add({e.value.data(), e.value.size()});
                    index->insert(id);
                } else {
                    store.overwrite(e.id, {e.value.data(), e.value.size()});
                    index->update(e.id);
                }
            }
            index->maintain();
            const double dt = seconds_between(t0, Clock::now());
            record.event_block_seconds.push_back(dt);
            record.event_seconds += dt;
        } else {
            for (const SearchItem& item : block.searches) {
                const std::span<const float> query(item.query.data(), item.query.size());
                const auto t0 = Clock::now();
                NeighbourList result = index->search(query, config.k);
                const double dt = seconds_between(t0, Clock::now());
                record.search_seconds += dt;

                const NeighbourList& truth = cache->lookup(store, query, config.k);
                SearchRecord sr;
                sr.query_index = item.query_index;
                sr.recall = recall_score(result, truth);
                sr.seconds = dt;
                if (config.keep_results) sr.result = std::move(result);
                recall_sum += sr.recall;
                record.searches.push_back(std::move(sr));
            }
        }
        if (b % sample_stride == 0 || b + 1 == script.blocks.size()) {
            peak = std::max(peak, store.memory_bytes() + index->memory_bytes());
        }
    }

    record.peak_memory_bytes = peak;
    if (!record.searches.empty()) {
        record.mean_recall = recall_sum / static_cast<double>(record.searches.size());
    }
    return record;
}

double speedup(const RunRecord& method_record, const RunRecord& baseline_record) {
    if (method_record.script_digest != baseline_record.script_digest) {
        throw std::invalid_argument("speedup: records come from different scripts");
    }
    if (method_record.config.k != baseline_record.config.k) {
        throw std::invalid_argument("speedup: records use different k");
    }
    const double method_total = method_record.total_seconds();
    if (!(method_total > 0.0)) throw std::invalid_argument("speedup: method total time is zero");
    return baseline_record.total_seconds() / method_total;
}

std::vector<RunRecord> sweep(const std::string& method, const std::vector<ParamMap>& grid,
                             const WorkloadScript& script, const RunConfig& base,
                             GroundTruthCache* cache) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty parameter grid");
    std::vector<RunRecord> records;
    records.reserve(grid.size());
    for (const ParamMap& params : grid) {
        RunConfig config = base;
        config.method = method;
        config.params = params;
        try {
            records.push_back(run_script(script, config, cache));
        } catch (const std::exception& e) {
            RunRecord failed;
            failed.config = config;
            failed.failed = true;
            failed.error = e.what();
            records.push_back(std::move(failed));
        }
    }
    return records;
}

std::vector<ParetoPoint> pareto(const std::vector<ScoredPoint>& points) {
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&points](std::size_t a, std::size_t b) {
        if (points[a].mean_recall != points[b].mean_recall) {
            return points[a].mean_recall > points[b].mean_recall;
        }
        if (points[a].speedup != points[b].speedup) return points[a].speedup > points[b].speedup;
        return a < b;
    });

    std::vector<ParetoPoint> frontier;
    double best_speedup = 0.0;
    double recall_at_best = 0.0;
    bool have_best = false;
    for (std::size_t idx : order) {
        const ScoredPoint& p = points[idx];
        const bool keep = !have_best || p.speedup > best_speedup ||
                          (p.speedup == best_speedup && p.mean_recall == recall_at_best);
        if (keep) {
            frontier.push_back({p.mean_recall, p.speedup, idx});
            if (!have_best || p.speedup > best_speedup) {
                best_speedup = p.speedup;
                recall_at_best = p.mean_recall;
                have_best = true;
            }
        }
    }
    std::reverse(frontier.begin(), frontier.end());  // recall ascending
    return frontier;
}

}  // namespace dynann
