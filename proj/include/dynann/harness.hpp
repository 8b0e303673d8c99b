#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynann/baseline.hpp"
#include "dynann/index.hpp"
#include "dynann/workload.hpp"

namespace dynann {

struct RunConfig {
    std::string method;
    ParamMap params;
    std::size_t k = 50;
    std::uint64_t seed = 0;
    std::string script_ref;     // informational label; the digest is the validator
    bool keep_results = false;  // retain raw neighbour lists for re-scoring audits
};

struct SearchRecord {
    std::uint64_t query_index = 0;
    double recall = 0.0;
    double seconds = 0.0;
    NeighbourList result;  // populated only when config.keep_results
};

// Everything one timed replay produces.  The bookkeeping identity
// event_seconds == build_seconds + sum(event_block_seconds) holds exactly;
// total_seconds() is the figure speedups are computed from.
struct RunRecord {
    RunConfig config;
    std::uint64_t script_digest = 0;
    double build_seconds = 0.0;
    std::vector<double> event_block_seconds;
    double event_seconds = 0.0;  // index build plus every event block, maintenance included
    double search_seconds = 0.0;
    std::vector<SearchRecord> searches;
    double mean_recall = 0.0;
    std::size_t peak_memory_bytes = 0;
    bool failed = false;
    std::string error;

    double total_seconds() const { return event_seconds + search_seconds; }
};

// |result ids ∩ truth ids| / |truth ids|; every neighbour weighted equally.
// An empty truth list scores 1.0 (nothing was missed).
double recall_score(const NeighbourList& result, const NeighbourList& truth);

// Replays the script against a fresh index built from the initial dataset.
// Event blocks are timed (index build counts as event processing, and
// maintain() runs once at the end of each event block inside the timed
// region); searches are timed individually; ground-truth lookups and recall
// scoring sit outside every timed region.  Strictly single-threaded.
// `cache` may be shared across runs of the same script; pass nullptr for a
// private one.
RunRecord run_script(const WorkloadScript& script, const RunConfig& config,
                     GroundTruthCache* cache);

// baseline total time divided by method total time.  Throws on mismatched
// script digests or k.
double speedup(const RunRecord& method_record, const RunRecord& baseline_record);

// One run per grid point over the same script and seed.  A grid point whose
// run throws is captured as a failed RunRecord carrying the error text; the
// sweep itself always completes.
std::vector<RunRecord> sweep(const std::string& method, const std::vector<ParamMap>& grid,
                             const WorkloadScript& script, const RunConfig& base,
                             GroundTruthCache* cache);

struct ParetoPoint {
    double mean_recall = 0.0;
    double speedup = 0.0;
    std::size_t record_index = 0;  // position in the input list
};

struct ScoredPoint {
    double mean_recall = 0.0;
    double speedup = 0.0;
};

// Non-dominated subset under (recall up, speedup up), sorted by recall
// ascending.  Exact duplicates are mutually non-dominated and all kept.
std::vector<ParetoPoint> pareto(const std::vector<ScoredPoint>& points);

}  // namespace dynann
