#pragma once

#include <string>
#include <vector>

#include "dynann/harness.hpp"

namespace dynann {

// A RunRecord tagged with the scenario its script came from.
struct ScenarioRun {
    std::string scenario;
    RunRecord record;
};

// One summary line of results.csv.
struct ResultRow {
    std::string scenario;
    std::string method;
    std::string params;  // canonical "a=1;b=2" form
    double mean_recall = 0.0;
    double speedup = 0.0;
    double search_s = 0.0;
    double event_s = 0.0;
    double peak_mb = 0.0;  // decimal megabytes
    std::uint64_t seed = 0;
};

// Computes speedups against each scenario's exhaustive baseline run (method
// "baseline" with p = 1.0; its absence is an error) and writes persistent
// results: results.csv holds one row per completed run with the exact
// header scenario,method,params,mean_recall,speedup,search_s,event_s,
// peak_mb,seed and %.9g numbers; results.json holds the full records,
// failed runs included, with per-search recalls.  Returns the CSV rows.
std::vector<ResultRow> write_results(const std::vector<ScenarioRun>& runs,
                                     const std::string& dir);

// Reads the summary fields back from a results.json written above.
std::vector<ResultRow> load_rows(const std::string& json_path);

// Log-log speedup-versus-recall figure for one scenario: each method's
// Pareto frontier as a labelled polyline, a dashed reference line at
// speedup 1, auto-ranged axes with 5% margins in log space.  Byte-exact
// deterministic for identical input.  Rows with non-positive recall or
// speedup cannot sit on a log axis and are skipped.
void plot_speedup_recall(const std::vector<ResultRow>& rows, const std::string& scenario,
                         const std::string& path);

}  // namespace dynann
