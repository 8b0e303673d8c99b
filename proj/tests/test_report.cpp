#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dynann/harness.hpp"
#include "dynann/io.hpp"
#include "dynann/report.hpp"
#include "dynann/rng.hpp"
#include "dynann/workload.hpp"

using namespace dynann;

namespace {

std::vector<std::vector<float>> make_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    std::vector<std::vector<float>> pool(n, std::vector<float>(dim));
    for (auto& v : pool) {
        for (auto& x : v) x = static_cast<float>(rng.uniform());
    }
    return pool;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<ScenarioRun> run_small_suite(const std::string& scenario, std::uint64_t seed) {
    const WorkloadScript script = gen_odc(make_pool(500, 6, seed), 400, 100, 1, 1, seed);
    GroundTruthCache cache;
    std::vector<ScenarioRun> runs;
    RunConfig config;
    config.k = 10;
    config.seed = seed;
    config.method = "baseline";
    config.params = {{"p", 1.0}};
    runs.push_back({scenario, run_script(script, config, &cache)});
    config.params = {{"p", 0.5}};
    runs.push_back({scenario, run_script(script, config, &cache)});
    config.method = "kdtree";
    config.params = {{"leaf_capacity", std::int64_t{16}},
                     {"max_leaves_visited", std::int64_t{8}}};
    runs.push_back({scenario, run_script(script, config, &cache)});
    return runs;
}

}  // namespace

TEST_CASE("write_results emits the pinned CSV schema at %.9g") {
    const auto dir = std::filesystem::temp_directory_path() / "dynann_report_csv";
    std::filesystem::remove_all(dir);
    const std::vector<ScenarioRun> runs = run_small_suite("odc", 921);
    const std::vector<ResultRow> rows = write_results(runs, dir.string());
    REQUIRE(rows.size() == 3);

    const std::string csv = slurp(dir / "results.csv");
    std::stringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "scenario,method,params,mean_recall,speedup,search_s,event_s,peak_mb,seed");

    std::size_t row_index = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        REQUIRE(row_index < rows.size());
        const std::vector<std::string> fields = split(line, ',');
        REQUIRE(fields.size() == 9);
        const ResultRow& row = rows[row_index];
        CHECK(fields[0] == row.scenario);
        CHECK(fields[1] == row.method);
        CHECK(fields[2] == row.params);
        CHECK(fields[3] == g9(row.mean_recall));
        CHECK(fields[4] == g9(row.speedup));
        CHECK(fields[5] == g9(row.search_s));
        CHECK(fields[6] == g9(row.event_s));
        CHECK(fields[7] == g9(row.peak_mb));
        CHECK(fields[8] == std::to_string(row.seed));
        ++row_index;
    }
    CHECK(row_index == 3);

    // The baseline anchors the ratios: its own speedup is exactly 1.
    CHECK(rows[0].method == "baseline");
    CHECK(rows[0].speedup == 1.0);
    CHECK(rows[0].mean_recall == 1.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("json round-trip preserves the summary rows") {
    const auto dir = std::filesystem::temp_directory_path() / "dynann_report_json";
    std::filesystem::remove_all(dir);
    const std::vector<ScenarioRun> runs = run_small_suite("odc", 923);
    const std::vector<ResultRow> rows = write_results(runs, dir.string());
    const std::vector<ResultRow> back = load_rows((dir / "results.json").string());
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].scenario == rows[i].scenario);
        CHECK(back[i].method == rows[i].method);
        CHECK(back[i].params == rows[i].params);
        CHECK(back[i].mean_recall == rows[i].mean_recall);
        CHECK(back[i].speedup == rows[i].speedup);
        CHECK(back[i].search_s == rows[i].search_s);
        CHECK(back[i].event_s == rows[i].event_s);
        CHECK(back[i].peak_mb == rows[i].peak_mb);
        CHECK(back[i].seed == rows[i].seed);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("failed runs are kept in json but excluded from csv") {
    const auto dir = std::filesystem::temp_directory_path() / "dynann_report_failed";
    std::filesystem::remove_all(dir);
    std::vector<ScenarioRun> runs = run_small_suite("odc", 925);
    RunRecord broken;
    broken.config.method = "hnsw";
    broken.config.params = {{"M", std::int64_t{0}}};
    broken.failed = true;
    broken.error = "M must be at least 2";
    runs.push_back({"odc", broken});

    const std::vector<ResultRow> rows = write_results(runs, dir.string());
    CHECK(rows.size() == 3);  // the failed run contributes no CSV row

    const std::string json = slurp(dir / "results.json");
    CHECK(json.find("M must be at least 2") != std::string::npos);
    CHECK(load_rows((dir / "results.json").string()).size() == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("write_results demands a completed exhaustive baseline per scenario") {
    const auto dir = std::filesystem::temp_directory_path() / "dynann_report_nobase";
    std::filesystem::remove_all(dir);
    std::vector<ScenarioRun> runs = run_small_suite("odc", 927);
    runs.erase(runs.begin());  // drop the p=1 baseline
    CHECK_THROWS(write_results(runs, dir.string()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("plot output is byte-exact deterministic") {
    const std::vector<ScenarioRun> runs = run_small_suite("odc", 929);
    const auto dir = std::filesystem::temp_directory_path() / "dynann_report_det";
    std::filesystem::remove_all(dir);
    const std::vector<ResultRow> rows = write_results(runs, dir.string());

    const auto svg_a = dir / "a.svg";
    const auto svg_b = dir / "b.svg";
    plot_speedup_recall(rows, "odc", svg_a.string());
    plot_speedup_recall(rows, "odc", svg_b.string());
    const std::string a = slurp(svg_a), b = slurp(svg_b);
    CHECK(!a.empty());
    CHECK(a == b);
    std::filesystem::remove_all(dir);
}

TEST_CASE("plot coordinates follow the documented log mapping") {
    // Hand-built rows with frontier points at known positions.  Domain from
    // the points: recall in [0.1, 1], speedup in [2, 10] extended to include
    // 1; both padded by 5% of their log10 span.
    std::vector<ResultRow> rows;
    ResultRow row;
    row.scenario = "odc";
    row.seed = 1;
    row.method = "hnsw";
    row.params = "a=1";
    row.mean_recall = 0.1;
    row.speedup = 10.0;
    rows.push_back(row);
    row.params = "a=2";
    row.mean_recall = 1.0;
    row.speedup = 2.0;
    rows.push_back(row);

    const auto path = std::filesystem::temp_directory_path() / "dynann_mapping.svg";
    plot_speedup_recall(rows, "odc", path.string());
    const std::string svg = slurp(path);

    // x domain: log10 in [-1, 0], span 1, padded to [-1.05, 0.05].
    // y domain: log10 in [0, 1], span 1, padded to [-0.05, 1.05].
    const double lx0 = -1.05, lx1 = 0.05, ly0 = -0.05, ly1 = 1.05;
    auto px = [&](double x) { return 70.0 + (std::log10(x) - lx0) / (lx1 - lx0) * 570.0; };
    auto py = [&](double y) { return 540.0 - (std::log10(y) - ly0) / (ly1 - ly0) * 500.0; };
    char expected[64];
    std::snprintf(expected, sizeof expected, "%.2f,%.2f", px(0.1), py(10.0));
    CHECK(svg.find(expected) != std::string::npos);
    std::snprintf(expected, sizeof expected, "%.2f,%.2f", px(1.0), py(2.0));
    CHECK(svg.find(expected) != std::string::npos);

    // The speedup=1 reference line sits at its mapped height.
    std::snprintf(expected, sizeof expected, "y1=\"%.2f\"", py(1.0));
    CHECK(svg.find(expected) != std::string::npos);

    // Fixed palette colour for hnsw.
    CHECK(svg.find("#d62728") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("plot keeps one frontier per method and skips unplottable rows") {
    std::vector<ResultRow> rows;
    ResultRow row;
    row.scenario = "ofl";
    row.method = "kdtree";
    row.params = "b=1";
    row.mean_recall = 0.5;
    row.speedup = 0.5;
    rows.push_back(row);
    row.params = "b=2";
    row.mean_recall = 0.8;
    row.speedup = 0.25;
    rows.push_back(row);
    row.params = "b=3";  // dominated: below b=2 in both axes
    row.mean_recall = 0.7;
    row.speedup = 0.2;
    rows.push_back(row);
    row.method = "baseline";
    row.params = "p=0";
    row.mean_recall = 0.0;  // unplottable on a log axis
    row.speedup = 1.0;
    rows.push_back(row);

    const auto path = std::filesystem::temp_directory_path() / "dynann_frontier.svg";
    plot_speedup_recall(rows, "ofl", path.string());
    const std::string svg = slurp(path);
    CHECK(svg.find("kdtree") != std::string::npos);
    // The baseline row was skipped entirely, so no legend entry for it.
    CHECK(svg.find(">baseline<") == std::string::npos);
    std::filesystem::remove(path);

    // A scenario with nothing plottable is an error.
    CHECK_THROWS(plot_speedup_recall(rows, "odc", path.string()));
}
