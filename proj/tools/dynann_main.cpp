#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynann/config.hpp"
#include "dynann/rng.hpp"
#include "dynann/harness.hpp"
#include "dynann/io.hpp"
#include "dynann/report.hpp"
#include "dynann/workload.hpp"

namespace {

using namespace dynann;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::int64_t seed_override = -1;
};

std::uint64_t effective_seed(const ConfigFile& cfg, const CommonArgs& args) {
    if (args.seed_override >= 0) return static_cast<std::uint64_t>(args.seed_override);
    return static_cast<std::uint64_t>(cfg.get_int("seed", 0));
}

// Loads the corpus named by [dataset] (or draws the synthetic one) and
// builds the scenario script, applying any [workload] rescheduling.
struct WorkloadBundle {
    WorkloadScript script;
    std::string scenario;
    std::string script_ref;
};

WorkloadBundle build_workload(const ConfigFile& cfg, std::uint64_t seed) {
    WorkloadBundle bundle;
    bundle.scenario = cfg.require_string("scenario");
    if (bundle.scenario != "odc" && bundle.scenario != "ofl") {
        throw ConfigError("scenario must be \"odc\" or \"ofl\", got \"" + bundle.scenario + "\"");
    }

    const std::string script_path = cfg.get_string("dataset.script", "");
    if (!script_path.empty()) {
        bundle.script = load_script(script_path);
        bundle.script_ref = script_path;
        validate_script(bundle.script);
        return bundle;
    }

    const auto n0 = static_cast<std::size_t>(cfg.require_int("dataset.n0"));
    const auto n_events = static_cast<std::size_t>(cfg.require_int("dataset.events"));
    const auto held_out = static_cast<std::size_t>(cfg.get_int("dataset.queries", 1000));
    const std::string source = cfg.get_string("dataset.source", "synthetic");

    std::vector<std::vector<float>> pool;
    std::size_t clusters = 0;
    if (source == "synthetic") {
        SyntheticSpec spec;
        spec.dim = static_cast<std::size_t>(cfg.require_int("dataset.dim"));
        spec.clusters = static_cast<std::size_t>(cfg.get_int("dataset.clusters", 16));
        spec.spread = cfg.get_double("dataset.spread", 0.1);
        spec.count = bundle.scenario == "odc" ? n0 + n_events : n0 + held_out;
        pool = gen_synthetic(spec, mix_seed(seed, 0xda7a)).samples;
        clusters = spec.clusters;
    } else if (source == "fvecs" || source == "fbin") {
        const std::string path = cfg.require_string("dataset.path");
        pool = source == "fvecs" ? read_fvecs(path) : read_fbin(path);
    } else {
        throw ConfigError("dataset.source must be synthetic, fvecs, or fbin");
    }
    if (cfg.get_bool("dataset.normalise", false)) normalise_l2(pool);

    if (bundle.scenario == "odc") {
        const auto batch = static_cast<std::size_t>(cfg.get_int("workload.batch", 1));
        bundle.script = gen_odc(pool, n0, n_events, batch, batch, seed);
    } else {
        if (pool.size() < n0 + held_out) {
            throw ConfigError("ofl needs n0 + queries = " + std::to_string(n0 + held_out) +
                              " pool vectors, have " + std::to_string(pool.size()));
        }
        GenOflOptions options;
        options.eta = cfg.get_double("workload.eta", 0.1);
        const auto batch = static_cast<std::size_t>(cfg.get_int("workload.batch", 200));
        options.event_batch = batch;
        options.search_batch = batch;
        options.clusters = source == "synthetic" ? clusters : 0;
        std::vector<std::vector<float>> queries(pool.begin() + static_cast<std::ptrdiff_t>(n0),
                                                pool.begin() +
                                                    static_cast<std::ptrdiff_t>(n0 + held_out));
        bundle.script = gen_ofl(pool, n0, n_events, options, queries, seed);
    }

    const bool rebatch = cfg.has("workload.event_batch") || cfg.has("workload.search_batch") ||
                         cfg.has("workload.rate");
    if (rebatch) {
        RateSpec rate;
        rate.events_per_search = cfg.get_double("workload.rate", 1.0);
        rate.event_batch = static_cast<std::uint64_t>(cfg.get_int("workload.event_batch", 0));
        rate.search_batch = static_cast<std::uint64_t>(cfg.get_int("workload.search_batch", 0));
        bundle.script = reschedule(bundle.script, rate);
    }
    validate_script(bundle.script);
    bundle.script_ref = "generated:" + bundle.scenario;
    return bundle;
}

// [method.X] section names in file order, without duplicates.
std::vector<std::string> method_sections(const ConfigFile& cfg) {
    std::vector<std::string> methods;
    for (const std::string& key : cfg.ordered_keys()) {
        if (key.rfind("method.", 0) != 0) continue;
        const std::size_t start = std::string("method.").size();
        const std::size_t dot = key.find('.', start);
        if (dot == std::string::npos) continue;
        const std::string name = key.substr(start, dot - start);
        if (std::find(methods.begin(), methods.end(), name) == methods.end()) {
            methods.push_back(name);
        }
    }
    return methods;
}

RunConfig base_run_config(const ConfigFile& cfg, const CommonArgs& args,
                          const WorkloadBundle& bundle) {
    RunConfig base;
    base.k = static_cast<std::size_t>(cfg.get_int("k", 50));
    base.seed = effective_seed(cfg, args);
    base.script_ref = bundle.script_ref;
    return base;
}

RunRecord run_exhaustive_baseline(const WorkloadScript& script, const RunConfig& base,
                                  GroundTruthCache* cache) {
    RunConfig config = base;
    config.method = "baseline";
    config.params = {{"p", 1.0}};
    return run_script(script, config, cache);
}

void load_cache_if_given(GroundTruthCache& cache, const std::string& path) {
    if (path.empty()) return;
    cache.load(path);
    std::cerr << "loaded ground-truth cache with " << cache.size() << " entries\n";
}

int cmd_gen(const CommonArgs& args) {
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const std::uint64_t seed = effective_seed(cfg, args);
    WorkloadBundle bundle = build_workload(cfg, seed);
    std::filesystem::create_directories(args.out_dir);
    const std::filesystem::path path =
        std::filesystem::path(args.out_dir) / (bundle.scenario + ".dynw");
    save_script(path.string(), bundle.script);
    std::cout << path.string() << ": " << bundle.script.meta.n_events << " events, "
              << bundle.script.meta.n_searches << " searches, digest "
              << script_digest(bundle.script) << "\n";
    return 0;
}

int cmd_gt(const CommonArgs& args) {
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const std::uint64_t seed = effective_seed(cfg, args);
    WorkloadBundle bundle = build_workload(cfg, seed);
    const auto k = static_cast<std::size_t>(cfg.get_int("k", 50));

    GroundTruthCache cache;
    DatasetStore store(bundle.script.meta.dim);
    const std::size_t dim = bundle.script.meta.dim;
    for (std::size_t i = 0; i < bundle.script.meta.n0; ++i) {
        store.add({bundle.script.initial.data() + i * dim, dim});
    }
    for (const Block& block : bundle.script.blocks) {
        if (block.kind == BlockKind::Event) {
            for (const Event& e : block.events) store.apply(e);
        } else {
            for (const SearchItem& item : block.searches) {
                cache.lookup(store, {item.query.data(), item.query.size()}, k);
            }
        }
    }
    std::filesystem::create_directories(args.out_dir);
    const std::filesystem::path path =
        std::filesystem::path(args.out_dir) / (bundle.scenario + ".dyng");
    cache.save(path.string());
    std::cout << path.string() << ": " << cache.size() << " oracle entries\n";
    return 0;
}

int cmd_run(const CommonArgs& args, const std::string& gt_path) {
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const std::uint64_t seed = effective_seed(cfg, args);
    WorkloadBundle bundle = build_workload(cfg, seed);
    const RunConfig base = base_run_config(cfg, args, bundle);

    const std::string method = cfg.require_string("run.method");
    std::vector<ParamMap> grid = expand_grid(cfg, "method." + method);
    if (grid.size() != 1) {
        throw ConfigError("run wants exactly one parameter point for method '" + method +
                          "', config expands to " + std::to_string(grid.size()) +
                          " (use sweep for grids)");
    }

    GroundTruthCache cache;
    load_cache_if_given(cache, gt_path);
    std::vector<ScenarioRun> runs;
    runs.push_back({bundle.scenario, run_exhaustive_baseline(bundle.script, base, &cache)});

    RunConfig config = base;
    config.method = method;
    config.params = grid.front();
    const bool is_baseline_again = method == "baseline" && grid.front().empty();
    if (!is_baseline_again) {
        runs.push_back({bundle.scenario, run_script(bundle.script, config, &cache)});
    }

    const std::vector<ResultRow> rows = write_results(runs, args.out_dir);
    for (const ResultRow& row : rows) {
        std::cout << row.method << " [" << row.params << "] recall " << row.mean_recall
                  << " speedup " << row.speedup << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& gt_path) {
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const std::uint64_t seed = effective_seed(cfg, args);
    WorkloadBundle bundle = build_workload(cfg, seed);
    const RunConfig base = base_run_config(cfg, args, bundle);

    const std::vector<std::string> methods = method_sections(cfg);
    if (methods.empty()) {
        throw ConfigError(args.config_path + ": no [method.*] sections to sweep");
    }

    GroundTruthCache cache;
    load_cache_if_given(cache, gt_path);
    std::vector<ScenarioRun> runs;
    runs.push_back({bundle.scenario, run_exhaustive_baseline(bundle.script, base, &cache)});
    for (const std::string& method : methods) {
        const std::vector<ParamMap> grid = expand_grid(cfg, "method." + method);
        std::vector<RunRecord> records = sweep(method, grid, bundle.script, base, &cache);
        for (RunRecord& record : records) {
            if (record.failed) {
                std::cerr << "failed: " << method << " [" << format_params(record.config.params)
                          << "]: " << record.error << "\n";
            }
            runs.push_back({bundle.scenario, std::move(record)});
        }
    }

    const std::vector<ResultRow> rows = write_results(runs, args.out_dir);
    std::cout << rows.size() << " completed runs -> " << args.out_dir << "/results.csv\n";
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
    const std::filesystem::path json_path = std::filesystem::path(in_dir) / "results.json";
    const std::vector<ResultRow> rows = load_rows(json_path.string());
    std::vector<std::string> scenarios;
    for (const ResultRow& row : rows) {
        if (std::find(scenarios.begin(), scenarios.end(), row.scenario) == scenarios.end()) {
            scenarios.push_back(row.scenario);
        }
    }
    if (scenarios.empty()) {
        throw std::runtime_error(json_path.string() + ": no completed runs to plot");
    }
    std::filesystem::create_directories(out_dir);
    for (const std::string& scenario : scenarios) {
        const std::filesystem::path path =
            std::filesystem::path(out_dir) / (scenario + ".svg");
        plot_speedup_recall(rows, scenario, path.string());
        std::cout << path.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic approximate-nearest-neighbour benchmark suite"};
    app.require_subcommand(1);

    CommonArgs gen_args, gt_args, run_args, sweep_args;
    std::string run_gt, sweep_gt;
    std::string report_in, report_out = ".";

    auto add_common = [](CLI::App* cmd, CommonArgs& args) {
        cmd->add_option("--config", args.config_path, "config file (documented TOML subset)")
            ->required();
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed_override, "override the config seed");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a workload script");
    add_common(gen, gen_args);
    CLI::App* gt = app.add_subcommand("gt", "warm the exact ground-truth cache for a workload");
    add_common(gt, gt_args);
    CLI::App* run = app.add_subcommand("run", "run one configuration plus the exhaustive baseline");
    add_common(run, run_args);
    run->add_option("--gt", run_gt, "pre-warmed ground-truth cache file");
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run every configured parameter grid");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--gt", sweep_gt, "pre-warmed ground-truth cache file");
    CLI::App* report = app.add_subcommand("report", "render SVG figures from stored results");
    report->add_option("--in", report_in, "directory holding results.json")->required();
    report->add_option("--out", report_out, "figure output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (gt->parsed()) return cmd_gt(gt_args);
        if (run->parsed()) return cmd_run(run_args, run_gt);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_gt);
        if (report->parsed()) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
