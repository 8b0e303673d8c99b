#include "dynann/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dynann {

namespace {

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json params_to_json(const ParamMap& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : params) {
        std::visit([&j, &key](const auto& v) { j[key] = v; }, value);
    }
    return j;
}

ParamMap params_from_json(const nlohmann::json& j) {
    ParamMap params;
    for (const auto& [key, value] : j.items()) {
        if (value.is_boolean()) {
            params[key] = value.get<bool>();
        } else if (value.is_number_integer()) {
            params[key] = value.get<std::int64_t>();
        } else if (value.is_number_float()) {
            params[key] = value.get<double>();
        } else if (value.is_string()) {
            params[key] = value.get<std::string>();
        } else {
            throw std::runtime_error("unsupported parameter type in results.json");
        }
    }
    return params;
}

bool is_exhaustive_baseline(const RunRecord& record) {
    if (record.failed || record.config.method != "baseline") return false;
    return param_double(record.config.params, "p", 1.0) == 1.0;
}

}  // namespace

std::vector<ResultRow> write_results(const std::vector<ScenarioRun>& runs,
                                     const std::string& dir) {
    std::filesystem::create_directories(dir);

    // Scenario groups in first-appearance order.
    std::vector<std::string> scenarios;
    for (const ScenarioRun& run : runs) {
        if (std::find(scenarios.begin(), scenarios.end(), run.scenario) == scenarios.end()) {
            scenarios.push_back(run.scenario);
        }
    }
    std::map<std::string, const RunRecord*> baselines;
    for (const std::string& scenario : scenarios) {
        for (const ScenarioRun& run : runs) {
            if (run.scenario == scenario && is_exhaustive_baseline(run.record)) {
                baselines[scenario] = &run.record;
                break;
            }
        }
        if (baselines.count(scenario) == 0) {
            throw std::invalid_argument("scenario '" + scenario +
                                        "' has no completed exhaustive baseline (p=1.0) run; "
                                        "speedups are undefined without one");
        }
    }

    std::vector<ResultRow> rows;
    nlohmann::json records = nlohmann::json::array();
    for (const ScenarioRun& run : runs) {
        const RunRecord& r = run.record;
        double spd = 0.0;
        if (!r.failed) spd = speedup(r, *baselines.at(run.scenario));

        nlohmann::json j;
        j["scenario"] = run.scenario;
        j["method"] = r.config.method;
        j["params"] = params_to_json(r.config.params);
        j["k"] = r.config.k;
        j["seed"] = r.config.seed;
        j["script_ref"] = r.config.script_ref;
        j["script_digest"] = hex64(r.script_digest);
        j["failed"] = r.failed;
        j["error"] = r.error;
        j["mean_recall"] = r.mean_recall;
        j["speedup"] = spd;
        j["build_s"] = r.build_seconds;
        j["event_s"] = r.event_seconds;
        j["search_s"] = r.search_seconds;
        j["peak_memory_bytes"] = r.peak_memory_bytes;
        j["event_block_seconds"] = r.event_block_seconds;
        nlohmann::json searches = nlohmann::json::array();
        for (const SearchRecord& s : r.searches) {
            searches.push_back({{"query_index", s.query_index},
                                {"recall", s.recall},
                                {"seconds", s.seconds}});
        }
        j["searches"] = std::move(searches);
        records.push_back(std::move(j));

        if (r.failed) continue;
        ResultRow row;
        row.scenario = run.scenario;
        row.method = r.config.method;
        row.params = format_params(r.config.params);
        row.mean_recall = r.mean_recall;
        row.speedup = spd;
        row.search_s = r.search_seconds;
        row.event_s = r.event_seconds;
        row.peak_mb = static_cast<double>(r.peak_memory_bytes) / 1e6;
        row.seed = r.config.seed;
        rows.push_back(std::move(row));
    }

    const std::filesystem::path base(dir);
    {
        std::ofstream csv(base / "results.csv", std::ios::trunc);
        if (!csv) throw std::runtime_error(dir + ": cannot write results.csv");
        csv << "scenario,method,params,mean_recall,speedup,search_s,event_s,peak_mb,seed\n";
        for (const ResultRow& row : rows) {
            csv << row.scenario << ',' << row.method << ',' << row.params << ','
                << fmt9(row.mean_recall) << ',' << fmt9(row.speedup) << ','
                << fmt9(row.search_s) << ',' << fmt9(row.event_s) << ',' << fmt9(row.peak_mb)
                << ',' << row.seed << '\n';
        }
    }
    {
        std::ofstream json(base / "results.json", std::ios::trunc);
        if (!json) throw std::runtime_error(dir + ": cannot write results.json");
        json << records.dump(2) << '\n';
    }
    return rows;
}

std::vector<ResultRow> load_rows(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error(json_path + ": cannot open");
    nlohmann::json records;
    try {
        in >> records;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(json_path + ": " + e.what());
    }
    if (!records.is_array()) throw std::runtime_error(json_path + ": expected a record array");

    std::vector<ResultRow> rows;
    for (const nlohmann::json& j : records) {
        if (j.at("failed").get<bool>()) continue;
        ResultRow row;
        row.scenario = j.at("scenario").get<std::string>();
        row.method = j.at("method").get<std::string>();
        row.params = format_params(params_from_json(j.at("params")));
        row.mean_recall = j.at("mean_recall").get<double>();
        row.speedup = j.at("speedup").get<double>();
        row.search_s = j.at("search_s").get<double>();
        row.event_s = j.at("event_s").get<double>();
        row.peak_mb = j.at("peak_memory_bytes").get<double>() / 1e6;
        row.seed = j.at("seed").get<std::uint64_t>();
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

constexpr double kWidth = 800, kHeight = 600;
constexpr double kMarginL = 70, kMarginR = 160, kMarginT = 40, kMarginB = 60;
constexpr double kPlotW = kWidth - kMarginL - kMarginR;
constexpr double kPlotH = kHeight - kMarginT - kMarginB;

std::string method_colour(const std::string& method, std::size_t fallback_rank) {
    static const std::map<std::string, std::string> palette = {
        {"baseline", "#555555"}, {"kdtree", "#1f77b4"}, {"rpforest", "#2ca02c"},
        {"hnsw", "#d62728"},     {"ivfpq", "#9467bd"},
    };
    auto it = palette.find(method);
    if (it != palette.end()) return it->second;
    static const char* cycle[] = {"#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return cycle[fallback_rank % 5];
}

// Value ticks at 1/2/5 per decade inside [lo, hi].
std::vector<double> log_ticks(double lo, double hi) {
    std::vector<double> ticks;
    const int e0 = static_cast<int>(std::floor(std::log10(lo))) - 1;
    const int e1 = static_cast<int>(std::ceil(std::log10(hi))) + 1;
    for (int e = e0; e <= e1; ++e) {
        for (double m : {1.0, 2.0, 5.0}) {
            const double v = m * std::pow(10.0, e);
            if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) ticks.push_back(v);
        }
    }
    return ticks;
}

std::string fmt_tick(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

void plot_speedup_recall(const std::vector<ResultRow>& rows, const std::string& scenario,
                         const std::string& path) {
    std::map<std::string, std::vector<ScoredPoint>> by_method;
    for (const ResultRow& row : rows) {
        if (row.scenario != scenario) continue;
        if (!(row.mean_recall > 0.0) || !(row.speedup > 0.0)) continue;  // log axes
        by_method[row.method].push_back({row.mean_recall, row.speedup});
    }
    if (by_method.empty()) {
        throw std::invalid_argument("no plottable rows for scenario '" + scenario + "'");
    }

    // Per-method Pareto frontiers, then the shared log-log domain.
    std::map<std::string, std::vector<ParetoPoint>> frontiers;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [method, points] : by_method) {
        std::vector<ParetoPoint> frontier = pareto(points);
        for (const ParetoPoint& p : frontier) {
            xmin = std::min(xmin, p.mean_recall);
            xmax = std::max(xmax, p.mean_recall);
            ymin = std::min(ymin, p.speedup);
            ymax = std::max(ymax, p.speedup);
        }
        frontiers[method] = std::move(frontier);
    }
    ymin = std::min(ymin, 1.0);  // the reference line is always inside the frame
    ymax = std::max(ymax, 1.0);

    double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
    // 5% padding in log space; degenerate spans get a tenth of a decade.
    const auto pad = [](double& a, double& b) {
        if (b - a < 1e-12) {
            a -= 0.1;
            b += 0.1;
        } else {
            const double margin = 0.05 * (b - a);
            a -= margin;
            b += margin;
        }
    };
    pad(lx0, lx1);
    pad(ly0, ly1);

    const auto px = [&](double x) { return kMarginL + (std::log10(x) - lx0) / (lx1 - lx0) * kPlotW; };
    const auto py = [&](double y) {
        return kMarginT + kPlotH - (std::log10(y) - ly0) / (ly1 - ly0) * kPlotH;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "  <rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    svg << "  <text x=\"" << fmt2(kMarginL) << "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << scenario << ": speedup vs mean recall (log-log)</text>\n";
    svg << "  <rect x=\"" << fmt2(kMarginL) << "\" y=\"" << fmt2(kMarginT) << "\" width=\""
        << fmt2(kPlotW) << "\" height=\"" << fmt2(kPlotH)
        << "\" fill=\"none\" stroke=\"#222222\"/>\n";

    for (double t : log_ticks(std::pow(10.0, lx0), std::pow(10.0, lx1))) {
        const double x = px(t);
        svg << "  <line x1=\"" << fmt2(x) << "\" y1=\"" << fmt2(kMarginT + kPlotH) << "\" x2=\""
            << fmt2(x) << "\" y2=\"" << fmt2(kMarginT + kPlotH + 5)
            << "\" stroke=\"#222222\"/>\n";
        svg << "  <line x1=\"" << fmt2(x) << "\" y1=\"" << fmt2(kMarginT) << "\" x2=\"" << fmt2(x)
            << "\" y2=\"" << fmt2(kMarginT + kPlotH)
            << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        svg << "  <text x=\"" << fmt2(x) << "\" y=\"" << fmt2(kMarginT + kPlotH + 20)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt_tick(t) << "</text>\n";
    }
    for (double t : log_ticks(std::pow(10.0, ly0), std::pow(10.0, ly1))) {
        const double y = py(t);
        svg << "  <line x1=\"" << fmt2(kMarginL - 5) << "\" y1=\"" << fmt2(y) << "\" x2=\""
            << fmt2(kMarginL) << "\" y2=\"" << fmt2(y) << "\" stroke=\"#222222\"/>\n";
        svg << "  <line x1=\"" << fmt2(kMarginL) << "\" y1=\"" << fmt2(y) << "\" x2=\""
            << fmt2(kMarginL + kPlotW) << "\" y2=\"" << fmt2(y)
            << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        svg << "  <text x=\"" << fmt2(kMarginL - 9) << "\" y=\"" << fmt2(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt_tick(t)
            << "</text>\n";
    }
    svg << "  <text x=\"" << fmt2(kMarginL + kPlotW / 2) << "\" y=\"" << fmt2(kHeight - 16)
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">mean recall"
           "</text>\n";
    svg << "  <text x=\"20\" y=\"" << fmt2(kMarginT + kPlotH / 2)
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 20 "
        << fmt2(kMarginT + kPlotH / 2) << ")\">speedup over exhaustive baseline</text>\n";

    // Reference line: parity with the exhaustive scan.
    svg << "  <line x1=\"" << fmt2(kMarginL) << "\" y1=\"" << fmt2(py(1.0)) << "\" x2=\""
        << fmt2(kMarginL + kPlotW) << "\" y2=\"" << fmt2(py(1.0))
        << "\" stroke=\"#888888\" stroke-dasharray=\"6,4\"/>\n";

    std::size_t rank = 0;
    for (const auto& [method, frontier] : frontiers) {
        const std::string colour = method_colour(method, rank);
        if (frontier.size() > 1) {
            svg << "  <polyline fill=\"none\" stroke=\"" << colour
                << "\" stroke-width=\"1.8\" points=\"";
            for (std::size_t i = 0; i < frontier.size(); ++i) {
                if (i != 0) svg << ' ';
                svg << fmt2(px(frontier[i].mean_recall)) << ',' << fmt2(py(frontier[i].speedup));
            }
            svg << "\"/>\n";
        }
        for (const ParetoPoint& p : frontier) {
            svg << "  <circle cx=\"" << fmt2(px(p.mean_recall)) << "\" cy=\""
                << fmt2(py(p.speedup)) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        }
        const double ly = kMarginT + 14 + 20 * static_cast<double>(rank);
        svg << "  <line x1=\"" << fmt2(kWidth - kMarginR + 10) << "\" y1=\"" << fmt2(ly - 4)
            << "\" x2=\"" << fmt2(kWidth - kMarginR + 34) << "\" y2=\"" << fmt2(ly - 4)
            << "\" stroke=\"" << colour << "\" stroke-width=\"1.8\"/>\n";
        svg << "  <text x=\"" << fmt2(kWidth - kMarginR + 40) << "\" y=\"" << fmt2(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << method << "</text>\n";
        ++rank;
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << svg.str();
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace dynann
