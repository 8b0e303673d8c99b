// Python bindings for the benchmark core: dataset store, synthetic data,
// index construction and search, workload generation, and the timed replay
// harness.  Reporting stays on the CLI side; this module is the scripting
// surface for experiments and checks.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynann/baseline.hpp"
#include "dynann/harness.hpp"
#include "dynann/index.hpp"
#include "dynann/io.hpp"
#include "dynann/workload.hpp"

namespace py = pybind11;
using namespace dynann;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<float> as_vector(const FloatArray& array) {
    if (array.ndim() != 1) throw std::invalid_argument("expected a 1-d float array");
    return {array.data(), array.data() + array.shape(0)};
}

std::vector<std::vector<float>> as_rows(const FloatArray& array) {
    if (array.ndim() != 2) throw std::invalid_argument("expected a 2-d float array");
    const std::size_t n = static_cast<std::size_t>(array.shape(0));
    const std::size_t dim = static_cast<std::size_t>(array.shape(1));
    std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
    const float* data = array.data();
    for (std::size_t i = 0; i < n; ++i)
        rows[i].assign(data + i * dim, data + (i + 1) * dim);
    return rows;
}

py::array_t<float> from_rows(const std::vector<std::vector<float>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t dim = n == 0 ? 0 : rows[0].size();
    py::array_t<float> out({n, dim});
    float* data = out.mutable_data();
    for (std::size_t i = 0; i < n; ++i)
        std::copy(rows[i].begin(), rows[i].end(), data + i * dim);
    return out;
}

// bool first: Python bools are also ints.
ParamMap as_params(const py::dict& dict) {
    ParamMap params;
    for (const auto& item : dict) {
        const std::string key = py::cast<std::string>(item.first);
        const py::handle value = item.second;
        if (py::isinstance<py::bool_>(value))
            params[key] = py::cast<bool>(value);
        else if (py::isinstance<py::int_>(value))
            params[key] = py::cast<std::int64_t>(value);
        else if (py::isinstance<py::float_>(value))
            params[key] = py::cast<double>(value);
        else
            params[key] = py::cast<std::string>(value);
    }
    return params;
}

std::vector<std::pair<std::uint64_t, double>> as_pairs(const NeighbourList& list) {
    std::vector<std::pair<std::uint64_t, double>> out;
    out.reserve(list.size());
    for (const Neighbour& n : list) out.emplace_back(n.id, n.distance_sq);
    return out;
}

NeighbourList ids_to_list(const std::vector<std::uint64_t>& ids) {
    NeighbourList list;
    list.reserve(ids.size());
    for (const std::uint64_t id : ids) list.push_back({id, 0.0});
    return list;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic approximate nearest neighbour benchmark core";

    py::class_<DatasetStore>(m, "DatasetStore")
        .def(py::init<std::size_t>(), py::arg("dimension"))
        .def_property_readonly("dimension", &DatasetStore::dimension)
        .def("__len__", &DatasetStore::size)
        .def_property_readonly("snapshot_version", &DatasetStore::snapshot_version)
        .def("add",
             [](DatasetStore& store, const FloatArray& v) { return store.add(as_vector(v)); },
             py::arg("vector"))
        .def("overwrite",
             [](DatasetStore& store, VectorId id, const FloatArray& v) {
                 store.overwrite(id, as_vector(v));
             },
             py::arg("id"), py::arg("vector"))
        .def("vector",
             [](const DatasetStore& store, VectorId id) {
                 const auto v = store.vector(id);
                 return py::array_t<float>(static_cast<py::ssize_t>(v.size()), v.data());
             },
             py::arg("id"))
        .def("memory_bytes", &DatasetStore::memory_bytes);

    m.def("gen_synthetic",
          [](std::size_t count, std::size_t dim, std::size_t clusters, double spread,
             std::uint64_t seed) {
              return from_rows(gen_synthetic({count, dim, clusters, spread}, seed).samples);
          },
          py::arg("count"), py::arg("dim"), py::arg("clusters") = 1, py::arg("spread") = 0.1,
          py::arg("seed") = 0);

    m.def("exact_knn",
          [](const DatasetStore& store, const FloatArray& query, std::size_t k) {
              return as_pairs(exact_knn(store, as_vector(query), k));
          },
          py::arg("store"), py::arg("query"), py::arg("k"));

    py::class_<DynamicIndex, std::unique_ptr<DynamicIndex>>(m, "Index")
        .def_property_readonly("name", &DynamicIndex::name)
        // keep_alive: the index reads vectors through the store pointer for
        // the rest of its life.
        .def("build", &DynamicIndex::build, py::arg("store"), py::keep_alive<1, 2>())
        .def("insert", &DynamicIndex::insert, py::arg("id"))
        .def("update", &DynamicIndex::update, py::arg("id"))
        .def("search",
             [](DynamicIndex& index, const FloatArray& query, std::size_t k) {
                 const std::vector<float> q = as_vector(query);
                 return as_pairs(index.search(q, k));
             },
             py::arg("query"), py::arg("k"))
        .def("maintain", &DynamicIndex::maintain)
        .def("memory_bytes", &DynamicIndex::memory_bytes)
        .def("audit_violations",
             [](const DynamicIndex& index) { return index.audit().violations; });

    m.def("make_index",
          [](const std::string& method, const py::dict& params, std::uint64_t seed) {
              return make_index(method, as_params(params), seed);
          },
          py::arg("method"), py::arg("params") = py::dict(), py::arg("seed") = 0);
    m.def("known_methods", &known_methods);

    py::class_<WorkloadScript>(m, "WorkloadScript")
        .def_property_readonly("scenario",
                               [](const WorkloadScript& s) { return s.meta.scenario; })
        .def_property_readonly("dim", [](const WorkloadScript& s) { return s.meta.dim; })
        .def_property_readonly("n0", [](const WorkloadScript& s) { return s.meta.n0; })
        .def_property_readonly("n_events",
                               [](const WorkloadScript& s) { return s.meta.n_events; })
        .def_property_readonly("n_searches",
                               [](const WorkloadScript& s) { return s.meta.n_searches; })
        .def_property_readonly("eta", [](const WorkloadScript& s) { return s.meta.eta; })
        .def_property_readonly("n_blocks",
                               [](const WorkloadScript& s) { return s.blocks.size(); })
        .def_property_readonly("digest", &script_digest);

    m.def("gen_odc",
          [](const FloatArray& pool, std::size_t n0, std::size_t n_events,
             std::size_t event_batch, std::size_t search_batch, std::uint64_t seed) {
              return gen_odc(as_rows(pool), n0, n_events, event_batch, search_batch, seed);
          },
          py::arg("pool"), py::arg("n0"), py::arg("n_events"), py::arg("event_batch") = 1,
          py::arg("search_batch") = 1, py::arg("seed") = 0);

    m.def("gen_ofl",
          [](const FloatArray& pool, std::size_t n0, std::size_t n_events, double eta,
             std::size_t event_batch, std::size_t search_batch, std::size_t clusters,
             const FloatArray& queries, std::uint64_t seed) {
              GenOflOptions options;
              options.eta = eta;
              options.event_batch = event_batch;
              options.search_batch = search_batch;
              options.clusters = clusters;
              return gen_ofl(as_rows(pool), n0, n_events, options, as_rows(queries), seed);
          },
          py::arg("pool"), py::arg("n0"), py::arg("n_events"), py::arg("eta") = 0.1,
          py::arg("event_batch") = 200, py::arg("search_batch") = 200, py::arg("clusters") = 0,
          py::arg("queries") = FloatArray(), py::arg("seed") = 0);

    m.def("reschedule",
          [](const WorkloadScript& script, double events_per_search, std::uint64_t event_batch,
             std::uint64_t search_batch) {
              return reschedule(script, {events_per_search, event_batch, search_batch});
          },
          py::arg("script"), py::arg("events_per_search"), py::arg("event_batch") = 0,
          py::arg("search_batch") = 0);

    m.def("validate_script", &validate_script, py::arg("script"));
    m.def("save_script", &save_script, py::arg("path"), py::arg("script"));
    m.def("load_script", &load_script, py::arg("path"));

    py::class_<GroundTruthCache>(m, "GroundTruthCache")
        .def(py::init<>())
        .def_property_readonly("hits", &GroundTruthCache::hits)
        .def_property_readonly("misses", &GroundTruthCache::misses)
        .def("__len__", &GroundTruthCache::size)
        .def("save", &GroundTruthCache::save, py::arg("path"))
        .def("load", &GroundTruthCache::load, py::arg("path"));

    py::class_<RunRecord>(m, "RunRecord")
        .def_property_readonly("method", [](const RunRecord& r) { return r.config.method; })
        .def_property_readonly("params",
                               [](const RunRecord& r) { return format_params(r.config.params); })
        .def_readonly("mean_recall", &RunRecord::mean_recall)
        .def_readonly("build_seconds", &RunRecord::build_seconds)
        .def_readonly("event_seconds", &RunRecord::event_seconds)
        .def_readonly("search_seconds", &RunRecord::search_seconds)
        .def("total_seconds", &RunRecord::total_seconds)
        .def_readonly("peak_memory_bytes", &RunRecord::peak_memory_bytes)
        .def_readonly("failed", &RunRecord::failed)
        .def_readonly("error", &RunRecord::error)
        .def_property_readonly("recalls", [](const RunRecord& r) {
            py::array_t<double> out(static_cast<py::ssize_t>(r.searches.size()));
            double* data = out.mutable_data();
            for (std::size_t i = 0; i < r.searches.size(); ++i) data[i] = r.searches[i].recall;
            return out;
        });

    m.def("run",
          [](const WorkloadScript& script, const std::string& method, const py::dict& params,
             std::size_t k, std::uint64_t seed, bool keep_results, GroundTruthCache* cache) {
              RunConfig config;
              config.method = method;
              config.params = as_params(params);
              config.k = k;
              config.seed = seed;
              config.keep_results = keep_results;
              return run_script(script, config, cache);
          },
          py::arg("script"), py::arg("method"), py::arg("params") = py::dict(),
          py::arg("k") = 50, py::arg("seed") = 0, py::arg("keep_results") = false,
          py::arg("cache") = nullptr);

    m.def("speedup", &speedup, py::arg("record"), py::arg("baseline"));

    m.def("recall_score",
          [](const std::vector<std::uint64_t>& result, const std::vector<std::uint64_t>& truth) {
              return recall_score(ids_to_list(result), ids_to_list(truth));
          },
          py::arg("result_ids"), py::arg("truth_ids"));
}
