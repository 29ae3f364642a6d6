#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "lfsim/cachenet.hpp"
#include "lfsim/ckat.hpp"
#include "lfsim/delivery.hpp"
#include "lfsim/netsim.hpp"
#include "lfsim/workload.hpp"

namespace py = pybind11;
using namespace lfsim;

namespace {

SegmentKey key_of(const std::pair<std::uint32_t, std::int64_t>& k) { return {k.first, k.second}; }

py::list keys_list(const std::vector<SegmentKey>& keys) {
    py::list out;
    for (const auto& k : keys) out.append(py::make_tuple(k.object, k.chunk));
    return out;
}

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["mode"] = m.mode;
    d["seed"] = m.seed;
    d["requests"] = m.requests;
    d["local"] = m.hit_fraction(Tier::Local);
    d["group"] = m.hit_fraction(Tier::Group);
    d["peer"] = m.hit_fraction(Tier::Peer);
    d["origin"] = m.hit_fraction(Tier::Origin);
    d["mean_latency_s"] = m.mean_latency_s;
    d["median_latency_s"] = m.median_latency_s;
    d["p95_latency_s"] = m.p95_latency_s;
    d["origin_requests"] = m.origin_requests;
    d["origin_bytes"] = m.origin_bytes;
    d["wan_bytes"] = m.wan_bytes;
    d["prefetch_bytes"] = m.prefetch_bytes;
    d["wasted_prefetch_bytes"] = m.wasted_prefetch_bytes;
    d["stream_pushes"] = m.stream_pushes;
    d["capacity_bytes"] = m.capacity_bytes;
    return d;
}

std::set<Source> sources_of(const std::string& label) { return parse_sources_label(label); }

}  // namespace

PYBIND11_MODULE(_lfsim, m) {
    m.doc() = "Workload generation, cache network simulation and knowledge-graph recommendation.";
    m.attr("__version__") = cli::kVersion;

    py::register_exception<Error>(m, "LfsimError", PyExc_RuntimeError);

    // workload
    py::class_<Request>(m, "Request")
        .def_readonly("req_id", &Request::req_id)
        .def_readonly("t_arrive", &Request::t_arrive)
        .def_readonly("user_id", &Request::user_id)
        .def_readonly("object_id", &Request::object_id)
        .def_property_readonly("window", [](const Request& r) { return py::make_tuple(r.window.start, r.window.end); })
        .def_property_readonly("channel", [](const Request& r) { return std::string(to_string(r.channel)); })
        .def("__repr__", [](const Request& r) {
            return "<Request " + std::to_string(r.req_id) + " " + r.user_id + " " + r.object_id + ">";
        });

    py::class_<DataObject>(m, "DataObject")
        .def_readonly("object_id", &DataObject::object_id)
        .def_readonly("instrument_id", &DataObject::instrument_id)
        .def_readonly("region_id", &DataObject::region_id)
        .def_readonly("data_kind", &DataObject::data_kind)
        .def_readonly("rate", &DataObject::rate);

    py::class_<UserProfile>(m, "UserProfile")
        .def_readonly("user_id", &UserProfile::user_id)
        .def_readonly("org_id", &UserProfile::org_id)
        .def_readonly("x", &UserProfile::x)
        .def_readonly("y", &UserProfile::y)
        .def_readonly("home_dtn", &UserProfile::home_dtn);

    py::class_<Catalog>(m, "Catalog")
        .def_property_readonly("objects", &Catalog::objects)
        .def_property_readonly("users", &Catalog::users)
        .def("object", &Catalog::object, py::return_value_policy::copy);

    py::class_<GeneratorParams>(m, "GeneratorParams")
        .def(py::init<>())
        .def_readwrite("regular_users", &GeneratorParams::regular_users)
        .def_readwrite("overlapping_users", &GeneratorParams::overlapping_users)
        .def_readwrite("realtime_users", &GeneratorParams::realtime_users)
        .def_readwrite("portal_users", &GeneratorParams::portal_users)
        .def_readwrite("jitter", &GeneratorParams::jitter)
        .def_readwrite("orgs", &GeneratorParams::orgs)
        .def_readwrite("regions", &GeneratorParams::regions)
        .def_readwrite("reuse_fraction", &GeneratorParams::reuse_fraction)
        .def_readwrite("locality_bias", &GeneratorParams::locality_bias)
        .def_readwrite("duration_s", &GeneratorParams::duration_s)
        .def_readwrite("chunk_s", &GeneratorParams::chunk_s);

    py::class_<Workload>(m, "Workload")
        .def_readonly("catalog", &Workload::catalog)
        .def_readonly("trace", &Workload::trace)
        .def_property_readonly("truth", [](const Workload& w) {
            py::dict d;
            for (const auto& u : w.truth.users)
                d[py::str(u.user_id)] = u.portal ? std::string("portal") : std::string(to_string(u.kind));
            return d;
        });

    m.def("generate_trace", &generate_trace, py::arg("params") = GeneratorParams{}, py::arg("seed") = 1);
    m.def(
        "classify",
        [](const std::vector<Request>& history, double cv_max, double realtime_threshold_s) {
            const auto p = classify_user_pattern(history, {cv_max, realtime_threshold_s, 3});
            py::dict d;
            d["kind"] = std::string(to_string(p.kind));
            d["period_s"] = p.period_s;
            d["window_s"] = p.window_s;
            d["overlap_s"] = p.overlap_s;
            d["history"] = p.history;
            return d;
        },
        py::arg("history"), py::arg("cv_max") = 0.2, py::arg("realtime_threshold_s") = 300.0);
    m.def("program_histories", &program_histories);
    m.def("requests_csv", [](const Trace& t) {
        std::ostringstream os;
        write_requests_csv(os, t);
        return os.str();
    });

    // cachenet
    py::class_<LruCache>(m, "LruCache")
        .def(py::init<std::uint64_t>(), py::arg("capacity"))
        .def("get", [](LruCache& c, std::pair<std::uint32_t, std::int64_t> k) { return c.get(key_of(k)); })
        .def(
            "put",
            [](LruCache& c, std::pair<std::uint32_t, std::int64_t> k, std::uint64_t size, double now) {
                const auto r = c.put(key_of(k), size, now);
                return py::make_tuple(r.inserted, keys_list(r.evicted));
            },
            py::arg("key"), py::arg("size"), py::arg("now") = 0.0)
        .def("pin", [](LruCache& c, std::pair<std::uint32_t, std::int64_t> k, double until) { c.pin(key_of(k), until); })
        .def("unpin", [](LruCache& c, std::pair<std::uint32_t, std::int64_t> k) { c.unpin(key_of(k)); })
        .def("__contains__", [](const LruCache& c, std::pair<std::uint32_t, std::int64_t> k) { return c.contains(key_of(k)); })
        .def("__len__", &LruCache::size)
        .def_property_readonly("used", &LruCache::used)
        .def_property_readonly("capacity", &LruCache::capacity)
        .def("keys", [](const LruCache& c) { return keys_list(c.keys_by_recency()); });

    m.def(
        "kmeans",
        [](const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::size_t restarts) {
            const auto r = kmeans_users(points, k, seed, 100, restarts);
            return py::make_tuple(r.assignment, r.centroids, r.wcss_history);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 1, py::arg("restarts") = 10);

    // netsim and delivery
    py::class_<Topology>(m, "Topology").def("to_json", [](const Topology& t) { return topology_json(t); });
    m.def("default_topology", &default_topology);
    m.def("parse_topology", &parse_topology_json);
    m.def("modes", [] {
        std::vector<std::string> out;
        for (auto mode : all_modes()) out.emplace_back(to_string(mode));
        return out;
    });
    m.def(
        "run_scenario",
        [](const Workload& w, const std::string& mode, std::uint64_t seed, const Topology* topology,
           std::optional<double> capacity_fraction, bool infinite_capacity) {
            ScenarioConfig c;
            c.mode = parse_mode(mode);
            c.seed = seed;
            c.capacity_fraction = capacity_fraction;
            c.infinite_capacity = infinite_capacity;
            const auto topo = topology ? *topology : default_topology();
            ScenarioResult r;
            {
                py::gil_scoped_release release;
                r = run_scenario(w.trace, w.catalog, topo, c);
            }
            return metrics_dict(r.metrics);
        },
        py::arg("workload"), py::arg("mode") = "smart_cache", py::arg("seed") = 1, py::arg("topology") = nullptr,
        py::arg("capacity_fraction") = std::nullopt, py::arg("infinite_capacity") = false);

    // ckat
    py::class_<RecDatasetParams>(m, "RecDatasetParams")
        .def(py::init<>())
        .def_readwrite("users", &RecDatasetParams::users)
        .def_readwrite("regions", &RecDatasetParams::regions)
        .def_readwrite("instruments_per_region", &RecDatasetParams::instruments_per_region)
        .def_readwrite("kinds_per_instrument", &RecDatasetParams::kinds_per_instrument)
        .def_readwrite("orgs", &RecDatasetParams::orgs)
        .def_readwrite("interactions_min", &RecDatasetParams::interactions_min)
        .def_readwrite("interactions_max", &RecDatasetParams::interactions_max)
        .def_readwrite("locality", &RecDatasetParams::locality);
    m.def("planted_dataset", &planted_rec_dataset, py::arg("params") = RecDatasetParams{}, py::arg("seed") = 1);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("negatives", &TrainConfig::negatives)
        .def_readwrite("attention", &TrainConfig::attention)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("d", &TrainConfig::d)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("layers", &TrainConfig::layers);

    py::class_<CKG>(m, "CKG")
        .def_property_readonly("entities", &CKG::entities)
        .def_property_readonly("relations", &CKG::relations)
        .def_property_readonly("num_triples", [](const CKG& g) { return g.triples().size(); })
        .def_property_readonly("sources", [](const CKG& g) { return sources_label(g.sources()); });

    py::class_<HoldoutSplit>(m, "HoldoutSplit")
        .def_readonly("train", &HoldoutSplit::train)
        .def_readonly("test", &HoldoutSplit::test);
    m.def(
        "holdout_split", [](const Workload& w, double fraction) { return holdout_split(user_items(w.trace), fraction); },
        py::arg("workload"), py::arg("fraction") = 0.2);
    m.def(
        "build_graph",
        [](const Workload& w, const UserItems& train, const std::string& sources) {
            return build_ckg(build_source_kgs(w.catalog, train), sources_of(sources));
        },
        py::arg("workload"), py::arg("train"), py::arg("sources") = "interactions+locality+user_association");

    py::class_<Model>(m, "Model")
        .def_property_readonly("graph", [](const Model& mo) { return mo.graph; })
        .def(
            "recommend",
            [](const Model& mo, const std::string& user, std::size_t K, bool exclude_seen) {
                std::vector<std::pair<std::string, double>> out;
                for (const auto& r : recommend_topk(mo, user, K, exclude_seen)) out.emplace_back(r.item, r.score);
                return out;
            },
            py::arg("user"), py::arg("K") = 10, py::arg("exclude_seen") = true)
        .def(
            "evaluate",
            [](const Model& mo, const UserItems& test, std::size_t K) {
                const auto r = evaluate(mo, test, K);
                return py::make_tuple(r.recall, r.ndcg);
            },
            py::arg("test"), py::arg("K") = 10)
        .def("checkpoint", [](const Model& mo, const TrainConfig& c) { return checkpoint_json(mo, c); });

    m.def(
        "train",
        [](const CKG& g, const TrainConfig& config) {
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(g, config);
            }
            return py::make_tuple(make_model(g, r.params, config.attention), r.kg_loss, r.cf_loss);
        },
        py::arg("graph"), py::arg("config") = TrainConfig{});
    m.def(
        "popularity_eval",
        [](const UserItems& train, const UserItems& test, std::size_t K) {
            const auto r = evaluate_ranker(popularity_ranker(train), test, K);
            return py::make_tuple(r.recall, r.ndcg);
        },
        py::arg("train"), py::arg("test"), py::arg("K") = 10);

    // command line
    m.def("cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "lfsim");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
            py::gil_scoped_release release;
            code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    });
}
