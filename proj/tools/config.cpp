#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "cli.hpp"

namespace lfsim::cli {

namespace fs = std::filesystem;

json default_config() {
    const GeneratorParams g;
    const RecDatasetParams r;
    const ClassifierConfig c;
    const ScenarioConfig s;
    const TrainConfig t;
    return json{
        {"seed", 1},
        {"seeds", json::array({1})},
        {"topology", nullptr},
        {"workload",
         {{"source", "generate"},
          {"dir", nullptr},
          {"catalog", nullptr},
          {"users", nullptr},
          {"recipes", nullptr},
          {"requests", nullptr}}},
        {"generator",
         {{"regular_users", g.regular_users},
          {"overlapping_users", g.overlapping_users},
          {"realtime_users", g.realtime_users},
          {"portal_users", g.portal_users},
          {"regular_periods", g.regular_periods},
          {"overlapping_periods", g.overlapping_periods},
          {"overlap_fractions", g.overlap_fractions},
          {"realtime_periods", g.realtime_periods},
          {"realtime_windows", g.realtime_windows},
          {"jitter", g.jitter},
          {"orgs", g.orgs},
          {"regions", g.regions},
          {"instruments_per_region", g.instruments_per_region},
          {"kinds_per_instrument", g.kinds_per_instrument},
          {"reuse_fraction", g.reuse_fraction},
          {"locality_bias", g.locality_bias},
          {"objects_per_user_min", g.objects_per_user_min},
          {"objects_per_user_max", g.objects_per_user_max},
          {"realtime_objects_max", g.realtime_objects_max},
          {"portal_requests_per_user", g.portal_requests_per_user},
          {"duration_s", g.duration_s},
          {"chunk_s", g.chunk_s},
          {"rate_min", g.rate_min},
          {"rate_max", g.rate_max},
          {"dtns", g.dtns}}},
        {"planted",
         {{"users", r.users},
          {"regions", r.regions},
          {"instruments_per_region", r.instruments_per_region},
          {"kinds_per_instrument", r.kinds_per_instrument},
          {"orgs", r.orgs},
          {"interactions_min", r.interactions_min},
          {"interactions_max", r.interactions_max},
          {"locality", r.locality}}},
        {"classifier",
         {{"cv_max", c.cv_max}, {"realtime_threshold_s", c.realtime_threshold_s}, {"min_history", c.min_history}}},
        {"simulation",
         {{"mode", std::string(to_string(s.mode))},
          {"modes", json::array({"no_cache", "lru_only", "virtual_groups", "smart_cache"})},
          {"chunk_s", s.chunk_s},
          {"infinite_capacity", s.infinite_capacity},
          {"capacity_bytes", nullptr},
          {"capacity_fraction", nullptr},
          {"k", s.k},
          {"coord_weight", s.weights.coord},
          {"interest_weight", s.weights.interest},
          {"lead_factor", s.lead_factor},
          {"history_sessions", s.history_sessions},
          {"prefetch", s.prefetch},
          {"streaming", s.streaming},
          {"workers", 1}}},
        {"ckat",
         {{"learning_rate", t.learning_rate},
          {"lambda", t.lambda},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"negatives", t.negatives},
          {"attention", t.attention},
          {"d", t.d},
          {"k", t.k},
          {"layers", t.layers},
          {"reduction", t.reduction == Reduction::Sum ? "sum" : "mean"},
          {"sources", "interactions+locality+user_association"},
          {"holdout", 0.2},
          {"K", 10},
          {"noise_triples", 0},
          {"study_attention", json::array({true, false})},
          {"subsets", json::array()},
          {"model", nullptr},
          {"users", json::array()},
          {"exclude_seen", true}}},
        {"report", {{"inputs", json::array()}}},
    };
}

json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    if (!j.is_object()) throw ConfigError("config '" + path.string() + "' is not a JSON object");
    if (j.contains("command") && j.contains("config")) return j.at("config");
    return j;
}

void merge_config(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : patch.items()) {
        const auto path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        auto& slot = base[key];
        if (slot.is_object())
            merge_config(slot, value, path);
        else
            slot = value;
    }
}

void absolutize_paths(json& config) {
    auto fix = [](json& v) {
        if (v.is_string()) v = fs::absolute(v.get<std::string>()).lexically_normal().string();
    };
    fix(config["topology"]);
    for (const auto* k : {"dir", "catalog", "users", "recipes", "requests"}) fix(config["workload"][k]);
    fix(config["ckat"]["model"]);
    for (auto& p : config["report"]["inputs"]) fix(p);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

std::string config_hash(const json& config) { return "fnv1a64:" + fnv1a_hex(config.dump()); }

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& section) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
    }
}

}  // namespace

Topology load_topology_config(const json& config) {
    const auto& t = config.at("topology");
    if (t.is_null()) return default_topology();
    if (!t.is_string()) throw ConfigError("config key 'topology' must be a path or null");
    return load_topology(t.get<std::string>());
}

GeneratorParams generator_params(const json& config) {
    const auto& g = config.at("generator");
    const std::string s = "generator";
    GeneratorParams p;
    p.regular_users = get<int>(g, "regular_users", s);
    p.overlapping_users = get<int>(g, "overlapping_users", s);
    p.realtime_users = get<int>(g, "realtime_users", s);
    p.portal_users = get<int>(g, "portal_users", s);
    p.regular_periods = get<std::vector<double>>(g, "regular_periods", s);
    p.overlapping_periods = get<std::vector<double>>(g, "overlapping_periods", s);
    p.overlap_fractions = get<std::vector<double>>(g, "overlap_fractions", s);
    p.realtime_periods = get<std::vector<double>>(g, "realtime_periods", s);
    p.realtime_windows = get<std::vector<double>>(g, "realtime_windows", s);
    p.jitter = get<double>(g, "jitter", s);
    p.orgs = get<int>(g, "orgs", s);
    p.regions = get<int>(g, "regions", s);
    p.instruments_per_region = get<int>(g, "instruments_per_region", s);
    p.kinds_per_instrument = get<int>(g, "kinds_per_instrument", s);
    p.reuse_fraction = get<double>(g, "reuse_fraction", s);
    p.locality_bias = get<double>(g, "locality_bias", s);
    p.objects_per_user_min = get<int>(g, "objects_per_user_min", s);
    p.objects_per_user_max = get<int>(g, "objects_per_user_max", s);
    p.realtime_objects_max = get<int>(g, "realtime_objects_max", s);
    p.portal_requests_per_user = get<int>(g, "portal_requests_per_user", s);
    p.duration_s = get<double>(g, "duration_s", s);
    p.chunk_s = get<double>(g, "chunk_s", s);
    p.rate_min = get<std::int64_t>(g, "rate_min", s);
    p.rate_max = get<std::int64_t>(g, "rate_max", s);
    p.dtns = get<std::vector<std::string>>(g, "dtns", s);
    return p;
}

RecDatasetParams planted_params(const json& config) {
    const auto& g = config.at("planted");
    const std::string s = "planted";
    RecDatasetParams p;
    p.users = get<int>(g, "users", s);
    p.regions = get<int>(g, "regions", s);
    p.instruments_per_region = get<int>(g, "instruments_per_region", s);
    p.kinds_per_instrument = get<int>(g, "kinds_per_instrument", s);
    p.orgs = get<int>(g, "orgs", s);
    p.interactions_min = get<int>(g, "interactions_min", s);
    p.interactions_max = get<int>(g, "interactions_max", s);
    p.locality = get<double>(g, "locality", s);
    return p;
}

ClassifierConfig classifier_config(const json& config) {
    const auto& c = config.at("classifier");
    ClassifierConfig out;
    out.cv_max = get<double>(c, "cv_max", "classifier");
    out.realtime_threshold_s = get<double>(c, "realtime_threshold_s", "classifier");
    out.min_history = get<std::size_t>(c, "min_history", "classifier");
    return out;
}

Inputs load_inputs(const json& config, std::uint64_t seed) {
    Inputs in;
    in.topology = load_topology_config(config);
    const auto& w = config.at("workload");
    const auto source = get<std::string>(w, "source", "workload");
    if (source == "generate") {
        auto wl = generate_trace(generator_params(config), seed);
        in.catalog = std::move(wl.catalog);
        in.trace = std::move(wl.trace);
    } else if (source == "planted") {
        auto wl = planted_rec_dataset(planted_params(config), seed);
        in.catalog = std::move(wl.catalog);
        in.trace = std::move(wl.trace);
    } else if (source == "files") {
        auto path = [&](const char* key, const char* file) -> fs::path {
            if (w.at(key).is_string()) return w.at(key).get<std::string>();
            if (w.at("dir").is_string()) return fs::path(w.at("dir").get<std::string>()) / file;
            throw ConfigError(std::string("workload.") + key + " is not set and workload.dir is empty");
        };
        std::set<std::string> nodes;
        for (const auto& n : in.topology.nodes()) nodes.insert(n.id);
        in.catalog = load_catalog({path("catalog", "catalog.csv"), path("users", "users.csv"), path("recipes", "recipes.csv")},
                                  &nodes);
        in.trace = load_requests(path("requests", "requests.csv"), &in.catalog);
    } else {
        throw ConfigError("workload.source must be files, generate or planted");
    }
    return in;
}

ScenarioConfig scenario_config(const json& config, Mode mode, std::uint64_t seed) {
    const auto& s = config.at("simulation");
    const std::string sec = "simulation";
    ScenarioConfig c;
    c.mode = mode;
    c.seed = seed;
    c.chunk_s = get<double>(s, "chunk_s", sec);
    c.classifier = classifier_config(config);
    c.infinite_capacity = get<bool>(s, "infinite_capacity", sec);
    if (!s.at("capacity_bytes").is_null()) c.capacity_bytes = get<std::uint64_t>(s, "capacity_bytes", sec);
    if (!s.at("capacity_fraction").is_null()) c.capacity_fraction = get<double>(s, "capacity_fraction", sec);
    c.k = get<std::size_t>(s, "k", sec);
    c.weights.coord = get<double>(s, "coord_weight", sec);
    c.weights.interest = get<double>(s, "interest_weight", sec);
    c.lead_factor = get<double>(s, "lead_factor", sec);
    c.history_sessions = get<std::size_t>(s, "history_sessions", sec);
    c.prefetch = get<bool>(s, "prefetch", sec);
    c.streaming = get<bool>(s, "streaming", sec);
    return c;
}

TrainConfig train_config(const json& config, std::uint64_t seed) {
    const auto& c = config.at("ckat");
    const std::string s = "ckat";
    TrainConfig t;
    t.learning_rate = get<double>(c, "learning_rate", s);
    t.lambda = get<double>(c, "lambda", s);
    t.batch_size = get<std::size_t>(c, "batch_size", s);
    t.epochs = get<std::size_t>(c, "epochs", s);
    t.negatives = get<std::size_t>(c, "negatives", s);
    t.attention = get<bool>(c, "attention", s);
    t.d = get<std::size_t>(c, "d", s);
    t.k = get<std::size_t>(c, "k", s);
    t.layers = get<std::size_t>(c, "layers", s);
    const auto red = get<std::string>(c, "reduction", s);
    if (red != "sum" && red != "mean") throw ConfigError("ckat.reduction must be sum or mean");
    t.reduction = red == "sum" ? Reduction::Sum : Reduction::Mean;
    t.seed = seed;
    return t;
}

std::set<Source> selected_sources(const json& config) {
    return parse_sources_label(get<std::string>(config.at("ckat"), "sources", "ckat"));
}

OutputSet::OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void OutputSet::write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    hashes_[name] = "fnv1a64:" + fnv1a_hex(content);
}

void OutputSet::write_manifest(const std::string& command, const json& config) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["config_hash"] = config_hash(config);
    m["seed"] = config.at("seed");
    m["outputs"] = hashes_;
    m["versions"] = {{"lfsim", kVersion},
                     {"compiler", __VERSION__},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw ConfigError("cannot write manifest in '" + dir_.string() + "'");
    out << m.dump(2) << '\n';
}

}  // namespace lfsim::cli
