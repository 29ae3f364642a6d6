#include <doctest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "cli.hpp"
#include "csv.hpp"

using namespace lfsim;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::path(LFSIM_TEST_TMP) / "cli";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result lfsim_run(std::vector<std::string> args) {
    args.insert(args.begin(), "lfsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh(const std::string& name) {
    const auto d = kTmp / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::vector<std::vector<std::string>> rows_of(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(csv::split(line));
    return rows;
}

// Small generator settings keep the CLI tests quick.
fs::path small_config(const fs::path& dir) {
    const auto p = dir / "small.json";
    std::ofstream(p) << R"({"generator": {"regular_users": 12, "overlapping_users": 8, "realtime_users": 5,
                            "portal_users": 2, "duration_s": 43200},
                            "ckat": {"epochs": 3}, "planted": {"users": 40, "regions": 4}})";
    return p;
}

}  // namespace

TEST_CASE("gen-trace is byte-identical for the same seed") {
    const auto d = fresh("gen");
    const auto cfg = small_config(d);
    REQUIRE(lfsim_run({"gen-trace", "--config", cfg.string(), "--seed", "7", "--out", (d / "a").string()}).code == 0);
    REQUIRE(lfsim_run({"gen-trace", "--config", cfg.string(), "--seed", "7", "--out", (d / "b").string()}).code == 0);
    REQUIRE(lfsim_run({"gen-trace", "--config", cfg.string(), "--seed", "8", "--out", (d / "c").string()}).code == 0);
    for (const auto* f : {"requests.csv", "catalog.csv", "users.csv", "recipes.csv", "ground_truth.json", "manifest.json"})
        CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
    CHECK(slurp(d / "a" / "requests.csv") != slurp(d / "c" / "requests.csv"));

    const auto m = nlohmann::json::parse(slurp(d / "a" / "manifest.json"));
    CHECK(m.at("command") == "gen-trace");
    CHECK(m.at("seed") == 7);
    CHECK(m.at("config_hash") == cli::config_hash(m.at("config")));
    CHECK(m.at("outputs").at("requests.csv") == "fnv1a64:" + cli::fnv1a_hex(slurp(d / "a" / "requests.csv")));
    CHECK(m.at("versions").contains("lfsim"));
}

TEST_CASE("simulate on an empty trace writes a zero row") {
    const auto d = fresh("empty");
    std::ofstream(d / "catalog.csv") << "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\nx,i,r,ctd,1000\n";
    std::ofstream(d / "users.csv") << "user_id,org_id,x,y,home_dtn\nu1,o,0,0,dtn1\n";
    std::ofstream(d / "recipes.csv") << "product_kind,input_kind\n";
    std::ofstream(d / "requests.csv") << "req_id,t_arrive_s,user_id,object_id,window_start_s,window_end_s,channel\n";
    const auto r = lfsim_run({"simulate", "--workload", d.string(), "--mode", "no_cache", "--out", (d / "out").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto rows = rows_of(d / "out" / "metrics.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0][0] == "no_cache");
    for (std::size_t c = 2; c < rows[0].size(); ++c) CHECK(rows[0][c] == "0");
}

TEST_CASE("sweep over four modes and five seeds keeps the tier ordering") {
    const auto d = fresh("sweep");
    const auto r = lfsim_run({"sweep", "--config", small_config(d).string(), "--seeds", "1", "2", "3", "4", "5",
                              "--workers", "3", "--out", (d / "s").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto rows = rows_of(d / "s" / "metrics.csv");
    REQUIRE(rows.size() == 20);
    std::map<std::string, std::map<std::string, double>> local;
    for (const auto& row : rows) local[row[1]][row[0]] = std::stod(row[3]);
    CHECK(local.size() == 5);
    for (const auto& [seed, m] : local) {
        INFO("seed " << seed);
        CHECK(m.at("smart_cache") >= m.at("virtual_groups"));
        CHECK(m.at("virtual_groups") >= m.at("lru_only"));
        CHECK(m.at("no_cache") == 0.0);
    }

    // report reads only the CSVs
    const auto rep = lfsim_run({"report", "--input", (d / "s").string(), "--out", (d / "r").string()});
    REQUIRE(rep.code == 0);
    const auto modes = rows_of(d / "r" / "report_modes.csv");
    REQUIRE(modes.size() == 4);
    CHECK(modes[0][0] == "no_cache");
    CHECK(modes[0][1] == "5");
    CHECK(slurp(d / "r" / "report.txt").find("smart_cache") != std::string::npos);

    // worker count does not change the output
    REQUIRE(lfsim_run({"sweep", "--config", (d / "s" / "manifest.json").string(), "--workers", "1", "--out",
                       (d / "s1").string()}).code == 0);
    CHECK(slurp(d / "s" / "metrics.csv") == slurp(d / "s1" / "metrics.csv"));
    CHECK(slurp(d / "s" / "latencies.csv") == slurp(d / "s1" / "latencies.csv"));
}

TEST_CASE("every subcommand replays byte-identically from its manifest") {
    const auto d = fresh("replay");
    const auto cfg = small_config(d).string();
    const auto wl = (d / "wl").string();
    const auto pl = (d / "pl").string();
    REQUIRE(lfsim_run({"gen-trace", "--config", cfg, "--out", wl}).code == 0);
    REQUIRE(lfsim_run({"gen-trace", "--config", cfg, "--source", "planted", "--out", pl}).code == 0);
    const auto model = (d / "train" / "model.json").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"classify", {"classify", "--config", cfg, "--workload", wl}},
        {"stats", {"stats", "--config", cfg, "--workload", wl}},
        {"simulate", {"simulate", "--config", cfg, "--workload", wl, "--mode", "smart_cache"}},
        {"sweep", {"sweep", "--config", cfg, "--seeds", "1", "2"}},
        {"kg-build", {"kg-build", "--config", cfg, "--workload", pl}},
        {"train", {"train", "--config", cfg, "--workload", pl}},
        {"recommend", {"recommend", "--config", cfg, "--workload", pl, "--model", model, "--top-k", "5"}},
        {"eval", {"eval", "--config", cfg, "--workload", pl, "--model", model}},
        {"combos", {"combos", "--config", cfg, "--source", "planted", "--subsets", "interactions", "--epochs", "2"}},
    };
    for (const auto& [name, args] : runs) {
        INFO(name);
        auto first = args;
        first.insert(first.end(), {"--out", (d / name).string()});
        const auto r = lfsim_run(first);
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto again = (d / (name + "_again")).string();
        REQUIRE(lfsim_run({name, "--config", (d / name / "manifest.json").string(), "--out", again}).code == 0);
        for (const auto& entry : fs::directory_iterator(d / name))
            CHECK(slurp(entry.path()) == slurp(fs::path(again) / entry.path().filename()));
    }
    const auto rep = lfsim_run({"report", "--input", (d / "sweep").string(), "--input", (d / "combos").string(), "--out",
                                (d / "report").string()});
    REQUIRE(rep.code == 0);
    REQUIRE(lfsim_run({"report", "--config", (d / "report" / "manifest.json").string(), "--out",
                       (d / "report2").string()}).code == 0);
    CHECK(slurp(d / "report" / "report.txt") == slurp(d / "report2" / "report.txt"));
    CHECK(rows_of(d / "report" / "report_combos.csv").size() == 2);

    const auto recs = rows_of(d / "recommend" / "rec.csv");
    CHECK(recs.size() == 40 * 5);
    CHECK(recs[0][1] == "1");
}

TEST_CASE("errors are one machine-parsable line with a nonzero exit") {
    const auto d = fresh("errors");
    auto check = [](const Result& r, int code, const std::string& prefix) {
        CHECK(r.code == code);
        CHECK(r.err.starts_with(prefix));
        CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    };
    check(lfsim_run({"simulate", "--frobnicate"}), 2, "error: usage: ");
    check(lfsim_run({}), 2, "error: usage: ");
    check(lfsim_run({"simulate", "--workload", (d / "missing").string(), "--out", (d / "o").string()}), 1,
          "error: not_found: ");
    std::ofstream(d / "bad.json") << R"({"simulation": {"nope": 1}})";
    check(lfsim_run({"simulate", "--config", (d / "bad.json").string(), "--out", (d / "o").string()}), 1,
          "error: config: unknown config key 'simulation.nope'");
    std::ofstream(d / "bad2.json") << R"({"ckat": {"epochs": "many"}})";
    check(lfsim_run({"train", "--config", (d / "bad2.json").string(), "--source", "planted", "--out", (d / "o").string()}),
          1, "error: config: ");
    std::ofstream(d / "bad3.json") << "{not json";
    check(lfsim_run({"stats", "--config", (d / "bad3.json").string(), "--out", (d / "o").string()}), 1, "error: parse: ");
    check(lfsim_run({"simulate", "--mode", "warp", "--out", (d / "o").string()}), 1, "error: config: ");
    check(lfsim_run({"recommend", "--source", "planted", "--out", (d / "o").string()}), 1, "error: config: no model");
    check(lfsim_run({"report", "--input", d.string(), "--out", (d / "o").string()}), 1, "error: not_found: ");
    CHECK(lfsim_run({"--help"}).code == 0);
}

TEST_CASE("shipped defaults match the code") {
    const fs::path root = LFSIM_SOURCE_DIR;
    CHECK(parse_topology_json(slurp(root / "data" / "topology_default.json")).nodes().size() ==
          default_topology().nodes().size());
    CHECK(slurp(root / "data" / "topology_default.json") == topology_json(default_topology()));

    // every default is documented in the schema with the same value
    const auto schema = nlohmann::json::parse(slurp(root / "docs" / "config_schema.json"));
    std::function<void(const nlohmann::json&, const nlohmann::json&, const std::string&)> walk =
        [&](const nlohmann::json& s, const nlohmann::json& v, const std::string& path) {
            INFO(path);
            if (v.is_object()) {
                REQUIRE(s.contains("properties"));
                CHECK(s.at("properties").size() == v.size());
                for (const auto& [k, sub] : v.items()) {
                    REQUIRE(s.at("properties").contains(k));
                    walk(s.at("properties").at(k), sub, path + "." + k);
                }
            } else {
                CHECK(s.at("default") == v);
                CHECK(s.contains("description"));
            }
        };
    walk(schema, cli::default_config(), "");
}
