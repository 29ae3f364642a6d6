// Acceptance run: one PASS/FAIL line per criterion with the measured values
// and the pinned tolerance. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "cache_oracles.hpp"
#include "cli.hpp"
#include "flow_oracle.hpp"
#include "grad_oracle.hpp"
#include "lfsim/cachenet.hpp"
#include "lfsim/ckat.hpp"
#include "lfsim/delivery.hpp"
#include "lfsim/netsim.hpp"
#include "lfsim/random.hpp"
#include "lfsim/workload.hpp"

using namespace lfsim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << (id < 10 ? " " : "") << id << "] " << name << ": " << detail
              << std::endl;
}

// Runs every criterion body, turning an escaping exception into a FAIL line.
void guarded(int id, const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

Metrics simulate(const Workload& w, const Topology& topo, Mode mode, std::uint64_t seed,
                 const std::function<void(ScenarioConfig&)>& tweak = {}) {
    ScenarioConfig c;
    c.mode = mode;
    c.seed = seed;
    if (tweak) tweak(c);
    return run_scenario(w.trace, w.catalog, topo, c).metrics;
}

// Criteria 1-4 share the default workload runs.
struct SeedRuns {
    Workload workload;
    std::map<Mode, Metrics> full;
    std::map<Mode, Metrics> halved;
};

std::map<std::uint64_t, SeedRuns> runs;
double sweep_seconds = 0.0;

void delivery_runs() {
    const auto t0 = Clock::now();
    const auto topo = default_topology();
    for (auto seed : kSeeds) {
        auto& r = runs[seed];
        r.workload = generate_trace(GeneratorParams{}, seed);
        for (auto mode : all_modes()) r.full[mode] = simulate(r.workload, topo, mode, seed);
    }
    sweep_seconds = seconds_since(t0);
}

void criterion1() {
    std::size_t min_users = SIZE_MAX, min_requests = SIZE_MAX;
    double min_smart = 1.0;
    bool ordered = true;
    std::string per_seed;
    for (auto& [seed, r] : runs) {
        min_users = std::min(min_users, r.workload.catalog.users().size());
        min_requests = std::min(min_requests, r.workload.trace.size());
        const double s = r.full[Mode::SmartCache].hit_fraction(Tier::Local);
        const double v = r.full[Mode::VirtualGroups].hit_fraction(Tier::Local);
        const double l = r.full[Mode::LruOnly].hit_fraction(Tier::Local);
        ordered = ordered && s >= v && v >= l;
        min_smart = std::min(min_smart, s);
        per_seed += " " + fmt(s, 3) + "/" + fmt(v, 3) + "/" + fmt(l, 3);
    }
    const bool shape = min_users >= 100 && min_requests >= 10000 && GeneratorParams{}.reuse_fraction == 0.4;
    report(1, "tier ordering smart >= groups >= lru", ordered && shape && min_smart >= 0.6 && sweep_seconds <= 60.0,
           "local smart/groups/lru per seed" + per_seed + "; min smart " + fmt(min_smart, 3) + " (>= 0.6); users >= " +
               std::to_string(min_users) + ", requests >= " + std::to_string(min_requests) + "; " +
               fmt(sweep_seconds, 3) + " s (<= 60 s)");
}

void criterion2() {
    const auto topo = default_topology();
    double worst = 1e300;
    std::string per_seed;
    for (auto& [seed, r] : runs) {
        const auto small = simulate(r.workload, topo, Mode::SmartCache, seed,
                                    [](ScenarioConfig& c) { c.capacity_fraction = 0.05; });
        const auto inf = simulate(r.workload, topo, Mode::SmartCache, seed,
                                  [](ScenarioConfig& c) { c.infinite_capacity = true; });
        const double ratio = small.hit_fraction(Tier::Local) / inf.hit_fraction(Tier::Local);
        worst = std::min(worst, ratio);
        per_seed += " " + fmt(ratio, 4);
    }
    report(2, "5% cache near infinite cache", worst >= 0.9,
           "local(5%) / local(inf) per seed" + per_seed + " (>= 0.9)");
}

void criterion3() {
    double worst = 0.0;
    std::string per_seed;
    for (auto& [seed, r] : runs) {
        const double ratio = static_cast<double>(r.full[Mode::SmartCache].origin_requests) /
                             static_cast<double>(r.full[Mode::NoCache].origin_requests);
        worst = std::max(worst, ratio);
        per_seed += " " + std::to_string(r.full[Mode::SmartCache].origin_requests) + "/" +
                    std::to_string(r.full[Mode::NoCache].origin_requests);
    }
    report(3, "origin load reduction", worst <= 0.5,
           "origin requests smart/no_cache per seed" + per_seed + "; max ratio " + fmt(worst, 3) + " (<= 0.5)");
}

void criterion4() {
    const auto half = default_topology().with_bandwidth_scale(0.5);
    bool pass = true;
    std::string per_seed;
    for (auto& [seed, r] : runs) {
        for (auto mode : {Mode::SmartCache, Mode::NoCache}) r.halved[mode] = simulate(r.workload, half, mode, seed);
        const double s = r.full[Mode::SmartCache].mean_latency_s, n = r.full[Mode::NoCache].mean_latency_s;
        const double rs = r.halved[Mode::SmartCache].mean_latency_s / s;
        const double rn = r.halved[Mode::NoCache].mean_latency_s / n;
        pass = pass && s < n && rs < rn;
        per_seed += " " + fmt(s, 3) + "<" + fmt(n, 3) + " x" + fmt(rs, 3) + "<x" + fmt(rn, 3) + ";";
    }
    report(4, "latency and halved-bandwidth robustness", pass,
           "mean latency smart<no_cache s, slowdown smart<no_cache per seed:" + per_seed);
}

void criterion5() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::uint64_t hits = 0, evictions = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = oracle::compare_lru(seed, 10000, 100);
        pass = pass && r.log_fast == r.log_slow && r.bytes_match && r.order_match && r.max_used <= 100;
        hits += r.hits;
        evictions += r.evictions;
    }
    const double t = seconds_since(t0);
    report(5, "lru matches the recency-list reference", pass && hits > 0 && evictions > 0 && t <= 5.0,
           "20 x 10^4 ops, exact logs/bytes/order; " + std::to_string(hits) + " hits, " + std::to_string(evictions) +
               " evictions; " + fmt(t, 3) + " s (<= 5 s)");
}

void criterion6() {
    double worst_ari = 1.0, worst_rise = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed * 7919);
        const std::size_t k = 6, per = 25;
        const double spread = 1.0, separation = 20.0;  // centres on a grid of pitch 20, points in +-1
        Eigen::MatrixXd p(static_cast<Eigen::Index>(k * per), 2);
        std::vector<std::size_t> truth(k * per);
        std::vector<std::size_t> order(k * per);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        for (std::size_t n = 0; n < k * per; ++n) {
            const std::size_t g = n / per;
            const auto row = static_cast<Eigen::Index>(order[n]);
            p(row, 0) = separation * static_cast<double>(g % 3) + rng.uniform(-spread, spread);
            p(row, 1) = separation * static_cast<double>(g / 3) + rng.uniform(-spread, spread);
            truth[order[n]] = g;
        }
        const auto km = kmeans_users(p, k, seed);
        worst_ari = std::min(worst_ari, oracle::adjusted_rand(km.assignment, truth));
        for (std::size_t i = 1; i < km.wcss_history.size(); ++i)
            worst_rise = std::max(worst_rise, km.wcss_history[i] - km.wcss_history[i - 1]);
    }
    report(6, "k-means recovers planted clusters", worst_ari >= 1.0 - 1e-12 && worst_rise <= 1e-9,
           "min ARI " + fmt(worst_ari, 12) + " (== 1 within 1e-12) over 10 seeds, centre pitch 20x the spread; max WCSS rise " +
               fmt(worst_rise, 3) + " (<= 1e-9)");
}

void criterion7() {
    GeneratorParams p;
    p.regular_users = 80;
    p.overlapping_users = 70;
    p.realtime_users = 60;
    p.portal_users = 0;
    auto accuracy = [&](double jitter, std::uint64_t seed, std::size_t& users) {
        p.jitter = jitter;
        const auto w = generate_trace(p, seed);
        const auto hist = program_histories(w.trace);
        std::size_t correct = 0;
        for (const auto& t : w.truth.users) correct += classify_user_pattern(hist.at(t.user_id)).kind == t.kind;
        users = w.truth.users.size();
        return static_cast<double>(correct) / static_cast<double>(users);
    };
    std::size_t n0 = 0, n5 = 0;
    const double a0 = accuracy(0.0, 21, n0), a5 = accuracy(0.05, 22, n5);
    report(7, "classifier accuracy", a0 == 1.0 && a5 >= 0.95 && n0 >= 200 && n5 >= 200,
           "zero jitter " + fmt(a0, 4) + " (== 1), 5% jitter " + fmt(a5, 4) + " (>= 0.95), " + std::to_string(n0) +
               " users");
}

void criterion8() {
    constexpr double MB = 1e6;
    const Topology topo({{"A", 0, true}, {"B", 1, false}}, {{"A", "B", 10 * MB, 0.05}});
    auto run_flows = [&](const std::vector<std::pair<double, double>>& flows) {
        Simulator sim(topo);
        std::vector<double> done(flows.size(), -1);
        for (std::size_t i = 0; i < flows.size(); ++i)
            sim.schedule(flows[i].first, [&, i] {
                sim.start_flow("A", "B", flows[i].second, [&, i](const Delivery& d) { done[i] = d.t_done; });
            });
        sim.run();
        return done;
    };
    const std::vector<std::vector<std::pair<double, double>>> cases{
        {{0, 100 * MB}}, {{0, 100 * MB}, {0, 100 * MB}}, {{0, 100 * MB}, {5, 100 * MB}}};
    double worst = 0.0;
    std::string detail;
    for (const auto& c : cases) {
        std::vector<oracle::FlowSpec> specs;
        for (const auto& [start, size] : c) specs.push_back({start, size, {0}, 0.05});
        const auto ref = oracle::delivery_times({10 * MB}, specs);
        const auto got = run_flows(c);
        detail += " [";
        for (std::size_t i = 0; i < c.size(); ++i) {
            worst = std::max(worst, std::abs(got[i] - ref[i]));
            detail += (i ? " " : "") + fmt(got[i], 6);
        }
        detail += "]";
    }
    report(8, "event loop matches the integrator", worst <= 1e-9,
           "delivery times s" + detail + "; max |diff| " + fmt(worst, 3) + " (<= 1e-9)");
}

void criterion9() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    const auto g = oracle::random_graph(1);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
        for (auto red : {Reduction::Sum, Reduction::Mean}) {
            const auto r = oracle::gradient_check(seed, red);
            for (const auto* part : {&r.kg, &r.cf})
                for (const auto& [_, err] : *part) worst = std::max(worst, err);
        }
    const double t = seconds_since(t0);
    report(9, "analytic gradients match central differences", worst <= 1e-4 && t <= 30.0,
           "KG and CF losses, " + std::to_string(g.num_entities()) + " entities, " +
               std::to_string(g.num_relations() / 2) + " relations, d = k = 4, 2 layers, 3 seeds; max rel error " +
               fmt(worst, 3) + " (<= 1e-4); " + fmt(t, 3) + " s (<= 30 s)");
}

const std::set<Source> kDefaultSources{Source::Interactions, Source::Locality, Source::UserAssociation};

void criterion10() {
    double ckat = 0.0, pop = 0.0, train_s = 0.0;
    std::size_t items = 0, users = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto w = planted_rec_dataset({}, seed);
        items = w.catalog.objects().size();
        users = w.catalog.users().size();
        const auto split = holdout_split(user_items(w.trace));
        const auto g = build_ckg(build_source_kgs(w.catalog, split.train), kDefaultSources);
        TrainConfig tc;
        tc.seed = seed;
        const auto t0 = Clock::now();
        auto r = train(g, tc);
        train_s += seconds_since(t0);
        ckat += evaluate(make_model(g, std::move(r.params), tc.attention), split.test, 10).recall / 3;
        pop += evaluate_ranker(popularity_ranker(split.train), split.test, 10).recall / 3;
    }
    report(10, "recommendation uplift over popularity",
           ckat >= 1.1 * pop && train_s <= 180.0 && items == 300 && users == 200,
           "mean recall@10 ckat " + fmt(ckat, 4) + " vs popularity " + fmt(pop, 4) + ", ratio " + fmt(ckat / pop, 4) +
               " (>= 1.1); " + std::to_string(users) + " users, " + std::to_string(items) + " items; training " +
               fmt(train_s, 3) + " s (<= 180 s)");
}

void criterion11() {
    // Best combination: highest mean recall@10 with attention on and no noise.
    std::map<std::string, double> by_subset;
    std::map<std::uint64_t, double> best_on_clean;
    std::map<std::uint64_t, std::map<std::string, double>> per_seed;
    for (auto seed : kSeeds) {
        const auto w = planted_rec_dataset({}, seed);
        StudyConfig sc;
        sc.train.seed = seed;
        sc.attention = {true};
        for (const auto& row : run_combination_study(w.catalog, w.trace, sc)) {
            by_subset[sources_label(row.sources)] += row.metrics.recall / 5;
            per_seed[seed][sources_label(row.sources)] = row.metrics.recall;
        }
    }
    const auto best = std::max_element(by_subset.begin(), by_subset.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; })
                          ->first;
    const auto best_sources = parse_sources_label(best);

    // Noise volume equals the combination's own triple count (before inverse edges).
    double drop_on = 0.0, drop_off = 0.0;
    std::size_t m_min = SIZE_MAX, m_max = 0;
    for (auto seed : kSeeds) {
        const auto w = planted_rec_dataset({}, seed);
        const auto split = holdout_split(user_items(w.trace));
        const auto m = build_ckg(build_source_kgs(w.catalog, split.train), best_sources).triples().size() / 2;
        m_min = std::min(m_min, m);
        m_max = std::max(m_max, m);
        StudyConfig sc;
        sc.train.seed = seed;
        sc.subsets = {best_sources};
        sc.attention = {false};
        const double off_clean = run_combination_study(w.catalog, w.trace, sc).front().metrics.recall;
        sc.attention = {true, false};
        sc.noise_triples = m;
        double on_noisy = 0.0, off_noisy = 0.0;
        for (const auto& row : run_combination_study(w.catalog, w.trace, sc))
            (row.attention ? on_noisy : off_noisy) = row.metrics.recall;
        drop_on += (per_seed[seed][best] - on_noisy) / 5;
        drop_off += (off_clean - off_noisy) / 5;
    }
    report(11, "noise hurts, attention absorbs it", drop_on > 0.0 && drop_off >= drop_on,
           "best combination " + best + " (mean recall@10 " + fmt(by_subset[best], 4) + "); noise triples " +
               std::to_string(m_min) + "-" + std::to_string(m_max) + "; mean drop attention on " + fmt(drop_on, 4) +
               " (> 0), off " + fmt(drop_off, 4) + " (>= on), 5 paired seeds");
}

struct CliResult {
    int code;
    std::string err;
};

CliResult lfsim_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lfsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion12(const fs::path& tmp) {
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const auto cfg = (tmp / "small.json").string();
    std::ofstream(cfg) << R"({"generator": {"regular_users": 12, "overlapping_users": 8, "realtime_users": 5,
                            "portal_users": 2, "duration_s": 43200},
                            "ckat": {"epochs": 3}, "planted": {"users": 40, "regions": 4}})";
    const auto wl = (tmp / "gen-trace").string();
    const auto pl = (tmp / "planted").string();
    const auto model = (tmp / "train" / "model.json").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> cmds{
        {"gen-trace", {"gen-trace", "--config", cfg, "--out", wl}},
        {"planted", {"gen-trace", "--config", cfg, "--source", "planted", "--out", pl}},
        {"classify", {"classify", "--config", cfg, "--workload", wl}},
        {"stats", {"stats", "--config", cfg, "--workload", wl}},
        {"simulate", {"simulate", "--config", cfg, "--workload", wl}},
        {"sweep", {"sweep", "--config", cfg, "--seeds", "1", "2"}},
        {"kg-build", {"kg-build", "--config", cfg, "--workload", pl}},
        {"train", {"train", "--config", cfg, "--workload", pl}},
        {"recommend", {"recommend", "--config", cfg, "--workload", pl, "--model", model, "--top-k", "5"}},
        {"eval", {"eval", "--config", cfg, "--workload", pl, "--model", model}},
        {"combos", {"combos", "--config", cfg, "--source", "planted", "--subsets", "interactions", "--epochs", "2"}},
        {"report", {"report", "--input", (tmp / "sweep").string(), "--input", (tmp / "combos").string()}},
    };
    std::size_t files = 0;
    std::vector<std::string> bad;
    for (const auto& [name, args] : cmds) {
        auto first = args;
        if (std::find(first.begin(), first.end(), "--out") == first.end()) first.insert(first.end(), {"--out", (tmp / name).string()});
        const auto again = tmp / (name + "_replay");
        const auto a = lfsim_cli(first);
        const auto b = a.code == 0 ? lfsim_cli({args.front(), "--config", (tmp / name / "manifest.json").string(),
                                                "--out", again.string()})
                                   : a;
        if (a.code != 0 || b.code != 0) {
            bad.push_back(name + " (" + a.err + b.err + ")");
            continue;
        }
        for (const auto& entry : fs::directory_iterator(tmp / name)) {
            ++files;
            if (slurp(entry.path()) != slurp(again / entry.path().filename()))
                bad.push_back(name + "/" + entry.path().filename().string());
        }
    }
    std::string list;
    for (const auto& b : bad) list += " " + b;
    report(12, "manifest replay is byte-identical", bad.empty() && files > 0,
           std::to_string(cmds.size()) + " runs covering every subcommand, " + std::to_string(files) +
               " files compared; mismatches:" + (bad.empty() ? std::string(" none") : list));
}

}  // namespace

int main() {
    std::cout << "lfsim acceptance" << std::endl;
    guarded(1, "tier ordering smart >= groups >= lru", [] {
        delivery_runs();
        criterion1();
    });
    guarded(2, "5% cache near infinite cache", criterion2);
    guarded(3, "origin load reduction", criterion3);
    guarded(4, "latency and halved-bandwidth robustness", criterion4);
    guarded(5, "lru matches the recency-list reference", criterion5);
    guarded(6, "k-means recovers planted clusters", criterion6);
    guarded(7, "classifier accuracy", criterion7);
    guarded(8, "event loop matches the integrator", criterion8);
    guarded(9, "analytic gradients match central differences", criterion9);
    guarded(10, "recommendation uplift over popularity", criterion10);
    guarded(11, "noise hurts, attention absorbs it", criterion11);
    guarded(12, "manifest replay is byte-identical", [] { criterion12(fs::path(LFSIM_ACCEPTANCE_TMP)); });
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures;
}
