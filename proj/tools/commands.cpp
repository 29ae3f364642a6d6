#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cli.hpp"
#include "csv.hpp"

namespace lfsim::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t seed_of(const json& config) { return config.at("seed").get<std::uint64_t>(); }

std::vector<std::uint64_t> seeds_of(const json& config) {
    try {
        auto s = config.at("seeds").get<std::vector<std::uint64_t>>();
        if (s.empty()) throw ConfigError("seeds must not be empty");
        return s;
    } catch (const json::exception&) {
        throw ConfigError("seeds must be a list of non-negative integers");
    }
}

// ---------------------------------------------------------------------------
// Workload commands

void gen_trace(const json& config, OutputSet& outs, std::ostream& log) {
    const auto source = config.at("workload").at("source").get<std::string>();
    if (source != "generate" && source != "planted")
        throw ConfigError("gen-trace needs workload.source generate or planted");
    const auto seed = seed_of(config);
    const auto w = source == "generate" ? generate_trace(generator_params(config), seed)
                                        : planted_rec_dataset(planted_params(config), seed);
    std::ostringstream cat, users, recipes, requests;
    write_catalog_csv(cat, w.catalog);
    write_users_csv(users, w.catalog);
    write_recipes_csv(recipes, w.catalog);
    write_requests_csv(requests, w.trace);
    outs.write("catalog.csv", cat.str());
    outs.write("users.csv", users.str());
    outs.write("recipes.csv", recipes.str());
    outs.write("requests.csv", requests.str());
    if (source == "generate") outs.write("ground_truth.json", ground_truth_json(w.truth) + "\n");
    log << "generated " << w.trace.size() << " requests from " << w.catalog.users().size() << " users over "
        << w.catalog.objects().size() << " objects\n";
}

void classify(const json& config, OutputSet& outs, std::ostream& log) {
    const auto in = load_inputs(config, seed_of(config));
    const auto cc = classifier_config(config);
    const auto histories = program_histories(in.trace);
    std::vector<std::string> ids;
    for (const auto& u : in.catalog.users()) ids.push_back(u.user_id);
    std::sort(ids.begin(), ids.end());
    std::ostringstream out;
    out << "user_id,kind,period_s,window_s,overlap_s,sessions\n";
    std::map<std::string, int> counts;
    for (const auto& id : ids) {
        AccessPattern p;
        if (auto it = histories.find(id); it != histories.end()) p = classify_user_pattern(it->second, cc);
        ++counts[std::string(to_string(p.kind))];
        out << id << ',' << to_string(p.kind) << ',' << format_number(p.period_s) << ',' << format_number(p.window_s)
            << ',' << format_number(p.overlap_s) << ',' << p.history << '\n';
    }
    outs.write("patterns.csv", out.str());
    for (const auto& [k, n] : counts) log << k << ": " << n << '\n';
}

void stats(const json& config, OutputSet& outs, std::ostream& log) {
    const auto in = load_inputs(config, seed_of(config));
    const auto rep = affinity_stats(in.trace, in.catalog);
    std::ostringstream out;
    out << "user_id,requests,modal_region_share,modal_kind_share,org_overlap\n";
    for (const auto& u : rep.users)
        out << u.user_id << ',' << u.requests << ',' << format_number(u.modal_region_share) << ','
            << format_number(u.modal_kind_share) << ',' << format_number(u.org_overlap) << '\n';
    outs.write("affinity.csv", out.str());
    const json summary{{"users", in.catalog.users().size()},
                       {"objects", in.catalog.objects().size()},
                       {"requests", in.trace.size()},
                       {"api_request_share", rep.api_request_share},
                       {"mean_modal_region_share", rep.mean_modal_region_share},
                       {"mean_modal_kind_share", rep.mean_modal_kind_share},
                       {"mean_org_overlap", rep.mean_org_overlap},
                       {"working_set_bytes", working_set_bytes(in.trace, in.catalog,
                                                               config.at("simulation").at("chunk_s").get<double>())}};
    outs.write("affinity_summary.json", summary.dump(2) + "\n");
    log << "requests " << in.trace.size() << ", mean org overlap " << format_number(rep.mean_org_overlap) << '\n';
}

// ---------------------------------------------------------------------------
// Simulation commands

std::string flows_csv(const ScenarioResult& r) {
    std::ostringstream out;
    out << "kind,src,dst,t_start_s,t_done_s,bytes\n";
    for (const auto& f : r.flows)
        out << to_string(f.kind) << ',' << f.src << ',' << f.dst << ',' << format_number(f.t_start) << ','
            << format_number(f.t_done) << ',' << f.bytes << '\n';
    return out.str();
}

void simulate(const json& config, OutputSet& outs, std::ostream& log) {
    const auto seed = seed_of(config);
    const auto in = load_inputs(config, seed);
    const auto mode = parse_mode(config.at("simulation").at("mode").get<std::string>());
    const auto r = run_scenario(in.trace, in.catalog, in.topology, scenario_config(config, mode, seed));
    std::ostringstream metrics, lat;
    write_metrics_header(metrics);
    write_metrics_row(metrics, r.metrics);
    write_latencies_csv(lat, r, true);
    outs.write("metrics.csv", metrics.str());
    outs.write("latencies.csv", lat.str());
    outs.write("flows.csv", flows_csv(r));
    if (!r.placement.groups.empty()) outs.write("placement.json", placement_json(r.placement) + "\n");
    log << to_string(mode) << ": " << r.metrics.requests << " requests, local "
        << format_number(r.metrics.hit_fraction(Tier::Local)) << ", mean latency "
        << format_number(r.metrics.mean_latency_s) << " s\n";
}

void sweep(const json& config, OutputSet& outs, std::ostream& log) {
    const auto seeds = seeds_of(config);
    std::vector<Mode> modes;
    for (const auto& m : config.at("simulation").at("modes")) modes.push_back(parse_mode(m.get<std::string>()));
    if (modes.empty()) throw ConfigError("simulation.modes must not be empty");
    const auto workers = std::max<std::size_t>(1, config.at("simulation").at("workers").get<std::size_t>());

    std::vector<Inputs> inputs;
    for (auto s : seeds) inputs.push_back(load_inputs(config, s));

    const std::size_t jobs = seeds.size() * modes.size();
    std::vector<ScenarioResult> results(jobs);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t j; (j = next++) < jobs;) {
            const auto si = j / modes.size();
            try {
                const auto& in = inputs[si];
                results[j] = run_scenario(in.trace, in.catalog, in.topology,
                                          scenario_config(config, modes[j % modes.size()], seeds[si]));
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, jobs); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::ostringstream metrics, lat;
    write_metrics_header(metrics);
    for (std::size_t j = 0; j < jobs; ++j) {
        write_metrics_row(metrics, results[j].metrics);
        write_latencies_csv(lat, results[j], j == 0);
    }
    outs.write("metrics.csv", metrics.str());
    outs.write("latencies.csv", lat.str());
    log << "ran " << jobs << " scenarios (" << modes.size() << " modes x " << seeds.size() << " seeds)\n";
}

// ---------------------------------------------------------------------------
// Recommendation commands

struct GraphBuild {
    HoldoutSplit split;
    SourceKGs sources;
    CKG graph;
};

GraphBuild build_graph(const json& config, const Inputs& in, std::uint64_t seed) {
    GraphBuild b;
    b.split = holdout_split(user_items(in.trace), config.at("ckat").at("holdout").get<double>());
    b.sources = build_source_kgs(in.catalog, b.split.train);
    auto selection = selected_sources(config);
    const auto noise = config.at("ckat").at("noise_triples").get<std::size_t>();
    if (noise > 0) {
        b.sources[Source::Noise] = inject_noise(build_ckg(b.sources, selection).entities(), noise, seed);
        selection.insert(Source::Noise);
    }
    b.graph = build_ckg(b.sources, selection);
    return b;
}

void kg_build(const json& config, OutputSet& outs, std::ostream& log) {
    const auto seed = seed_of(config);
    const auto in = load_inputs(config, seed);
    const auto b = build_graph(config, in, seed);
    std::ostringstream out;
    out << "source,head,relation,tail\n";
    json per_source = json::object();
    for (auto s : b.graph.sources()) {
        const auto& kg = b.sources.at(s);
        per_source[std::string(to_string(s))] = kg.triples.size();
        for (const auto& t : kg.triples) out << to_string(s) << ',' << t.head << ',' << t.relation << ',' << t.tail << '\n';
    }
    outs.write("kg_triples.csv", out.str());
    const json summary{{"entities", b.graph.num_entities()},
                       {"relations", b.graph.relations()},
                       {"triples_with_inverses", b.graph.triples().size()},
                       {"users", b.graph.users().size()},
                       {"items", b.graph.items().size()},
                       {"source_triples", per_source}};
    outs.write("kg_summary.json", summary.dump(2) + "\n");
    log << sources_label(b.graph.sources()) << ": " << b.graph.num_entities() << " entities, "
        << b.graph.triples().size() << " edges\n";
}

void train_cmd(const json& config, OutputSet& outs, std::ostream& log) {
    const auto seed = seed_of(config);
    const auto in = load_inputs(config, seed);
    const auto b = build_graph(config, in, seed);
    const auto tc = train_config(config, seed);
    auto r = train(b.graph, tc);
    std::ostringstream losses;
    losses << "epoch,kg_loss,cf_loss,param_norm\n";
    for (std::size_t e = 0; e < r.kg_loss.size(); ++e)
        losses << e + 1 << ',' << format_number(r.kg_loss[e]) << ',' << format_number(r.cf_loss[e]) << ','
               << format_number(r.param_norm[e]) << '\n';
    const auto model = make_model(b.graph, std::move(r.params), tc.attention);
    outs.write("model.json", checkpoint_json(model, tc) + "\n");
    outs.write("losses.csv", losses.str());
    if (!r.cf_loss.empty())
        log << "trained " << tc.epochs << " epochs, final kg loss " << format_number(r.kg_loss.back()) << ", cf loss "
            << format_number(r.cf_loss.back()) << '\n';
}

// Rebuilds the graph from the workload and checks it against the checkpoint.
Model load_model(const json& config, const Inputs& in, GraphBuild& b) {
    const auto& mp = config.at("ckat").at("model");
    if (!mp.is_string()) throw ConfigError("no model: pass --model or set ckat.model");
    std::ifstream f(mp.get<std::string>());
    if (!f) throw NotFoundError("cannot open model '" + mp.get<std::string>() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    auto ck = parse_checkpoint(ss.str());
    b = build_graph(config, in, ck.config.seed);
    if (ck.entities != b.graph.entities() || ck.relations != b.graph.relations())
        throw ValidationError("model dictionaries do not match the graph built from this workload and config");
    return make_model(b.graph, std::move(ck.params), ck.config.attention);
}

void recommend(const json& config, OutputSet& outs, std::ostream& log) {
    const auto in = load_inputs(config, seed_of(config));
    GraphBuild b;
    const auto model = load_model(config, in, b);
    const auto K = config.at("ckat").at("K").get<std::size_t>();
    const auto exclude = config.at("ckat").at("exclude_seen").get<bool>();
    std::vector<std::string> users = config.at("ckat").at("users").get<std::vector<std::string>>();
    if (users.empty())
        for (auto u : b.graph.users()) users.push_back(b.graph.entities()[u].substr(5));
    std::ostringstream out;
    bool header = true;
    for (const auto& u : users) {
        write_rec_csv(out, u, recommend_topk(model, u, K, exclude), header);
        header = false;
    }
    if (header) out << "user_id,rank,item_id,score\n";
    outs.write("rec.csv", out.str());
    log << "recommended top " << K << " for " << users.size() << " users\n";
}

void eval_cmd(const json& config, OutputSet& outs, std::ostream& log) {
    const auto in = load_inputs(config, seed_of(config));
    GraphBuild b;
    const auto model = load_model(config, in, b);
    const auto K = config.at("ckat").at("K").get<std::size_t>();
    const auto ck = evaluate(model, b.split.test, K);
    const auto pop = evaluate_ranker(popularity_ranker(b.split.train), b.split.test, K);
    std::ostringstream out;
    out << "ranker,k,recall,ndcg,users\n";
    out << "ckat," << K << ',' << format_number(ck.recall) << ',' << format_number(ck.ndcg) << ',' << ck.users << '\n';
    out << "popularity," << K << ',' << format_number(pop.recall) << ',' << format_number(pop.ndcg) << ','
        << pop.users << '\n';
    outs.write("eval.csv", out.str());
    log << "recall@" << K << " ckat " << format_number(ck.recall) << ", popularity " << format_number(pop.recall) << '\n';
}

void combos(const json& config, OutputSet& outs, std::ostream& log) {
    const auto& c = config.at("ckat");
    StudyConfig sc;
    sc.K = c.at("K").get<std::size_t>();
    sc.holdout = c.at("holdout").get<double>();
    sc.noise_triples = c.at("noise_triples").get<std::size_t>();
    sc.attention = c.at("study_attention").get<std::vector<bool>>();
    if (sc.attention.empty()) throw ConfigError("ckat.study_attention must not be empty");
    for (const auto& s : c.at("subsets")) sc.subsets.push_back(parse_sources_label(s.get<std::string>()));
    std::vector<ComboRow> rows;
    for (auto seed : seeds_of(config)) {
        const auto in = load_inputs(config, seed);
        sc.train = train_config(config, seed);
        auto part = run_combination_study(in.catalog, in.trace, sc);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    std::ostringstream out;
    write_combos_csv(out, rows, sc.K);
    outs.write("combos.csv", out.str());
    log << "evaluated " << rows.size() << " combinations\n";
}

// ---------------------------------------------------------------------------
// Report

struct Mean {
    double sum = 0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (width.size() <= i) width.push_back(0);
            width[i] = std::max(width[i], r[i].size());
        }
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            out << (i ? "  " : "") << std::left << std::setw(static_cast<int>(i + 1 == r.size() ? 0 : width[i])) << r[i];
        }
        out << '\n';
    }
    return out.str();
}

std::string csv_of(const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
    return out.str();
}

void report(const json& config, OutputSet& outs, std::ostream& log) {
    const auto inputs = config.at("report").at("inputs").get<std::vector<std::string>>();
    if (inputs.empty()) throw ConfigError("report needs at least one --input directory");

    static const std::vector<std::string_view> kMetrics{
        "mode", "seed", "requests", "local_frac", "group_frac", "peer_frac", "origin_frac", "mean_latency_s",
        "median_latency_s", "p95_latency_s", "origin_requests", "origin_bytes", "wan_bytes", "prefetch_bytes",
        "wasted_prefetch_bytes"};
    static const std::vector<std::string_view> kCombos{"sources", "attention", "noise_triples", "k", "recall", "ndcg", "seed"};
    // mode -> column -> mean
    std::map<std::string, std::map<std::size_t, Mean>> modes;
    std::vector<std::string> mode_order;
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::pair<Mean, Mean>> study;
    std::size_t found = 0;
    for (const auto& dir : inputs) {
        const auto mpath = fs::path(dir) / "metrics.csv";
        if (std::ifstream f(mpath); f) {
            ++found;
            csv::Reader rd(f, mpath.string(), kMetrics);
            csv::Row row;
            while (rd.next(row)) {
                const auto& mode = row.fields[0];
                if (!modes.contains(mode)) mode_order.push_back(mode);
                auto& cols = modes[mode];
                for (std::size_t c : {3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u, 12u}) cols[c].add(rd.to_double(row, c));
                cols[1].add(1);
            }
        }
        const auto cpath = fs::path(dir) / "combos.csv";
        if (std::ifstream f(cpath); f) {
            ++found;
            csv::Reader rd(f, cpath.string(), kCombos);
            csv::Row row;
            while (rd.next(row)) {
                auto& m = study[{row.fields[0], row.fields[1], row.fields[2], row.fields[3]}];
                m.first.add(rd.to_double(row, 4));
                m.second.add(rd.to_double(row, 5));
            }
        }
    }
    if (found == 0) throw NotFoundError("no metrics.csv or combos.csv in the report inputs");

    std::string text;
    if (!modes.empty()) {
        std::vector<std::vector<std::string>> t{{"mode", "runs", "local_frac", "group_frac", "peer_frac", "origin_frac",
                                                 "mean_latency_s", "median_latency_s", "p95_latency_s",
                                                 "origin_requests", "wan_bytes"}};
        for (const auto& mode : mode_order) {
            auto& c = modes[mode];
            std::vector<std::string> r{mode, std::to_string(c[1].n)};
            for (std::size_t col : {3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u, 12u}) r.push_back(format_number(c[col].value()));
            t.push_back(std::move(r));
        }
        outs.write("report_modes.csv", csv_of(t));
        text += "Delivery modes (mean over runs)\n" + aligned(t) + "\n";
    }
    if (!study.empty()) {
        std::vector<std::vector<std::string>> t{{"sources", "attention", "noise_triples", "k", "runs", "recall", "ndcg"}};
        for (const auto& [key, m] : study)
            t.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key),
                         std::to_string(m.first.n), format_number(m.first.value()), format_number(m.second.value())});
        outs.write("report_combos.csv", csv_of(t));
        text += "Knowledge-source combinations (mean over seeds)\n" + aligned(t) + "\n";
    }
    outs.write("report.txt", text);
    log << text;
}

// ---------------------------------------------------------------------------
// Argument handling

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::vector<std::uint64_t> seeds;
    std::string topology;
    std::string workload;
    std::string source;
    std::string mode;
    std::vector<std::string> modes;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> capacity_bytes;
    std::optional<double> capacity_fraction;
    bool infinite = false;
    std::optional<std::size_t> k;
    std::optional<double> jitter;
    std::string sources;
    std::vector<std::string> subsets;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    bool no_attention = false;
    std::optional<std::size_t> noise;
    std::string model;
    std::vector<std::string> users;
    std::optional<std::size_t> top_k;
    bool include_seen = false;
    std::vector<std::string> inputs;
};

json flags_patch(const Flags& f) {
    json p = json::object();
    if (f.seed) p["seed"] = *f.seed;
    if (!f.seeds.empty()) p["seeds"] = f.seeds;
    if (!f.topology.empty()) p["topology"] = f.topology;
    if (!f.workload.empty()) {
        p["workload"]["source"] = "files";
        p["workload"]["dir"] = f.workload;
    }
    if (!f.source.empty()) p["workload"]["source"] = f.source;
    if (!f.mode.empty()) p["simulation"]["mode"] = f.mode;
    if (!f.modes.empty()) p["simulation"]["modes"] = f.modes;
    if (f.workers) p["simulation"]["workers"] = *f.workers;
    if (f.capacity_bytes) p["simulation"]["capacity_bytes"] = *f.capacity_bytes;
    if (f.capacity_fraction) p["simulation"]["capacity_fraction"] = *f.capacity_fraction;
    if (f.infinite) p["simulation"]["infinite_capacity"] = true;
    if (f.k) p["simulation"]["k"] = *f.k;
    if (f.jitter) p["generator"]["jitter"] = *f.jitter;
    if (!f.sources.empty()) p["ckat"]["sources"] = f.sources;
    if (!f.subsets.empty()) p["ckat"]["subsets"] = f.subsets;
    if (f.epochs) p["ckat"]["epochs"] = *f.epochs;
    if (f.lr) p["ckat"]["learning_rate"] = *f.lr;
    if (f.no_attention) p["ckat"]["attention"] = false;
    if (f.noise) p["ckat"]["noise_triples"] = *f.noise;
    if (!f.model.empty()) p["ckat"]["model"] = f.model;
    if (!f.users.empty()) p["ckat"]["users"] = f.users;
    if (f.top_k) p["ckat"]["K"] = *f.top_k;
    if (f.include_seen) p["ckat"]["exclude_seen"] = false;
    if (!f.inputs.empty()) p["report"]["inputs"] = f.inputs;
    return p;
}

using Command = void (*)(const json&, OutputSet&, std::ostream&);

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"lfsim: large-facility data delivery and discovery simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Flags f;

    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"gen-trace", "Generate a synthetic workload (catalog, users, recipes, requests)", gen_trace},
        {"classify", "Classify each user's access pattern", classify},
        {"stats", "Per-user locality and reuse statistics", stats},
        {"simulate", "Replay the trace under one delivery mode", simulate},
        {"sweep", "Replay every configured mode for every seed", sweep},
        {"kg-build", "Build the collaborative knowledge graph", kg_build},
        {"train", "Train the recommendation model", train_cmd},
        {"recommend", "Top-K recommendations from a trained model", recommend},
        {"eval", "Recall and NDCG of a trained model against popularity", eval_cmd},
        {"combos", "Knowledge-source combination study", combos},
        {"report", "Summary tables from metrics.csv and combos.csv", report},
    };
    std::map<CLI::App*, std::pair<std::string, Command>> by_app;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        by_app[sub] = {name, fn};
        sub->add_option("--config", f.config, "Config JSON or a run manifest");
        sub->add_option("--out", f.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", f.seed, "Random seed");
        if (name != "report") {
            sub->add_option("--topology", f.topology, "Topology JSON (default: built-in)");
            sub->add_option("--workload", f.workload, "Directory with catalog/users/recipes/requests CSVs");
            sub->add_option("--source", f.source, "Workload source: files, generate or planted");
        }
        if (name == "gen-trace") sub->add_option("--jitter", f.jitter, "Timing jitter as a fraction of the period");
        if (name == "simulate") sub->add_option("--mode", f.mode, "no_cache, lru_only, virtual_groups or smart_cache");
        if (name == "simulate" || name == "sweep") {
            sub->add_option("--capacity-bytes", f.capacity_bytes, "Per-DTN cache capacity in bytes");
            sub->add_option("--capacity-fraction", f.capacity_fraction, "Per-DTN capacity as a share of the working set");
            sub->add_flag("--infinite", f.infinite, "Unlimited cache capacity");
            sub->add_option("--k", f.k, "Number of virtual groups (0 = number of DTNs)");
        }
        if (name == "sweep" || name == "combos") sub->add_option("--seeds", f.seeds, "Seeds to run");
        if (name == "sweep") {
            sub->add_option("--modes", f.modes, "Modes to run");
            sub->add_option("--workers", f.workers, "Parallel worker slots");
        }
        if (name == "kg-build" || name == "train" || name == "recommend" || name == "eval" || name == "combos") {
            sub->add_option("--sources", f.sources, "Knowledge sources, e.g. interactions+locality");
            sub->add_option("--noise", f.noise, "Noise triples to inject");
        }
        if (name == "train" || name == "combos") {
            sub->add_option("--epochs", f.epochs, "Training epochs");
            sub->add_option("--lr", f.lr, "Learning rate");
        }
        if (name == "train") sub->add_flag("--no-attention", f.no_attention, "Uniform neighbour weights");
        if (name == "combos") sub->add_option("--subsets", f.subsets, "Source subsets to evaluate (default: all)");
        if (name == "recommend" || name == "eval") sub->add_option("--model", f.model, "Model checkpoint from train");
        if (name == "recommend" || name == "eval" || name == "combos") sub->add_option("--top-k", f.top_k, "K");
        if (name == "recommend") {
            sub->add_option("--user", f.users, "User id (repeatable; default: every user)");
            sub->add_flag("--include-seen", f.include_seen, "Keep training interactions in the list");
        }
        if (name == "report") sub->add_option("--input", f.inputs, "Run directory (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        const auto selected = app.get_subcommands().front();
        const auto& [name, fn] = by_app.at(selected);
        auto config = default_config();
        if (!f.config.empty()) merge_config(config, load_config_file(f.config));
        merge_config(config, flags_patch(f));
        absolutize_paths(config);
        OutputSet outs(f.out);
        fn(config, outs, out);
        outs.write_manifest(name, config);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        err << "error: config: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace lfsim::cli
