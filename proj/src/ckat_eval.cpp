#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "lfsim/ckat.hpp"

namespace lfsim {

namespace {

using nlohmann::json;

std::string user_key(std::string_view user) {
    return user.starts_with("user:") ? std::string(user) : canonical_id("user", user);
}

std::string strip_type(const std::string& canonical) {
    const auto pos = canonical.find(':');
    return pos == std::string::npos ? canonical : canonical.substr(pos + 1);
}

json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
        throw ParseError("checkpoint", 0, "checkpoint matrix has inconsistent shape");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
    return m;
}

}  // namespace

std::vector<Recommendation> recommend_topk(const Model& m, std::string_view user, std::size_t K, bool exclude_seen) {
    if (K < 1) throw ConfigError("K must be at least 1");
    const auto key = user_key(user);
    const auto u = m.graph.entity(key);
    if (!u || !key.starts_with("user:")) throw NotFoundError("unknown user '" + std::string(user) + "'");
    static const std::vector<std::size_t> kNone;
    const auto it = m.graph.interactions().find(*u);
    const auto& seen = it == m.graph.interactions().end() ? kNone : it->second;

    std::vector<Recommendation> recs;
    for (auto i : m.graph.items()) {
        if (exclude_seen && std::binary_search(seen.begin(), seen.end(), i)) continue;
        recs.push_back({m.graph.entities()[i], m.score(*u, i)});
    }
    const auto n = std::min(K, recs.size());
    std::partial_sort(recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(n), recs.end(),
                      [](const Recommendation& a, const Recommendation& b) {
                          return a.score != b.score ? a.score > b.score : a.item < b.item;
                      });
    recs.resize(n);
    return recs;
}

EvalResult evaluate_ranker(const Ranker& rank, const UserItems& test, std::size_t K) {
    if (K < 1) throw ConfigError("K must be at least 1");
    EvalResult res;
    for (const auto& [user, held] : test) {
        if (held.empty()) continue;
        std::set<std::string> truth;
        for (const auto& i : held) truth.insert(canonical_id("item", i));
        const auto top = rank(canonical_id("user", user), K);
        double hits = 0.0;
        double dcg = 0.0;
        for (std::size_t p = 0; p < std::min(K, top.size()); ++p)
            if (truth.contains(top[p])) {
                hits += 1.0;
                dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
            }
        double idcg = 0.0;
        for (std::size_t p = 0; p < std::min(K, truth.size()); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
        res.recall += hits / static_cast<double>(truth.size());
        res.ndcg += dcg / idcg;
        ++res.users;
    }
    if (res.users > 0) {
        res.recall /= static_cast<double>(res.users);
        res.ndcg /= static_cast<double>(res.users);
    }
    return res;
}

EvalResult evaluate(const Model& m, const UserItems& test, std::size_t K) {
    return evaluate_ranker(
        [&](const std::string& user, std::size_t k) {
            std::vector<std::string> out;
            if (!m.graph.entity(user)) return out;
            for (auto& r : recommend_topk(m, user, k, true)) out.push_back(std::move(r.item));
            return out;
        },
        test, K);
}

Ranker popularity_ranker(const UserItems& train) {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& [user, items] : train)
        for (const auto& i : items) {
            const auto item = canonical_id("item", i);
            ++counts[item];
            seen[canonical_id("user", user)].insert(item);
        }
    std::vector<std::pair<std::string, std::size_t>> order(counts.begin(), counts.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return [order = std::move(order), seen = std::move(seen)](const std::string& user, std::size_t K) {
        std::vector<std::string> out;
        const auto it = seen.find(user);
        for (const auto& [item, _] : order) {
            if (out.size() >= K) break;
            if (it != seen.end() && it->second.contains(item)) continue;
            out.push_back(item);
        }
        return out;
    };
}

std::vector<std::set<Source>> all_source_subsets() {
    const std::array<Source, 3> extra{Source::Locality, Source::DomainModel, Source::UserAssociation};
    std::vector<std::set<Source>> out;
    for (unsigned mask = 0; mask < 8; ++mask) {
        std::set<Source> s{Source::Interactions};
        for (unsigned b = 0; b < 3; ++b)
            if (mask & (1u << b)) s.insert(extra[b]);
        out.push_back(std::move(s));
    }
    return out;
}

std::string sources_label(const std::set<Source>& s) {
    std::string out;
    if (s.contains(Source::Interactions)) out = "interactions";
    for (auto x : s) {
        if (x == Source::Interactions) continue;
        if (!out.empty()) out += '+';
        out += to_string(x);
    }
    return out;
}

std::set<Source> parse_sources_label(std::string_view s) {
    std::set<Source> out{Source::Interactions};
    while (!s.empty()) {
        const auto pos = s.find('+');
        const auto part = s.substr(0, pos);
        if (!part.empty()) out.insert(parse_source(part));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

std::vector<ComboRow> run_combination_study(const Catalog& catalog, const Trace& trace, const StudyConfig& config) {
    const auto split = holdout_split(user_items(trace), config.holdout);
    const auto sources = build_source_kgs(catalog, split.train);
    const auto subsets = config.subsets.empty() ? all_source_subsets() : config.subsets;
    std::vector<ComboRow> rows;
    for (const auto& subset : subsets) {
        auto kgs = sources;
        auto selection = subset;
        if (config.noise_triples > 0) {
            const auto base = build_ckg(sources, subset);
            kgs[Source::Noise] = inject_noise(base.entities(), config.noise_triples, config.train.seed);
            selection.insert(Source::Noise);
        }
        const auto graph = build_ckg(kgs, selection);
        for (bool att : config.attention) {
            auto tc = config.train;
            tc.attention = att;
            auto trained = train(graph, tc);
            const auto model = make_model(graph, std::move(trained.params), att);
            auto with_interactions = subset;
            with_interactions.insert(Source::Interactions);
            rows.push_back({with_interactions, att, config.noise_triples, tc.seed, evaluate(model, split.test, config.K)});
        }
    }
    return rows;
}

void write_combos_csv(std::ostream& out, const std::vector<ComboRow>& rows, std::size_t K) {
    out << "sources,attention,noise_triples,k,recall,ndcg,seed\n";
    for (const auto& r : rows)
        out << sources_label(r.sources) << ',' << (r.attention ? "on" : "off") << ',' << r.noise_triples << ',' << K
            << ',' << format_number(r.metrics.recall) << ',' << format_number(r.metrics.ndcg) << ',' << r.seed << '\n';
}

void write_rec_csv(std::ostream& out, const std::string& user_id, const std::vector<Recommendation>& recs, bool header) {
    if (header) out << "user_id,rank,item_id,score\n";
    for (std::size_t i = 0; i < recs.size(); ++i)
        out << user_id << ',' << i + 1 << ',' << strip_type(recs[i].item) << ',' << format_number(recs[i].score) << '\n';
}

std::string checkpoint_json(const Model& m, const TrainConfig& c) {
    json j;
    j["format"] = "lfsim-ckat";
    j["version"] = 1;
    j["entities"] = m.graph.entities();
    j["relations"] = m.graph.relations();
    std::vector<std::string> src;
    for (auto s : m.graph.sources()) src.emplace_back(to_string(s));
    j["sources"] = src;
    j["config"] = {{"learning_rate", c.learning_rate}, {"lambda", c.lambda},   {"batch_size", c.batch_size},
                   {"epochs", c.epochs},               {"negatives", c.negatives}, {"attention", m.attention},
                   {"seed", c.seed},                   {"d", c.d},             {"k", c.k},
                   {"layers", c.layers},               {"reduction", c.reduction == Reduction::Mean ? "mean" : "sum"}};
    json p;
    p["E"] = matrix_json(m.params.E);
    p["R"] = matrix_json(m.params.R);
    p["Wr"] = json::array();
    for (const auto& w : m.params.Wr) p["Wr"].push_back(matrix_json(w));
    p["W"] = json::array();
    for (const auto& w : m.params.W) p["W"].push_back(matrix_json(w));
    j["params"] = std::move(p);
    return j.dump();
}

Checkpoint parse_checkpoint(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError("checkpoint", 0, e.what());
    }
    try {
        if (j.value("format", "") != "lfsim-ckat") throw ParseError("checkpoint", 0, "not a model checkpoint");
        if (j.value("version", 0) != 1) throw ParseError("checkpoint", 0, "unsupported checkpoint version");
        Checkpoint c;
        c.entities = j.at("entities").get<std::vector<std::string>>();
        c.relations = j.at("relations").get<std::vector<std::string>>();
        for (const auto& s : j.at("sources")) c.sources.insert(parse_source(s.get<std::string>()));
        const auto& cf = j.at("config");
        c.config.learning_rate = cf.at("learning_rate").get<double>();
        c.config.lambda = cf.at("lambda").get<double>();
        c.config.batch_size = cf.at("batch_size").get<std::size_t>();
        c.config.epochs = cf.at("epochs").get<std::size_t>();
        c.config.negatives = cf.at("negatives").get<std::size_t>();
        c.config.attention = cf.at("attention").get<bool>();
        c.config.seed = cf.at("seed").get<std::uint64_t>();
        c.config.d = cf.at("d").get<std::size_t>();
        c.config.k = cf.at("k").get<std::size_t>();
        c.config.layers = cf.at("layers").get<std::size_t>();
        c.config.reduction = cf.at("reduction").get<std::string>() == "mean" ? Reduction::Mean : Reduction::Sum;
        const auto& p = j.at("params");
        c.params.E = matrix_from(p.at("E"));
        c.params.R = matrix_from(p.at("R"));
        for (const auto& w : p.at("Wr")) c.params.Wr.push_back(matrix_from(w));
        for (const auto& w : p.at("W")) c.params.W.push_back(matrix_from(w));
        if (c.params.E.rows() != static_cast<Eigen::Index>(c.entities.size()) ||
            c.params.R.rows() != static_cast<Eigen::Index>(c.relations.size()) ||
            c.params.Wr.size() != c.relations.size())
            throw ParseError("checkpoint", 0, "checkpoint parameters do not match its dictionaries");
        return c;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint", 0, e.what());
    }
}

}  // namespace lfsim
