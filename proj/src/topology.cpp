#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lfsim/netsim.hpp"

namespace lfsim {

Topology::Topology(std::vector<Node> nodes, std::vector<Link> links)
    : nodes_(std::move(nodes)), links_(std::move(links)) {
    if (nodes_.empty()) throw ValidationError("topology has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].id.empty()) throw ValidationError("topology node with empty id");
        if (!by_id_.emplace(nodes_[i].id, i).second) throw ValidationError("duplicate node '" + nodes_[i].id + "'");
    }
    adjacency_.resize(nodes_.size());
    for (std::size_t l = 0; l < links_.size(); ++l) {
        const auto& link = links_[l];
        auto a = find(link.a);
        auto b = find(link.b);
        if (!a || !b) throw ValidationError("link " + link.a + "-" + link.b + " names an unknown node");
        if (*a == *b) throw ValidationError("self-loop link at '" + link.a + "'");
        if (!(link.bandwidth > 0) || !std::isfinite(link.bandwidth))
            throw ValidationError("link " + link.a + "-" + link.b + " needs positive bandwidth");
        if (!(link.latency >= 0) || !std::isfinite(link.latency))
            throw ValidationError("link " + link.a + "-" + link.b + " needs non-negative latency");
        adjacency_[*a].push_back({l, *b});
        adjacency_[*b].push_back({l, *a});
    }
    if (std::none_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_origin; }))
        throw ValidationError("topology needs at least one origin node");

    std::vector<bool> seen(nodes_.size(), false);
    std::vector<NodeIndex> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        for (const auto& adj : adjacency_[n]) {
            if (!seen[adj.other]) {
                seen[adj.other] = true;
                stack.push_back(adj.other);
            }
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!seen[i]) throw ValidationError("topology is not connected: '" + nodes_[i].id + "' unreachable");
}

std::optional<NodeIndex> Topology::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

NodeIndex Topology::index(std::string_view id) const {
    auto i = find(id);
    if (!i) throw NotFoundError("unknown node '" + std::string(id) + "'");
    return *i;
}

namespace {

std::vector<NodeIndex> sorted_by_id(const std::vector<Node>& nodes, auto pred) {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (pred(nodes[i])) out.push_back(i);
    std::sort(out.begin(), out.end(), [&](NodeIndex a, NodeIndex b) { return nodes[a].id < nodes[b].id; });
    return out;
}

}  // namespace

std::vector<NodeIndex> Topology::dtns() const {
    return sorted_by_id(nodes_, [](const Node& n) { return !n.is_origin && n.storage_bytes > 0; });
}

std::vector<NodeIndex> Topology::origins() const {
    return sorted_by_id(nodes_, [](const Node& n) { return n.is_origin; });
}

std::set<std::string> Topology::node_ids() const {
    std::set<std::string> out;
    for (const auto& n : nodes_) out.insert(n.id);
    return out;
}

Topology Topology::with_bandwidth_scale(double factor) const {
    auto links = links_;
    for (auto& l : links) l.bandwidth *= factor;
    return Topology(nodes_, std::move(links));
}

Topology Topology::with_storage(std::uint64_t bytes) const {
    auto nodes = nodes_;
    for (auto& n : nodes)
        if (!n.is_origin && n.storage_bytes > 0) n.storage_bytes = bytes;
    return Topology(std::move(nodes), links_);
}

Topology parse_topology_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("topology.json", 0, e.what());
    }
    std::vector<Node> nodes;
    std::vector<Link> links;
    try {
        for (const auto& n : j.at("nodes")) {
            nodes.push_back({n.at("id").get<std::string>(), n.value("storage_bytes", std::uint64_t{0}),
                             n.value("is_origin", false)});
        }
        for (const auto& l : j.at("links")) {
            links.push_back({l.at("a").get<std::string>(), l.at("b").get<std::string>(),
                             l.at("bandwidth_Bps").get<double>(), l.at("latency_s").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("topology.json: ") + e.what());
    }
    return Topology(std::move(nodes), std::move(links));
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_topology_json(ss.str());
}

std::string topology_json(const Topology& topo) {
    nlohmann::ordered_json j;
    auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : topo.nodes())
        nodes.push_back({{"id", n.id}, {"storage_bytes", n.storage_bytes}, {"is_origin", n.is_origin}});
    auto& links = j["links"] = nlohmann::ordered_json::array();
    for (const auto& l : topo.links())
        links.push_back({{"a", l.a}, {"b", l.b}, {"bandwidth_Bps", l.bandwidth}, {"latency_s", l.latency}});
    return j.dump(2) + "\n";
}

Topology default_topology() {
    // Placeholder WAN numbers; only relative comparisons are meaningful.
    constexpr std::uint64_t kStorage = 64ull << 30;
    constexpr double kDtnBandwidth = 12.5e6;     // 100 Mbit/s
    constexpr double kOriginBandwidth = 25.0e6;  // 200 Mbit/s
    std::vector<Node> nodes;
    std::vector<Link> links;
    nodes.push_back({"wan", 0, false});
    const double dtn_latency[] = {0.010, 0.015, 0.020, 0.025, 0.030, 0.035, 0.040};
    for (int i = 0; i < 7; ++i) {
        const auto id = "dtn" + std::to_string(i + 1);
        nodes.push_back({id, kStorage, false});
        links.push_back({id, "wan", kDtnBandwidth, dtn_latency[i]});
    }
    nodes.push_back({"gage", 0, true});
    nodes.push_back({"ooi", 0, true});
    links.push_back({"gage", "wan", kOriginBandwidth, 0.025});
    links.push_back({"ooi", "wan", kOriginBandwidth, 0.020});
    return Topology(std::move(nodes), std::move(links));
}

double Route::transfer_time(double bytes) const {
    if (links.empty()) return 0.0;
    return latency + bytes / bottleneck;
}

Route route(const Topology& topo, NodeIndex src, NodeIndex dst) {
    const auto n = topo.nodes().size();
    if (src >= n || dst >= n) throw NotFoundError("route endpoint out of range");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<std::vector<NodeIndex>> path(n);
    std::vector<std::vector<LinkIndex>> via(n);
    std::vector<bool> done(n, false);
    dist[src] = 0.0;
    path[src] = {src};

    auto lex_less = [&](const std::vector<NodeIndex>& a, const std::vector<NodeIndex>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](NodeIndex x, NodeIndex y) {
            return topo.node(x).id < topo.node(y).id;
        });
    };

    for (std::size_t iter = 0; iter < n; ++iter) {
        std::optional<NodeIndex> u;
        for (NodeIndex i = 0; i < n; ++i) {
            if (done[i] || dist[i] == inf) continue;
            if (!u || dist[i] < dist[*u] || (dist[i] == dist[*u] && lex_less(path[i], path[*u]))) u = i;
        }
        if (!u) break;
        done[*u] = true;
        if (*u == dst) break;
        for (const auto& adj : topo.adjacent(*u)) {
            if (done[adj.other]) continue;
            const double cand = dist[*u] + topo.links()[adj.link].latency;
            auto cand_path = path[*u];
            cand_path.push_back(adj.other);
            if (cand < dist[adj.other] || (cand == dist[adj.other] && lex_less(cand_path, path[adj.other]))) {
                dist[adj.other] = cand;
                path[adj.other] = std::move(cand_path);
                via[adj.other] = via[*u];
                via[adj.other].push_back(adj.link);
            }
        }
    }
    if (dist[dst] == inf)
        throw RoutingError("no route from '" + topo.node(src).id + "' to '" + topo.node(dst).id + "'");

    Route r;
    r.nodes = std::move(path[dst]);
    r.links = std::move(via[dst]);
    r.latency = dist[dst];
    r.bottleneck = inf;
    for (auto l : r.links) r.bottleneck = std::min(r.bottleneck, topo.links()[l].bandwidth);
    return r;
}

Route route(const Topology& topo, std::string_view src, std::string_view dst) {
    return route(topo, topo.index(src), topo.index(dst));
}

RouteTable::RouteTable(const Topology& topo) : n_(topo.nodes().size()) {
    table_.reserve(n_ * n_);
    for (NodeIndex s = 0; s < n_; ++s)
        for (NodeIndex d = 0; d < n_; ++d) table_.push_back(route(topo, s, d));
}

}  // namespace lfsim
