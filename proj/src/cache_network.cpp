#include <algorithm>
#include <set>

#include "lfsim/cachenet.hpp"

namespace lfsim {

namespace {
// Peers are ranked by the uncontended time to move one 100 MB segment home.
constexpr double kPeerRankBytes = 100e6;
}  // namespace

std::string_view to_string(Tier t) {
    switch (t) {
        case Tier::Local: return "local";
        case Tier::Group: return "group";
        case Tier::Peer: return "peer";
        case Tier::Origin: return "origin";
    }
    return "origin";
}

CacheNetwork::CacheNetwork(const Topology& topo, const Catalog& catalog, std::vector<NodeIndex> object_origin,
                           std::optional<std::uint64_t> capacity_override)
    : topo_(topo), routes_(topo), object_origin_(std::move(object_origin)) {
    if (object_origin_.size() != catalog.objects().size())
        throw ValidationError("object origin map does not cover the catalog");
    for (auto o : object_origin_)
        if (o >= topo.nodes().size() || !topo.node(o).is_origin)
            throw ValidationError("object mapped to non-origin node");

    const auto dtns = topo.dtns();
    for (auto d : dtns) caches_.emplace(d, LruCache(capacity_override.value_or(topo.node(d).storage_bytes)));

    home_.reserve(catalog.users().size());
    for (const auto& u : catalog.users()) {
        auto h = topo.find(u.home_dtn);
        if (!h) throw ValidationError("user '" + u.user_id + "' homed at unknown node '" + u.home_dtn + "'");
        home_.push_back(*h);
    }

    std::set<NodeIndex> homes(home_.begin(), home_.end());
    for (auto d : dtns) homes.insert(d);
    for (auto h : homes) {
        std::vector<NodeIndex> peers;
        for (auto d : dtns)
            if (d != h) peers.push_back(d);
        std::stable_sort(peers.begin(), peers.end(), [&](NodeIndex a, NodeIndex b) {
            return routes_.get(a, h).transfer_time(kPeerRankBytes) < routes_.get(b, h).transfer_time(kPeerRankBytes);
        });
        peer_order_.emplace(h, std::move(peers));
    }
}

std::optional<NodeIndex> CacheNetwork::group_of(std::size_t user) const {
    auto it = group_.find(user);
    if (it == group_.end()) return std::nullopt;
    return it->second;
}

Location CacheNetwork::locate(const SegmentKey& key, std::size_t user, bool use_remote) const {
    const auto home = home_of(user);
    auto holds = [&](NodeIndex n) {
        auto it = caches_.find(n);
        return it != caches_.end() && it->second.contains(key);
    };
    if (holds(home)) return {Tier::Local, home};
    if (use_remote) {
        auto g = group_of(user);
        if (g && *g != home && holds(*g)) return {Tier::Group, *g};
        for (auto p : peer_order(home)) {
            if (g && p == *g) continue;
            if (holds(p)) return {Tier::Peer, p};
        }
    }
    return {Tier::Origin, origin_of(key)};
}

Location CacheNetwork::lookup_chain(const SegmentKey& key, std::uint64_t bytes, std::size_t user, double now) {
    const auto loc = locate(key, user);
    if (loc.tier != Tier::Origin) caches_.at(loc.node).get(key);
    if (loc.tier != Tier::Local) {
        const auto home = home_of(user);
        auto it = caches_.find(home);
        if (it != caches_.end() && it->second.can_fit(bytes, now)) it->second.put(key, bytes, now);
    }
    return loc;
}

std::vector<NodeIndex> default_object_origins(const Catalog& catalog, const Topology& topo) {
    const auto origins = topo.origins();
    if (origins.empty()) throw ConfigError("topology has no origin node");
    std::set<std::string> regions;
    for (const auto& o : catalog.objects()) regions.insert(o.region_id);
    std::map<std::string, NodeIndex> region_origin;
    std::size_t i = 0;
    for (const auto& r : regions) region_origin[r] = origins[i++ % origins.size()];
    std::vector<NodeIndex> out;
    out.reserve(catalog.objects().size());
    for (const auto& o : catalog.objects()) out.push_back(region_origin.at(o.region_id));
    return out;
}

}  // namespace lfsim
