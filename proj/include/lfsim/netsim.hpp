#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lfsim/common.hpp"

namespace lfsim {

using NodeIndex = std::size_t;
using LinkIndex = std::size_t;

struct Node {
    std::string id;
    std::uint64_t storage_bytes = 0;
    bool is_origin = false;
};

struct Link {
    std::string a;
    std::string b;
    double bandwidth = 0.0;  // bytes per second
    double latency = 0.0;    // seconds
};

// Bidirectional graph of DTNs, origin facilities and routers. A DTN is any
// non-origin node with storage; storage-less non-origin nodes only forward.
class Topology {
public:
    Topology() = default;
    Topology(std::vector<Node> nodes, std::vector<Link> links);  // validates

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const Node& node(NodeIndex i) const { return nodes_.at(i); }
    NodeIndex index(std::string_view id) const;  // throws NotFoundError
    std::optional<NodeIndex> find(std::string_view id) const;

    struct Adjacent {
        LinkIndex link;
        NodeIndex other;
    };
    const std::vector<Adjacent>& adjacent(NodeIndex n) const { return adjacency_.at(n); }

    std::vector<NodeIndex> dtns() const;     // sorted by id
    std::vector<NodeIndex> origins() const;  // sorted by id
    std::set<std::string> node_ids() const;

    Topology with_bandwidth_scale(double factor) const;
    Topology with_storage(std::uint64_t bytes) const;  // every DTN gets `bytes`

private:
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<Adjacent>> adjacency_;
    std::unordered_map<std::string, NodeIndex> by_id_;
};

Topology parse_topology_json(std::string_view text);
Topology load_topology(const std::filesystem::path& path);
std::string topology_json(const Topology& topo);

// Seven DTNs and two origin facilities hung off one wide-area router.
Topology default_topology();

struct Route {
    std::vector<NodeIndex> nodes;  // src .. dst; a single node when src == dst
    std::vector<LinkIndex> links;
    double latency = 0.0;
    double bottleneck = 0.0;  // min link bandwidth; infinity for an empty path

    // Uncontended estimate: latency + bytes / bottleneck.
    double transfer_time(double bytes) const;
};

// Minimum total-latency route; ties go to the lexicographically smallest
// sequence of node ids. Throws RoutingError when dst is unreachable.
Route route(const Topology& topo, NodeIndex src, NodeIndex dst);
Route route(const Topology& topo, std::string_view src, std::string_view dst);

// All-pairs route cache.
class RouteTable {
public:
    explicit RouteTable(const Topology& topo);
    const Route& get(NodeIndex src, NodeIndex dst) const { return table_.at(src * n_ + dst); }

private:
    std::size_t n_;
    std::vector<Route> table_;
};

// ---------------------------------------------------------------------------
// Event loop

using FlowId = std::uint64_t;

struct Flow {
    FlowId id = 0;
    NodeIndex src = 0;
    NodeIndex dst = 0;
    double size = 0.0;
    double t_start = 0.0;
    double bytes_done = 0.0;
    double rate = 0.0;
    const Route* path = nullptr;
};

struct Delivery {
    FlowId id = 0;
    NodeIndex src = 0;
    NodeIndex dst = 0;
    double size = 0.0;
    double t_start = 0.0;
    double t_done = 0.0;  // transmission end + path latency
};

// Flows transmit from t_start; each flow's rate is the minimum over its links
// of bandwidth / active flows on that link, recomputed whenever a flow starts
// or finishes transmitting. A flow is delivered one path latency after its
// last byte leaves.
class Simulator {
public:
    using DeliveryFn = std::function<void(const Delivery&)>;

    explicit Simulator(Topology topo);

    double now() const { return now_; }
    const Topology& topology() const { return topo_; }
    const RouteTable& routes() const { return routes_; }

    FlowId start_flow(NodeIndex src, NodeIndex dst, double size, DeliveryFn on_delivered = {});
    FlowId start_flow(std::string_view src, std::string_view dst, double size, DeliveryFn on_delivered = {});

    // Runs fn at time t (>= now). Events at equal times run in scheduling order.
    void schedule(double t, std::function<void()> fn);

    // Processes the next event. Returns false when nothing is pending.
    bool step();
    // Processes events until the next delivery, which is returned.
    std::optional<Delivery> advance();
    void run();

    std::size_t active_flows() const { return active_.size(); }
    const Flow* active_flow(FlowId id) const;
    // Sum of current rates of flows crossing the link.
    double link_rate_sum(LinkIndex link) const;
    std::size_t link_flow_count(LinkIndex link) const { return link_count_.at(link); }
    std::uint64_t events_processed() const { return events_; }

private:
    struct Event {
        double time;
        std::uint64_t seq;
        std::function<void()> fn;
        std::optional<Delivery> delivery;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    void push(double t, std::function<void()> fn, std::optional<Delivery> d);
    void accrue(double t);
    void recompute_rates();
    double next_transmission_end() const;
    void finish_transmissions(double t);

    Topology topo_;
    RouteTable routes_;
    double now_ = 0.0;
    double accrued_to_ = 0.0;
    std::uint64_t seq_ = 0;
    std::uint64_t events_ = 0;
    FlowId next_id_ = 1;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::map<FlowId, Flow> active_;  // ordered for deterministic iteration
    std::unordered_map<FlowId, DeliveryFn> callbacks_;
    std::vector<std::size_t> link_count_;
    std::optional<Delivery> last_delivery_;
};

}  // namespace lfsim
