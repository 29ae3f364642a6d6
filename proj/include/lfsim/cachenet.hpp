#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lfsim/netsim.hpp"
#include "lfsim/workload.hpp"

namespace lfsim {

// Cacheable unit: chunk i of an object covers data time [i*C, (i+1)*C).
struct SegmentKey {
    std::uint32_t object = 0;  // catalog object index
    std::int64_t chunk = 0;

    friend bool operator==(const SegmentKey&, const SegmentKey&) = default;
    friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
};

struct SegmentKeyHash {
    std::size_t operator()(const SegmentKey& k) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(k.object) << 40) ^
                                          static_cast<std::uint64_t>(k.chunk));
    }
};

struct Segment {
    SegmentKey key;
    std::uint64_t bytes = 0;
};

std::uint64_t segment_bytes(const DataObject& object, double chunk_s);

// Every chunk intersecting the request window, in chunk order. Throws
// NotFoundError for unknown objects and ValidationError for invalid windows.
std::vector<Segment> segments_for(const Request& request, const Catalog& catalog, double chunk_s);

// ---------------------------------------------------------------------------

// Byte-budgeted LRU store. Pinned entries (pinned_until > now) are skipped by
// eviction; everything else is evicted least-recently-used first.
class LruCache {
public:
    enum class Op { Get, Put, Pin, Unpin };

    struct Result {
        bool hit = false;
        bool inserted = false;
        std::vector<SegmentKey> evicted;  // in eviction order
    };

    explicit LruCache(std::uint64_t capacity = 0) : capacity_(capacity) {}

    // Single entry point mirroring the four operations. `arg` is the entry
    // size for Put and the pin deadline for Pin.
    Result access(const SegmentKey& key, std::uint64_t size, double now, Op op, double pin_until = 0.0);

    bool get(const SegmentKey& key);  // refreshes recency on hit
    Result put(const SegmentKey& key, std::uint64_t size, double now);
    void pin(const SegmentKey& key, double until);  // throws NotFoundError if absent
    void unpin(const SegmentKey& key);               // throws NotFoundError if absent

    bool contains(const SegmentKey& key) const { return index_.contains(key); }
    bool can_fit(std::uint64_t size, double now) const;
    std::optional<double> pinned_until(const SegmentKey& key) const;

    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t used() const { return used_; }
    std::size_t size() const { return index_.size(); }
    std::vector<SegmentKey> keys_by_recency() const;  // most recent first

private:
    struct Entry {
        SegmentKey key;
        std::uint64_t size;
        std::optional<double> pinned_until;
    };
    bool pinned(const Entry& e, double now) const { return e.pinned_until && *e.pinned_until > now; }

    std::uint64_t capacity_;
    std::uint64_t used_ = 0;
    std::list<Entry> order_;  // front = most recent
    std::unordered_map<SegmentKey, std::list<Entry>::iterator, SegmentKeyHash> index_;
};

// ---------------------------------------------------------------------------
// Virtual groups

struct KMeansResult {
    std::vector<std::size_t> assignment;
    Eigen::MatrixXd centroids;         // k x dims
    std::vector<double> wcss_history;  // after every Lloyd iteration
    std::size_t iterations = 0;
    bool converged = false;
    double wcss() const { return wcss_history.empty() ? 0.0 : wcss_history.back(); }
};

// Lloyd's algorithm with seeded k-means++ initialisation, restarted
// `restarts` times; the run with the lowest final WCSS is returned. Rows of
// `points` are observations. Throws ConfigError unless 1 <= k <= rows.
KMeansResult kmeans_users(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                          std::size_t max_iter = 100, std::size_t restarts = 10);

struct FeatureWeights {
    double coord = 1.0;     // alpha
    double interest = 1.0;  // beta
};

// One row per catalog user: [alpha * min-max coord | beta * min-max interest
// histogram over (region, kind)]. Portal requests count toward interests.
Eigen::MatrixXd user_features(const Catalog& catalog, const Trace& trace, const FeatureWeights& w = {});

struct VirtualGroup {
    std::size_t group_id = 0;
    std::vector<std::string> members;
    std::vector<double> centroid;
    std::string assigned_dtn;
};

struct PlacementPlan {
    std::vector<VirtualGroup> groups;
    std::map<std::string, std::size_t> user_group;
    std::vector<double> wcss_history;
};

// DTN minimising the summed member cost latency + reference_bytes/bottleneck
// from each member's home DTN; ties go to the smallest node id.
NodeIndex assign_group_dtn(const std::vector<NodeIndex>& member_homes, const Topology& topo,
                           const RouteTable& routes, double reference_bytes);

struct PlacementConfig {
    std::size_t k = 0;  // 0 = number of DTNs
    std::uint64_t seed = 1;
    std::size_t max_iter = 100;
    FeatureWeights weights;
    double reference_bytes = 100e6;
};

PlacementPlan plan_virtual_groups(const Catalog& catalog, const Trace& trace, const Topology& topo,
                                  const PlacementConfig& config);
std::string placement_json(const PlacementPlan& plan);

// ---------------------------------------------------------------------------
// Cache network

enum class Tier { Local = 0, Group = 1, Peer = 2, Origin = 3 };
std::string_view to_string(Tier t);

struct Location {
    Tier tier = Tier::Origin;
    NodeIndex node = 0;
};

// Per-DTN caches plus the lookup order home -> group -> peers -> origin. Peers
// are probed by ascending uncontended transfer time to the home DTN; content
// knowledge is global (no probe cost).
class CacheNetwork {
public:
    CacheNetwork(const Topology& topo, const Catalog& catalog, std::vector<NodeIndex> object_origin,
                 std::optional<std::uint64_t> capacity_override = std::nullopt);

    void set_group(std::size_t user, NodeIndex dtn) { group_[user] = dtn; }
    std::optional<NodeIndex> group_of(std::size_t user) const;
    NodeIndex home_of(std::size_t user) const { return home_.at(user); }
    NodeIndex origin_of(const SegmentKey& key) const { return object_origin_.at(key.object); }

    bool has_cache(NodeIndex n) const { return caches_.contains(n); }
    LruCache& cache(NodeIndex n) { return caches_.at(n); }
    const LruCache& cache(NodeIndex n) const { return caches_.at(n); }
    const std::map<NodeIndex, LruCache>& caches() const { return caches_; }

    // Candidate holders other than home/group, nearest first for `bytes`.
    const std::vector<NodeIndex>& peer_order(NodeIndex home) const { return peer_order_.at(home); }

    // Where the first copy would come from; no state change. With
    // use_remote = false only the home cache is consulted.
    Location locate(const SegmentKey& key, std::size_t user, bool use_remote = true) const;

    // locate + recency refresh at the holder + read-through insert at home.
    Location lookup_chain(const SegmentKey& key, std::uint64_t bytes, std::size_t user, double now);

    const RouteTable& routes() const { return routes_; }
    const Topology& topology() const { return topo_; }

private:
    const Topology& topo_;
    RouteTable routes_;
    std::vector<NodeIndex> object_origin_;
    std::vector<NodeIndex> home_;
    std::unordered_map<std::size_t, NodeIndex> group_;
    std::map<NodeIndex, LruCache> caches_;
    std::map<NodeIndex, std::vector<NodeIndex>> peer_order_;
};

// Object -> origin facility: regions (sorted by id) are dealt round-robin to
// origins (sorted by id).
std::vector<NodeIndex> default_object_origins(const Catalog& catalog, const Topology& topo);

}  // namespace lfsim
