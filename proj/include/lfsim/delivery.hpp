#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfsim/cachenet.hpp"
#include "lfsim/netsim.hpp"
#include "lfsim/workload.hpp"

namespace lfsim {

struct PredictedRequest {
    std::string user_id;
    std::string object_id;
    double predicted_t = 0.0;
    Window window;
    AccessPattern pattern;  // the classification the prediction rests on
};

// Next request for the object of the last request in `history`. Regular and
// Overlapping patterns only; RealTime is served by streaming.
std::optional<PredictedRequest> predict_next(const AccessPattern& pattern, std::span<const Request> history);

struct PrefetchTask {
    std::vector<Segment> segments;
    NodeIndex target_dtn = 0;
    double issue_t = 0.0;
    double pin_until = 0.0;
};

// issue_t = max(now, predicted_t - lead_factor * estimated_transfer_s);
// pins last until predicted_t + period.
PrefetchTask schedule_prefetch(const PredictedRequest& pred, std::vector<Segment> segments, NodeIndex target_dtn,
                               double estimated_transfer_s, double now, double lead_factor = 1.2);

struct Subscription {
    std::string user_id;
    std::string object_id;
    NodeIndex target_dtn = 0;
    bool active = true;
};

// ---------------------------------------------------------------------------
// Scenarios

enum class Mode { NoCache, LruOnly, VirtualGroups, SmartCache };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);  // throws ConfigError
const std::array<Mode, 4>& all_modes();

struct ScenarioConfig {
    Mode mode = Mode::SmartCache;
    double chunk_s = 3600.0;
    ClassifierConfig classifier;
    // Per-DTN capacity. Precedence: infinite, bytes, fraction of the trace's
    // working set, then the topology's storage_bytes.
    bool infinite_capacity = false;
    std::optional<std::uint64_t> capacity_bytes;
    std::optional<double> capacity_fraction;
    std::size_t k = 0;  // virtual groups; 0 = number of DTNs
    FeatureWeights weights;
    std::uint64_t seed = 1;
    double lead_factor = 1.2;
    std::size_t history_sessions = 10;  // trailing window for re-classification
    bool prefetch = true;               // smart_cache only
    bool streaming = true;              // smart_cache only
};

struct Metrics {
    std::string mode;
    std::uint64_t seed = 0;
    std::uint64_t requests = 0;
    std::array<std::uint64_t, 4> tier_hits{};   // indexed by Tier
    std::array<std::uint64_t, 4> tier_bytes{};  // segment bytes by the tier they came from
    double mean_latency_s = 0.0;
    double median_latency_s = 0.0;
    double p95_latency_s = 0.0;
    std::uint64_t origin_requests = 0;  // flows leaving an origin node
    std::uint64_t origin_bytes = 0;
    std::uint64_t wan_bytes = 0;        // bytes of every inter-node flow
    std::uint64_t prefetch_bytes = 0;   // prefetch and stream pushes
    std::uint64_t wasted_prefetch_bytes = 0;
    std::uint64_t stream_pushes = 0;
    std::uint64_t capacity_bytes = 0;   // effective per-DTN capacity

    double hit_fraction(Tier t) const {
        return requests == 0 ? 0.0 : static_cast<double>(tier_hits[static_cast<int>(t)]) / static_cast<double>(requests);
    }
};

struct RequestRecord {
    std::int64_t req_id = 0;
    std::string user_id;
    double t_arrive = 0.0;
    double t_done = 0.0;
    Tier tier = Tier::Origin;
    std::uint64_t bytes = 0;
    double latency() const { return t_done - t_arrive; }
};

enum class FlowKind { Demand, Prefetch, Stream, GroupCopy };
std::string_view to_string(FlowKind k);

struct FlowRecord {
    FlowKind kind = FlowKind::Demand;
    NodeIndex src = 0;
    NodeIndex dst = 0;
    double t_start = 0.0;
    double t_done = 0.0;
    std::uint64_t bytes = 0;
};

struct ScenarioResult {
    Metrics metrics;
    std::vector<RequestRecord> records;  // trace order
    std::vector<FlowRecord> flows;       // start order
    std::vector<Subscription> subscriptions;  // state at the end of the run
    PlacementPlan placement;             // empty unless groups are used
};

// Total bytes of distinct segments touched by the trace.
std::uint64_t working_set_bytes(const Trace& trace, const Catalog& catalog, double chunk_s);

// Replays the trace on the event loop. Throws ValidationError on dangling
// references before any simulation work.
ScenarioResult run_scenario(const Trace& trace, const Catalog& catalog, const Topology& topology,
                            const ScenarioConfig& config);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const Metrics& m);
void write_latencies_csv(std::ostream& out, const ScenarioResult& r, bool header = true);

}  // namespace lfsim
