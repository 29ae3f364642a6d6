#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "lfsim/delivery.hpp"

namespace lfsim {

std::optional<PredictedRequest> predict_next(const AccessPattern& pattern, std::span<const Request> history) {
    if (history.empty()) return std::nullopt;
    if (pattern.kind != PatternKind::Regular && pattern.kind != PatternKind::Overlapping) return std::nullopt;
    if (!(pattern.period_s > 0) || !(pattern.window_s > 0)) return std::nullopt;
    const auto& last = history.back();
    PredictedRequest p;
    p.user_id = last.user_id;
    p.object_id = last.object_id;
    p.predicted_t = last.t_arrive + pattern.period_s;
    p.pattern = pattern;
    const double start =
        pattern.kind == PatternKind::Regular ? last.window.end : last.window.end - pattern.overlap_s;
    p.window = {start, start + pattern.window_s};
    return p;
}

PrefetchTask schedule_prefetch(const PredictedRequest& pred, std::vector<Segment> segments, NodeIndex target_dtn,
                               double estimated_transfer_s, double now, double lead_factor) {
    PrefetchTask t;
    t.segments = std::move(segments);
    t.target_dtn = target_dtn;
    const double lead = std::max(0.0, lead_factor * estimated_transfer_s);
    t.issue_t = std::max(now, pred.predicted_t - lead);
    t.pin_until = pred.predicted_t + pred.pattern.period_s;
    return t;
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::NoCache: return "no_cache";
        case Mode::LruOnly: return "lru_only";
        case Mode::VirtualGroups: return "virtual_groups";
        case Mode::SmartCache: return "smart_cache";
    }
    return "no_cache";
}

Mode parse_mode(std::string_view s) {
    for (auto m : all_modes())
        if (to_string(m) == s) return m;
    throw ConfigError("unknown mode '" + std::string(s) +
                      "' (expected no_cache, lru_only, virtual_groups or smart_cache)");
}

std::string_view to_string(FlowKind k) {
    switch (k) {
        case FlowKind::Demand: return "demand";
        case FlowKind::Prefetch: return "prefetch";
        case FlowKind::Stream: return "stream";
        case FlowKind::GroupCopy: return "group_copy";
    }
    return "demand";
}

const std::array<Mode, 4>& all_modes() {
    static const std::array<Mode, 4> modes{Mode::NoCache, Mode::LruOnly, Mode::VirtualGroups, Mode::SmartCache};
    return modes;
}

std::uint64_t working_set_bytes(const Trace& trace, const Catalog& catalog, double chunk_s) {
    std::unordered_set<SegmentKey, SegmentKeyHash> seen;
    std::uint64_t total = 0;
    for (const auto& q : trace)
        for (const auto& s : segments_for(q, catalog, chunk_s))
            if (seen.insert(s.key).second) total += s.bytes;
    return total;
}

namespace {

struct PlacedKey {
    NodeIndex node;
    SegmentKey key;
    friend bool operator==(const PlacedKey&, const PlacedKey&) = default;
};

struct PlacedKeyHash {
    std::size_t operator()(const PlacedKey& k) const noexcept {
        return SegmentKeyHash{}(k.key) * 31 + std::hash<std::size_t>{}(k.node);
    }
};

struct Prefetched {
    std::uint64_t bytes = 0;
    bool used = false;
    double expiry = 0.0;
};

struct Stream {
    std::set<std::size_t> users;
    double last_request = 0.0;
    double next_push = 0.0;
    bool active = false;
    bool scheduled = false;
};

class Scenario {
public:
    Scenario(const Trace& trace, const Catalog& catalog, const Topology& topo, const ScenarioConfig& cfg)
        : trace_(trace), catalog_(catalog), cfg_(cfg), sim_(topo),
          net_(sim_.topology(), catalog, default_object_origins(catalog, sim_.topology()), capacity(trace, catalog, cfg)) {
        caching_ = cfg.mode != Mode::NoCache;
        remote_ = cfg.mode == Mode::VirtualGroups || cfg.mode == Mode::SmartCache;
        smart_ = cfg.mode == Mode::SmartCache;
        for (const auto& u : catalog.users()) user_index_.emplace(u.user_id, user_index_.size());
    }

    ScenarioResult run() {
        ScenarioResult out;
        if (remote_ && !catalog_.users().empty() && !sim_.topology().dtns().empty()) {
            PlacementConfig pc;
            pc.k = cfg_.k;
            pc.seed = cfg_.seed;
            pc.weights = cfg_.weights;
            out.placement = plan_virtual_groups(catalog_, trace_, sim_.topology(), pc);
            for (const auto& g : out.placement.groups)
                for (const auto& m : g.members) net_.set_group(user_index_.at(m), sim_.topology().index(g.assigned_dtn));
        }

        records_.resize(trace_.size());
        outstanding_.assign(trace_.size(), 0);
        for (std::size_t i = 0; i < trace_.size(); ++i) {
            const auto& q = trace_[i];
            records_[i].req_id = q.req_id;
            records_[i].user_id = q.user_id;
            records_[i].t_arrive = q.t_arrive;
            records_[i].t_done = q.t_arrive;
            sim_.schedule(q.t_arrive, [this, i] { serve(i); });
        }
        sim_.run();

        m_.mode = std::string(to_string(cfg_.mode));
        m_.seed = cfg_.seed;
        m_.requests = trace_.size();
        m_.capacity_bytes = net_.caches().empty() ? 0 : net_.caches().begin()->second.capacity();
        std::vector<double> lat;
        lat.reserve(records_.size());
        for (const auto& r : records_) {
            ++m_.tier_hits[static_cast<int>(r.tier)];
            lat.push_back(r.latency());
        }
        if (!lat.empty()) {
            double sum = 0;
            for (double l : lat) sum += l;
            m_.mean_latency_s = sum / static_cast<double>(lat.size());
            std::sort(lat.begin(), lat.end());
            const auto n = lat.size();
            m_.median_latency_s = n % 2 ? lat[n / 2] : 0.5 * (lat[n / 2 - 1] + lat[n / 2]);
            m_.p95_latency_s = lat[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1];
        }
        out.metrics = m_;
        out.records = std::move(records_);
        out.flows = std::move(flows_);
        for (const auto& [where, st] : streams_)
            for (auto u : st.users)
                out.subscriptions.push_back({catalog_.users()[u].user_id, catalog_.objects()[where.second].object_id,
                                             where.first, st.active});
        return out;
    }

private:
    static std::optional<std::uint64_t> capacity(const Trace& trace, const Catalog& catalog, const ScenarioConfig& cfg) {
        if (cfg.infinite_capacity) return std::numeric_limits<std::uint64_t>::max() / 4;
        if (cfg.capacity_bytes) return *cfg.capacity_bytes;
        if (cfg.capacity_fraction) {
            if (!(*cfg.capacity_fraction >= 0)) throw ConfigError("capacity fraction must be non-negative");
            return static_cast<std::uint64_t>(
                std::llround(*cfg.capacity_fraction * static_cast<double>(working_set_bytes(trace, catalog, cfg.chunk_s))));
        }
        return std::nullopt;
    }

    bool cached(NodeIndex n, const SegmentKey& k) const { return net_.has_cache(n) && net_.cache(n).contains(k); }
    bool in_flight(NodeIndex n, const SegmentKey& k) const { return inflight_.contains({n, k}); }

    void mark_used(NodeIndex n, const SegmentKey& k) {
        if (auto it = prefetched_.find({n, k}); it != prefetched_.end()) it->second.used = true;
    }

    void finish_part(std::size_t i, double t) {
        records_[i].t_done = std::max(records_[i].t_done, t);
        --outstanding_[i];
    }

    // Starts one flow carrying `segs` from src to dst. Cached modes register
    // the segments as in flight so later requests wait instead of refetching.
    // A positive pin_until marks a push (prefetch or stream) whose use is tracked.
    void transfer(FlowKind kind, NodeIndex src, NodeIndex dst, std::vector<Segment> segs, double pin_until,
                  std::function<void(double)> after) {
        std::uint64_t bytes = 0;
        for (const auto& s : segs) bytes += s.bytes;
        if (src != dst) m_.wan_bytes += bytes;
        if (sim_.topology().node(src).is_origin) {
            ++m_.origin_requests;
            m_.origin_bytes += bytes;
        }
        if (pin_until > 0) m_.prefetch_bytes += bytes;
        if (caching_)
            for (const auto& s : segs) inflight_[{dst, s.key}];
        const auto rec = flows_.size();
        flows_.push_back({kind, src, dst, sim_.now(), sim_.now(), bytes});
        sim_.start_flow(src, dst, static_cast<double>(bytes),
                        [this, rec, dst, segs = std::move(segs), pin_until, after = std::move(after)](const Delivery& d) {
                            flows_[rec].t_done = d.t_done;
                            for (const auto& s : segs) arrive(dst, s, pin_until, d.t_done);
                            if (after) after(d.t_done);
                        });
    }

    void arrive(NodeIndex dst, const Segment& s, double pin_until, double t) {
        std::vector<std::size_t> waiters;
        if (caching_) {
            auto it = inflight_.find({dst, s.key});
            if (it != inflight_.end()) {
                waiters = std::move(it->second);
                inflight_.erase(it);
            }
            if (net_.has_cache(dst)) {
                auto& c = net_.cache(dst);
                bool stored = c.contains(s.key);
                if (!stored && c.can_fit(s.bytes, t)) {
                    c.put(s.key, s.bytes, t);
                    stored = true;
                }
                if (stored && pin_until > t) c.pin(s.key, pin_until);
                if (pin_until > 0) {
                    if (!stored) {
                        if (waiters.empty()) m_.wasted_prefetch_bytes += s.bytes;
                    } else {
                        auto& p = prefetched_[{dst, s.key}];
                        p.bytes = s.bytes;
                        p.used = !waiters.empty();
                        p.expiry = pin_until;
                        sim_.schedule(std::max(t, pin_until), [this, dst, key = s.key, pin_until] { expire(dst, key, pin_until); });
                    }
                }
            }
        }
        for (auto w : waiters) finish_part(w, t);
    }

    void expire(NodeIndex n, const SegmentKey& k, double expiry) {
        auto it = prefetched_.find({n, k});
        if (it == prefetched_.end() || it->second.expiry != expiry) return;
        if (!it->second.used) m_.wasted_prefetch_bytes += it->second.bytes;
        prefetched_.erase(it);
    }

    void serve(std::size_t i) {
        const auto& q = trace_[i];
        const auto user = user_index_.at(q.user_id);
        const auto home = net_.home_of(user);
        const double now = sim_.now();
        auto& rec = records_[i];
        const auto segs = segments_for(q, catalog_, cfg_.chunk_s);
        if (smart_) catch_up_stream(home, q, now);

        Tier worst = Tier::Local;
        std::map<NodeIndex, std::vector<Segment>> batches;
        for (const auto& s : segs) {
            rec.bytes += s.bytes;
            Location loc{Tier::Origin, net_.origin_of(s.key)};
            if (caching_) {
                if (cached(home, s.key)) {
                    net_.cache(home).get(s.key);
                    mark_used(home, s.key);
                    m_.tier_bytes[0] += s.bytes;
                    continue;
                }
                if (auto it = inflight_.find({home, s.key}); it != inflight_.end()) {
                    it->second.push_back(i);
                    ++outstanding_[i];
                    m_.tier_bytes[0] += s.bytes;
                    continue;
                }
                loc = net_.locate(s.key, user, remote_);
                if (loc.tier != Tier::Origin) net_.cache(loc.node).get(s.key);
            }
            worst = std::max(worst, loc.tier);
            m_.tier_bytes[static_cast<int>(loc.tier)] += s.bytes;
            batches[loc.node].push_back(s);
        }
        rec.tier = worst;

        for (auto& [src, batch] : batches) {
            ++outstanding_[i];
            const bool from_origin = sim_.topology().node(src).is_origin;
            std::vector<Segment> copy;
            if (from_origin && remote_) copy = batch;
            transfer(FlowKind::Demand, src, home, std::move(batch), 0.0, [this, i, user, home, copy = std::move(copy)](double t) {
                finish_part(i, t);
                place_group_copy(user, home, copy);
            });
        }

        if (smart_ && q.channel == Channel::Api) predict(i, user, home, now);
        if (smart_) touch_stream(home, q, now);
    }

    // Virtual-group placement: origin fetches are also staged at the group DTN.
    void place_group_copy(std::size_t user, NodeIndex home, const std::vector<Segment>& segs) {
        if (segs.empty()) return;
        auto g = net_.group_of(user);
        if (!g || *g == home) return;
        std::vector<Segment> todo;
        for (const auto& s : segs)
            if (!cached(*g, s.key) && !in_flight(*g, s.key)) todo.push_back(s);
        if (!todo.empty()) transfer(FlowKind::GroupCopy, home, *g, std::move(todo), 0.0, {});
    }

    void predict(std::size_t i, std::size_t user, NodeIndex home, double now) {
        auto& h = history_[user];
        h.push_back(trace_[i]);
        // Trailing window of the last history_sessions distinct timestamps.
        std::size_t start = h.size();
        for (std::size_t sessions = 0; start > 0 && sessions < cfg_.history_sessions; ++sessions) {
            const double t = h[start - 1].t_arrive;
            while (start > 0 && h[start - 1].t_arrive == t) --start;
        }
        if (h.size() > 4 * cfg_.history_sessions + 64) {
            h.erase(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(start));
            start = 0;
        }
        std::span<const Request> window(h.data() + start, h.size() - start);
        const auto pattern = classify_user_pattern(window, cfg_.classifier);

        if (pattern.kind == PatternKind::RealTime) {
            if (cfg_.streaming) subscribe(home, trace_[i], now);
            return;
        }
        if (!cfg_.prefetch) return;
        // Predict for this request's object from its own most recent request.
        auto pred = predict_next(pattern, window.subspan(window.size() - 1));
        if (!pred) return;
        Request next;
        next.user_id = pred->user_id;
        next.object_id = pred->object_id;
        next.window = pred->window;
        if (next.window.start < 0) return;
        auto segs = segments_for(next, catalog_, cfg_.chunk_s);

        std::map<NodeIndex, double> bytes_by_src;
        std::vector<Segment> missing;
        for (const auto& s : segs) {
            if (cached(home, s.key) || in_flight(home, s.key)) continue;
            missing.push_back(s);
            bytes_by_src[net_.locate(s.key, user, remote_).node] += static_cast<double>(s.bytes);
        }
        double est = 0.0;
        for (const auto& [src, b] : bytes_by_src) est = std::max(est, net_.routes().get(src, home).transfer_time(b));
        auto task = schedule_prefetch(*pred, std::move(segs), home, est, now, cfg_.lead_factor);
        sim_.schedule(task.issue_t, [this, user, task = std::move(task)] { issue(user, task); });
    }

    void issue(std::size_t user, const PrefetchTask& task) {
        const auto home = task.target_dtn;
        const double now = sim_.now();
        std::map<NodeIndex, std::vector<Segment>> batches;
        for (const auto& s : task.segments) {
            if (cached(home, s.key)) {
                if (task.pin_until > now) net_.cache(home).pin(s.key, task.pin_until);
                continue;
            }
            if (in_flight(home, s.key)) continue;
            batches[net_.locate(s.key, user, remote_).node].push_back(s);
        }
        for (auto& [src, batch] : batches) transfer(FlowKind::Prefetch, src, home, std::move(batch), task.pin_until, {});
    }

    void subscribe(NodeIndex home, const Request& q, double now) {
        const auto obj = static_cast<std::uint32_t>(*catalog_.object_index(q.object_id));
        auto& s = streams_[{home, obj}];
        s.users.insert(*catalog_.user_index(q.user_id));
        s.last_request = now;
        s.active = true;
        if (!s.scheduled) {
            s.scheduled = true;
            s.next_push = (std::floor(now / cfg_.chunk_s) + 1) * cfg_.chunk_s;
            const double at = s.next_push;
            sim_.schedule(at, [this, home, obj, at] { push_event(home, obj, at); });
        }
    }

    void touch_stream(NodeIndex home, const Request& q, double now) {
        const auto obj = static_cast<std::uint32_t>(*catalog_.object_index(q.object_id));
        if (auto it = streams_.find({home, obj}); it != streams_.end()) it->second.last_request = now;
    }

    // Chunk i of an object becomes available at (i+1)C and is pushed at once.
    void push_event(NodeIndex home, std::uint32_t obj, double at) {
        const auto& s = streams_.at({home, obj});
        if (s.scheduled && s.next_push == at) push(home, obj);
    }

    // Availability precedes any request arriving at the same instant.
    void catch_up_stream(NodeIndex home, const Request& q, double now) {
        const auto obj = static_cast<std::uint32_t>(*catalog_.object_index(q.object_id));
        auto it = streams_.find({home, obj});
        while (it != streams_.end() && it->second.scheduled && it->second.next_push <= now) push(home, obj);
    }

    void push(NodeIndex home, std::uint32_t obj) {
        auto& s = streams_.at({home, obj});
        const double now = s.next_push;
        if (now - s.last_request > 2 * cfg_.chunk_s) {
            s.active = false;
            s.scheduled = false;
            return;
        }
        const auto chunk = static_cast<std::int64_t>(std::llround(now / cfg_.chunk_s)) - 1;
        const SegmentKey key{obj, chunk};
        const double until = now + cfg_.chunk_s;
        if (cached(home, key)) {
            net_.cache(home).pin(key, until);
        } else if (!in_flight(home, key)) {
            ++m_.stream_pushes;
            transfer(FlowKind::Stream, net_.origin_of(key), home, {{key, segment_bytes(catalog_.objects()[obj], cfg_.chunk_s)}}, until, {});
        }
        s.next_push = now + cfg_.chunk_s;
        const double at = s.next_push;
        sim_.schedule(at, [this, home, obj, at] { push_event(home, obj, at); });
    }

    const Trace& trace_;
    const Catalog& catalog_;
    ScenarioConfig cfg_;
    Simulator sim_;
    CacheNetwork net_;
    bool caching_ = false;
    bool remote_ = false;
    bool smart_ = false;
    std::unordered_map<std::string, std::size_t> user_index_;
    std::vector<RequestRecord> records_;
    std::vector<std::size_t> outstanding_;
    std::vector<FlowRecord> flows_;
    std::unordered_map<PlacedKey, std::vector<std::size_t>, PlacedKeyHash> inflight_;
    std::unordered_map<PlacedKey, Prefetched, PlacedKeyHash> prefetched_;
    std::unordered_map<std::size_t, std::vector<Request>> history_;
    std::map<std::pair<NodeIndex, std::uint32_t>, Stream> streams_;
    Metrics m_;
};

void write_double(std::ostream& out, double v) { out << format_number(v); }

}  // namespace

ScenarioResult run_scenario(const Trace& trace, const Catalog& catalog, const Topology& topology,
                            const ScenarioConfig& config) {
    if (!(config.chunk_s > 0)) throw ConfigError("chunk duration must be positive");
    if (!(config.lead_factor >= 0)) throw ConfigError("lead factor must be non-negative");
    if (config.history_sessions < 2) throw ConfigError("history window must cover at least 2 sessions");
    const auto ids = topology.node_ids();
    catalog.validate(&ids);
    validate_trace(trace, catalog);
    for (const auto& u : catalog.users())
        if (topology.node(topology.index(u.home_dtn)).is_origin)
            throw ValidationError("user '" + u.user_id + "' is homed at origin node '" + u.home_dtn + "'");
    Scenario s(trace, catalog, topology, config);
    return s.run();
}

void write_metrics_header(std::ostream& out) {
    out << "mode,seed,requests,local_frac,group_frac,peer_frac,origin_frac,mean_latency_s,median_latency_s,"
           "p95_latency_s,origin_requests,origin_bytes,wan_bytes,prefetch_bytes,wasted_prefetch_bytes\n";
}

void write_metrics_row(std::ostream& out, const Metrics& m) {
    out << m.mode << ',' << m.seed << ',' << m.requests;
    for (auto t : {Tier::Local, Tier::Group, Tier::Peer, Tier::Origin}) {
        out << ',';
        write_double(out, m.hit_fraction(t));
    }
    for (double v : {m.mean_latency_s, m.median_latency_s, m.p95_latency_s}) {
        out << ',';
        write_double(out, v);
    }
    out << ',' << m.origin_requests << ',' << m.origin_bytes << ',' << m.wan_bytes << ',' << m.prefetch_bytes << ','
        << m.wasted_prefetch_bytes << '\n';
}

void write_latencies_csv(std::ostream& out, const ScenarioResult& r, bool header) {
    if (header) out << "mode,seed,req_id,user_id,t_arrive_s,t_done_s,latency_s,tier\n";
    for (const auto& rec : r.records) {
        out << r.metrics.mode << ',' << r.metrics.seed << ',' << rec.req_id << ',' << rec.user_id << ',';
        write_double(out, rec.t_arrive);
        out << ',';
        write_double(out, rec.t_done);
        out << ',';
        write_double(out, rec.latency());
        out << ',' << to_string(rec.tier) << '\n';
    }
}

}  // namespace lfsim
