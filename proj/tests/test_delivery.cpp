#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfsim/delivery.hpp"

using namespace lfsim;

namespace {

constexpr double C = 3600;

// Origin O and DTNs A, B behind router W; 1 MB/s everywhere.
Topology tiny_net() {
    return Topology({{"O", 0, true}, {"W", 0, false}, {"A", 1ull << 40, false}, {"B", 1ull << 40, false}},
                    {{"O", "W", 1e6, 0.05}, {"A", "W", 1e6, 0.01}, {"B", "W", 1e6, 0.02}});
}

// One object at 1000 B/s, so every chunk is 3.6 MB.
Catalog tiny_catalog() {
    return Catalog({{"x", "i", "r", "ctd", 1000}}, {}, {{"u1", "org", 0, 0, "A"}, {"u2", "org", 5, 5, "B"}});
}

Request req(std::int64_t id, double t, const std::string& user, Window w, Channel ch = Channel::Api) {
    return {id, t, user, "x", w, ch};
}

ScenarioResult run(const Trace& t, const Catalog& cat, const Topology& topo, Mode m, std::uint64_t seed = 1) {
    ScenarioConfig c;
    c.mode = m;
    c.seed = seed;
    return run_scenario(t, cat, topo, c);
}

std::vector<const FlowRecord*> flows_of(const ScenarioResult& r, FlowKind k) {
    std::vector<const FlowRecord*> out;
    for (const auto& f : r.flows)
        if (f.kind == k) out.push_back(&f);
    return out;
}

}  // namespace

TEST_CASE("predict_next: regular, overlapping, unknown") {
    AccessPattern reg{PatternKind::Regular, 86400, 86400, 0, 3};
    std::vector<Request> h{{1, 86400, "u", "x", {0, 86400}, Channel::Api}};
    auto p = predict_next(reg, h);
    REQUIRE(p);
    CHECK(p->predicted_t == 172800);
    CHECK(p->window == Window{86400, 172800});

    AccessPattern ov{PatternKind::Overlapping, 3000, 3600, 600, 3};
    h[0].window = {0, 3600};
    p = predict_next(ov, h);
    REQUIRE(p);
    CHECK(p->window == Window{3000, 6600});

    CHECK_FALSE(predict_next(AccessPattern{}, h));
    CHECK_FALSE(predict_next(AccessPattern{PatternKind::RealTime, 60, 120, 60, 5}, h));
    CHECK_FALSE(predict_next(reg, {}));
}

TEST_CASE("schedule_prefetch: lead time and clamp") {
    PredictedRequest p;
    p.predicted_t = 1000;
    p.pattern.period_s = 500;
    auto t = schedule_prefetch(p, {}, 3, 100, 0);
    CHECK(t.issue_t == doctest::Approx(880));
    CHECK(t.pin_until == 1500);
    CHECK(t.target_dtn == 3);
    t = schedule_prefetch(p, {}, 3, 100, 950);
    CHECK(t.issue_t == 950);
    CHECK(t.issue_t <= p.predicted_t);
    CHECK(t.pin_until > p.predicted_t);
}

TEST_CASE("run_scenario: empty trace gives zero metrics") {
    for (auto m : all_modes()) {
        auto r = run({}, tiny_catalog(), tiny_net(), m);
        CHECK(r.metrics.requests == 0);
        CHECK(r.metrics.origin_requests == 0);
        CHECK(r.metrics.wan_bytes == 0);
        CHECK(r.metrics.mean_latency_s == 0);
        CHECK(r.flows.empty());
        std::ostringstream os;
        write_metrics_row(os, r.metrics);
        CHECK(os.str() == std::string(to_string(m)) + ",1,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
    }
}

TEST_CASE("run_scenario: one origin fetch, then a local hit") {
    const Trace once{req(1, 10, "u1", {0, C}, Channel::Portal)};
    const Trace twice{req(1, 10, "u1", {0, C}, Channel::Portal), req(2, 100, "u1", {0, C}, Channel::Portal)};
    for (auto m : {Mode::LruOnly, Mode::VirtualGroups, Mode::SmartCache}) {
        auto r = run(once, tiny_catalog(), tiny_net(), m);
        CHECK(r.metrics.origin_requests == 1);
        CHECK(r.records[0].tier == Tier::Origin);
        // Uncontended: path latency + bytes / bottleneck.
        CHECK(r.records[0].latency() == doctest::Approx(0.06 + 3.6e6 / 1e6).epsilon(1e-12));

        r = run(twice, tiny_catalog(), tiny_net(), m);
        CHECK(r.metrics.origin_requests == 1);
        CHECK(r.records[1].tier == Tier::Local);
        CHECK(r.records[1].latency() == 0);
    }
    auto nc = run(twice, tiny_catalog(), tiny_net(), Mode::NoCache);
    CHECK(nc.metrics.origin_requests == 2);
    CHECK(nc.records[1].tier == Tier::Origin);
}

TEST_CASE("run_scenario: concurrent requests share one in-flight transfer") {
    const Trace t{req(1, 10, "u1", {0, C}, Channel::Portal), req(2, 11, "u1", {0, C}, Channel::Portal)};
    auto r = run(t, tiny_catalog(), tiny_net(), Mode::LruOnly);
    CHECK(r.metrics.origin_requests == 1);
    CHECK(r.records[1].tier == Tier::Local);
    CHECK(r.records[1].t_done == r.records[0].t_done);
}

TEST_CASE("run_scenario: group tier via virtual-group placement") {
    // u1 and u2 share interests and sit close together: one group with the
    // group DTN at A. u2 (home B) then finds u1's data at the group DTN.
    Catalog cat({{"x", "i", "r", "ctd", 1000}}, {}, {{"u1", "org", 0, 0, "A"}, {"u2", "org", 0, 0, "B"}});
    const Trace t{req(1, 10, "u1", {0, C}, Channel::Portal), req(2, 100, "u2", {0, C}, Channel::Portal),
                  req(3, 200, "u2", {0, C}, Channel::Portal)};
    ScenarioConfig c;
    c.mode = Mode::VirtualGroups;
    c.k = 1;
    auto r = run_scenario(t, cat, tiny_net(), c);
    REQUIRE(r.placement.groups.size() == 1);
    CHECK(r.placement.groups[0].assigned_dtn == "A");
    CHECK(r.records[1].tier == Tier::Group);
    CHECK(r.records[2].tier == Tier::Local);
    CHECK(r.metrics.origin_requests == 1);

    // lru_only never looks beyond the home DTN.
    c.mode = Mode::LruOnly;
    r = run_scenario(t, cat, tiny_net(), c);
    CHECK(r.records[1].tier == Tier::Origin);
    CHECK(r.metrics.origin_requests == 2);
}

TEST_CASE("smart_cache: prefetch consumed, then wasted when the user stops") {
    // Regular user: t = k*C, window [(k-1)C, kC), k = 1..4.
    Trace t;
    for (int k = 1; k <= 4; ++k) t.push_back(req(k, k * C, "u1", {(k - 1) * C, k * C}));
    auto r = run(t, tiny_catalog(), tiny_net(), Mode::SmartCache);
    // Three sessions are needed before the first prediction.
    CHECK(r.records[0].tier == Tier::Origin);
    CHECK(r.records[1].tier == Tier::Origin);
    CHECK(r.records[2].tier == Tier::Origin);
    CHECK(r.records[3].tier == Tier::Local);
    CHECK(r.records[3].latency() == 0);

    auto pf = flows_of(r, FlowKind::Prefetch);
    REQUIRE(pf.size() == 2);
    // Lead = 1.2 x uncontended transfer estimate ahead of the predicted time.
    const double est = 0.06 + 3.6;
    CHECK(pf[0]->t_start == doctest::Approx(4 * C - 1.2 * est));
    CHECK(pf[1]->t_start == doctest::Approx(5 * C - 1.2 * est));
    CHECK(r.metrics.prefetch_bytes == 2 * 3600000);
    // The second prefetch (chunk 4) is never requested.
    CHECK(r.metrics.wasted_prefetch_bytes == 3600000);
    CHECK(r.metrics.origin_requests == 5);
}

TEST_CASE("smart_cache: streaming pushes at chunk availability") {
    // Real-time monitor: every 60 s from t = C to 4C, latest 120 s of published data.
    Trace t;
    std::int64_t id = 0;
    for (double s = C; s < 4 * C; s += 60) {
        const double L = std::floor(s / C) * C;
        t.push_back(req(++id, s, "u1", {L - 120, L}));
    }
    auto r = run(t, tiny_catalog(), tiny_net(), Mode::SmartCache);
    auto st = flows_of(r, FlowKind::Stream);
    std::vector<double> starts;
    for (auto* f : st) starts.push_back(f->t_start);
    // Pushes continue until no request arrived within 2C (last request at 4C - 60).
    CHECK(starts == std::vector<double>{2 * C, 3 * C, 4 * C, 5 * C});
    CHECK(r.metrics.stream_pushes == 4);
    const auto local = r.metrics.hit_fraction(Tier::Local);
    CHECK(local >= 0.99);
    CHECK(r.metrics.tier_hits[static_cast<int>(Tier::Origin)] == 1);
    // Chunks 3 and 4 were pushed but never requested.
    CHECK(r.metrics.wasted_prefetch_bytes == 2 * 3600000);
    REQUIRE(r.subscriptions.size() == 1);
    CHECK(r.subscriptions[0].user_id == "u1");
    CHECK_FALSE(r.subscriptions[0].active);

    auto lru = run(t, tiny_catalog(), tiny_net(), Mode::LruOnly);
    CHECK(flows_of(lru, FlowKind::Stream).empty());
    CHECK(lru.subscriptions.empty());
}

TEST_CASE("smart_cache: portal requests never trigger prediction") {
    Trace t;
    for (int k = 1; k <= 6; ++k) t.push_back(req(k, k * C, "u1", {(k - 1) * C, k * C}, Channel::Portal));
    auto r = run(t, tiny_catalog(), tiny_net(), Mode::SmartCache);
    CHECK(flows_of(r, FlowKind::Prefetch).empty());
    CHECK(r.metrics.prefetch_bytes == 0);
}

TEST_CASE("run_scenario: validation before simulation") {
    Trace bad{req(1, 0, "ghost", {0, C})};
    CHECK_THROWS_AS(run(bad, tiny_catalog(), tiny_net(), Mode::LruOnly), ValidationError);
    Catalog homeless({{"x", "i", "r", "ctd", 1000}}, {}, {{"u1", "org", 0, 0, "Z"}});
    CHECK_THROWS_AS(run({}, homeless, tiny_net(), Mode::LruOnly), ValidationError);
    CHECK_THROWS_AS(parse_mode("fast"), ConfigError);
    CHECK(parse_mode("virtual_groups") == Mode::VirtualGroups);
}

TEST_CASE("scenario invariants on generated workloads") {
    GeneratorParams gp;
    gp.regular_users = 12;
    gp.overlapping_users = 8;
    gp.realtime_users = 5;
    gp.portal_users = 3;
    gp.orgs = 4;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto w = generate_trace(gp, seed);
        const auto topo = default_topology();
        std::map<Mode, Metrics> m;
        std::map<Mode, Metrics> half;
        for (auto mode : all_modes()) {
            auto r = run(w.trace, w.catalog, topo, mode, seed);
            const auto& x = r.metrics;
            std::uint64_t sum = 0;
            for (auto h : x.tier_hits) sum += h;
            CHECK(sum == w.trace.size());
            std::uint64_t bytes = 0;
            for (const auto& rec : r.records) {
                bytes += rec.bytes;
                CHECK(rec.latency() >= 0);
            }
            if (mode == Mode::NoCache) CHECK(x.origin_bytes == bytes);
            CHECK(x.wasted_prefetch_bytes <= x.prefetch_bytes);
            m[mode] = x;
            half[mode] = run(w.trace, w.catalog, topo.with_bandwidth_scale(0.5), mode, seed).metrics;

            auto again = run(w.trace, w.catalog, topo, mode, seed);
            std::ostringstream a, b;
            write_latencies_csv(a, r);
            write_latencies_csv(b, again);
            CHECK(a.str() == b.str());
        }
        for (auto mode : all_modes()) CHECK(m[Mode::NoCache].wan_bytes >= m[mode].wan_bytes);
        CHECK(m[Mode::SmartCache].origin_requests <= m[Mode::LruOnly].origin_requests);
        CHECK(m[Mode::LruOnly].origin_requests <= m[Mode::NoCache].origin_requests);
        CHECK(m[Mode::SmartCache].mean_latency_s <= m[Mode::NoCache].mean_latency_s);
        CHECK(m[Mode::SmartCache].hit_fraction(Tier::Local) >= m[Mode::VirtualGroups].hit_fraction(Tier::Local));
        CHECK(m[Mode::VirtualGroups].hit_fraction(Tier::Local) >= m[Mode::LruOnly].hit_fraction(Tier::Local));
        const double rs = half[Mode::SmartCache].mean_latency_s / m[Mode::SmartCache].mean_latency_s;
        const double rn = half[Mode::NoCache].mean_latency_s / m[Mode::NoCache].mean_latency_s;
        CHECK(rs < rn);
    }
}

TEST_CASE("capacity options") {
    GeneratorParams gp;
    gp.regular_users = 6;
    gp.overlapping_users = 4;
    gp.realtime_users = 3;
    gp.portal_users = 1;
    gp.orgs = 2;
    auto w = generate_trace(gp, 9);
    const auto ws = working_set_bytes(w.trace, w.catalog, C);
    CHECK(ws > 0);
    ScenarioConfig c;
    c.capacity_fraction = 0.05;
    auto r = run_scenario(w.trace, w.catalog, default_topology(), c);
    CHECK(r.metrics.capacity_bytes == static_cast<std::uint64_t>(std::llround(0.05 * static_cast<double>(ws))));
    c.capacity_bytes = 12345;
    r = run_scenario(w.trace, w.catalog, default_topology(), c);
    CHECK(r.metrics.capacity_bytes == 12345);
    c.infinite_capacity = true;
    r = run_scenario(w.trace, w.catalog, default_topology(), c);
    CHECK(r.metrics.capacity_bytes > ws);
    c.capacity_fraction = -1;
    c.infinite_capacity = false;
    c.capacity_bytes.reset();
    CHECK_THROWS_AS(run_scenario(w.trace, w.catalog, default_topology(), c), ConfigError);
}
