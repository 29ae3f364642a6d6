#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "lfsim/random.hpp"
#include "lfsim/workload.hpp"

namespace lfsim {

namespace {

const std::vector<std::string> kKinds{"ctd",     "adcp",     "conductivity", "temperature", "depth",
                                      "oxygen",  "pressure", "salinity",     "density",     "fluorescence"};

std::string pad(int v, int width) {
    auto s = std::to_string(v);
    if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
    return s;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.index(v.size())];
}

struct Builder {
    const GeneratorParams& p;
    Rng rng;
    std::vector<DataObject> objects;
    std::vector<std::string> region_ids;
    std::map<std::string, std::vector<std::size_t>> objects_by_region;
    std::vector<UserProfile> users;
    GroundTruth truth;
    std::vector<Request> requests;  // unsorted, req_id = generation order

    Builder(const GeneratorParams& params, std::uint64_t seed) : p(params), rng(seed) {}

    void make_catalog() {
        const int kinds = std::min<int>(p.kinds_per_instrument, static_cast<int>(kKinds.size()));
        for (int r = 0; r < p.regions; ++r) {
            const auto region = "reg" + pad(r + 1, 2);
            region_ids.push_back(region);
            for (int i = 0; i < p.instruments_per_region; ++i) {
                const auto instrument = region + "-ins" + pad(i + 1, 2);
                const auto offset = static_cast<std::size_t>(i * kinds + r);
                for (int k = 0; k < kinds; ++k) {
                    const auto& kind = kKinds[(offset + static_cast<std::size_t>(k)) % kKinds.size()];
                    objects_by_region[region].push_back(objects.size());
                    objects.push_back({instrument + "-" + kind, instrument, region, kind,
                                       rng.uniform_int(p.rate_min, p.rate_max)});
                }
            }
        }
    }

    std::vector<std::string> choose_objects(int m, const std::string& focus,
                                            const std::vector<std::string>& pool) {
        std::vector<std::string> chosen;
        auto taken = [&](const std::string& id) { return std::find(chosen.begin(), chosen.end(), id) != chosen.end(); };

        if (!pool.empty() && p.reuse_fraction > 0) {
            const auto want = std::min<std::size_t>(
                static_cast<std::size_t>(std::ceil(p.reuse_fraction * m - 1e-9)), pool.size());
            auto shuffled = pool;
            rng.shuffle(shuffled);
            for (std::size_t i = 0; i < want; ++i) chosen.push_back(shuffled[i]);
        }
        const int rest = m - static_cast<int>(chosen.size());
        const double target = p.locality_bias * rest;
        int n_focus = static_cast<int>(std::floor(target));
        if (rng.uniform() < target - n_focus) ++n_focus;

        const auto& local = objects_by_region[focus];
        for (int added = 0, guard = 0; added < n_focus && guard < 1000; ++guard) {
            const auto& id = objects[local[rng.index(local.size())]].object_id;
            if (taken(id)) continue;
            chosen.push_back(id);
            ++added;
        }
        std::vector<std::string> others;
        for (const auto& r : region_ids)
            if (r != focus) others.push_back(r);
        rng.shuffle(others);
        for (std::size_t next = 0, guard = 0; static_cast<int>(chosen.size()) < m && guard < 1000; ++guard) {
            const auto& region = others.empty() ? focus : others[next++ % others.size()];
            const auto& list = objects_by_region[region];
            const auto& id = objects[list[rng.index(list.size())]].object_id;
            if (!taken(id)) chosen.push_back(id);
        }
        return chosen;
    }

    void emit(const UserProfile& u, const std::vector<std::string>& objs, double t, const Window& w,
              Channel channel = Channel::Api) {
        for (const auto& o : objs) {
            Request q;
            q.req_id = static_cast<std::int64_t>(requests.size());
            q.t_arrive = t;
            q.user_id = u.user_id;
            q.object_id = o;
            q.window = w;
            q.channel = channel;
            requests.push_back(std::move(q));
        }
    }

    double jittered(double nominal, double period) {
        if (p.jitter <= 0) return nominal;
        const double j = (2.0 * rng.uniform() - 1.0) * p.jitter * period;
        return std::max(0.0, std::round(nominal + j));
    }

    void make_program_requests(const UserProfile& u, UserTruth& t) {
        const double D = p.duration_s;
        if (t.kind == PatternKind::RealTime) {
            const double C = p.chunk_s;
            const double phase = std::floor(rng.uniform() * t.period_s);
            for (int k = 0;; ++k) {
                const double nominal = C + k * t.period_s + phase;
                if (nominal >= D) break;
                const double at = jittered(nominal, t.period_s);
                const double latest = std::floor(at / C) * C;
                emit(u, t.objects, at, {latest - t.window_s, latest});
            }
            return;
        }
        const double phase = std::floor(rng.uniform() * t.period_s / 60.0) * 60.0;
        for (int k = 0;; ++k) {
            const double start = k * t.period_s;
            if (start + t.window_s > D - t.period_s) break;
            const double nominal = start + t.window_s + phase;
            emit(u, t.objects, jittered(nominal, t.period_s), {start, start + t.window_s});
        }
    }

    void make_portal_requests(const UserProfile& u, UserTruth& t) {
        const double C = p.chunk_s;
        for (int i = 0; i < p.portal_requests_per_user; ++i) {
            const double at = std::floor(rng.uniform() * p.duration_s);
            const double len = static_cast<double>(rng.uniform_int(1, 24)) * 3600.0;
            const double end = std::max(C, std::floor(at / C) * C);
            const auto& obj = pick(rng, t.objects);
            emit(u, {obj}, at, {std::max(0.0, end - len), end}, Channel::Portal);
        }
    }

    void make_users() {
        const int n_dtn = static_cast<int>(p.dtns.size());
        std::vector<std::pair<double, double>> org_center;
        std::vector<std::string> org_focus;
        std::vector<std::string> org_home;
        for (int o = 0; o < p.orgs; ++o) {
            const int d = o % n_dtn;
            const double angle = 2.0 * std::numbers::pi * d / n_dtn;
            org_center.emplace_back(50 + 40 * std::cos(angle) + rng.uniform(-5, 5),
                                    50 + 40 * std::sin(angle) + rng.uniform(-5, 5));
            org_focus.push_back(pick(rng, region_ids));
            org_home.push_back(p.dtns[static_cast<std::size_t>(d)]);
        }

        struct Slot {
            PatternKind kind;
            bool portal;
        };
        std::vector<Slot> slots;
        for (int i = 0; i < p.regular_users; ++i) slots.push_back({PatternKind::Regular, false});
        for (int i = 0; i < p.overlapping_users; ++i) slots.push_back({PatternKind::Overlapping, false});
        for (int i = 0; i < p.realtime_users; ++i) slots.push_back({PatternKind::RealTime, false});
        for (int i = 0; i < p.portal_users; ++i) slots.push_back({PatternKind::Unknown, true});

        const int width = std::max(4, static_cast<int>(std::to_string(slots.size()).size()));
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const int o = static_cast<int>(rng.index(static_cast<std::size_t>(p.orgs)));
            const auto org_id = "org" + pad(o + 1, 2);
            UserProfile u{"u" + pad(static_cast<int>(i) + 1, width), org_id,
                          org_center[o].first + rng.uniform(-2, 2), org_center[o].second + rng.uniform(-2, 2),
                          org_home[o]};

            UserTruth t;
            t.user_id = u.user_id;
            t.kind = slots[i].kind;
            t.portal = slots[i].portal;
            t.org_id = org_id;
            t.focus_region = org_focus[o];
            switch (t.kind) {
                case PatternKind::Regular:
                    t.period_s = pick(rng, p.regular_periods);
                    t.window_s = t.period_s;
                    break;
                case PatternKind::Overlapping:
                    t.period_s = pick(rng, p.overlapping_periods);
                    t.overlap_s = std::round(pick(rng, p.overlap_fractions) * t.period_s);
                    t.window_s = t.period_s + t.overlap_s;
                    break;
                case PatternKind::RealTime:
                    t.period_s = pick(rng, p.realtime_periods);
                    t.window_s = pick(rng, p.realtime_windows);
                    t.overlap_s = t.window_s;
                    break;
                case PatternKind::Unknown: break;
            }
            const int max_objects = t.kind == PatternKind::RealTime
                                        ? std::max(p.objects_per_user_min, p.realtime_objects_max)
                                        : p.objects_per_user_max;
            const int m = static_cast<int>(rng.uniform_int(p.objects_per_user_min, max_objects));
            auto& pool = truth.org_pools[org_id];
            t.objects = choose_objects(m, t.focus_region, pool);
            for (const auto& obj : t.objects)
                if (std::find(pool.begin(), pool.end(), obj) == pool.end()) pool.push_back(obj);

            if (t.portal) {
                make_portal_requests(u, t);
            } else {
                make_program_requests(u, t);
            }
            users.push_back(std::move(u));
            truth.users.push_back(std::move(t));
        }
    }
};

}  // namespace

const UserTruth* GroundTruth::find(std::string_view user_id) const {
    for (const auto& u : users)
        if (u.user_id == user_id) return &u;
    return nullptr;
}

Workload generate_trace(const GeneratorParams& params, std::uint64_t seed) {
    const int program = params.regular_users + params.overlapping_users + params.realtime_users;
    if (program + params.portal_users <= 0) throw ConfigError("generator needs at least one user");
    if (params.regions <= 0 || params.instruments_per_region <= 0 || params.kinds_per_instrument <= 0)
        throw ConfigError("generator needs at least one object");
    if (params.orgs <= 0) throw ConfigError("generator needs at least one organization");
    if (params.dtns.empty()) throw ConfigError("generator needs at least one DTN");
    if (params.objects_per_user_min < 1 || params.objects_per_user_max < params.objects_per_user_min)
        throw ConfigError("invalid objects-per-user range");
    if (params.rate_min <= 0 || params.rate_max < params.rate_min) throw ConfigError("invalid rate range");
    if (params.chunk_s <= 0 || params.duration_s <= 0) throw ConfigError("duration and chunk must be positive");
    if (params.jitter < 0 || params.jitter >= 0.5) throw ConfigError("jitter must be in [0, 0.5)");
    auto non_empty = [](const std::vector<double>& v) { return !v.empty() && *std::min_element(v.begin(), v.end()) > 0; };
    if ((params.regular_users > 0 && !non_empty(params.regular_periods)) ||
        (params.overlapping_users > 0 && (!non_empty(params.overlapping_periods) || !non_empty(params.overlap_fractions))) ||
        (params.realtime_users > 0 && (!non_empty(params.realtime_periods) || !non_empty(params.realtime_windows))))
        throw ConfigError("empty or non-positive period/window distribution");
    for (double w : params.realtime_windows)
        if (params.realtime_users > 0 && w > params.chunk_s) throw ConfigError("realtime window exceeds chunk duration");

    Builder b(params, seed);
    b.make_catalog();
    b.make_users();

    std::stable_sort(b.requests.begin(), b.requests.end(),
                     [](const Request& x, const Request& y) { return x.t_arrive < y.t_arrive; });
    for (std::size_t i = 0; i < b.requests.size(); ++i) b.requests[i].req_id = static_cast<std::int64_t>(i) + 1;

    std::vector<DerivationRecipe> recipes;
    std::set<std::string> kinds;
    for (const auto& o : b.objects) kinds.insert(o.data_kind);
    const std::vector<std::string> ctd_inputs{"conductivity", "depth", "temperature"};
    if (std::all_of(ctd_inputs.begin(), ctd_inputs.end(), [&](const auto& k) { return kinds.contains(k); })) {
        for (const auto* product : {"density", "salinity"})
            if (kinds.contains(product)) recipes.push_back({product, ctd_inputs});
    }

    b.truth.locality_bias = params.locality_bias;
    b.truth.reuse_fraction = params.reuse_fraction;
    Workload w{Catalog(std::move(b.objects), std::move(recipes), std::move(b.users)), std::move(b.requests),
               std::move(b.truth)};
    return w;
}

std::string ground_truth_json(const GroundTruth& truth) {
    nlohmann::ordered_json j;
    j["locality_bias"] = truth.locality_bias;
    j["reuse_fraction"] = truth.reuse_fraction;
    auto& users = j["users"] = nlohmann::ordered_json::array();
    for (const auto& u : truth.users) {
        nlohmann::ordered_json e;
        e["user_id"] = u.user_id;
        e["kind"] = u.portal ? std::string("portal") : std::string(to_string(u.kind));
        e["period_s"] = u.period_s;
        e["window_s"] = u.window_s;
        e["overlap_s"] = u.overlap_s;
        e["org_id"] = u.org_id;
        e["focus_region"] = u.focus_region;
        e["objects"] = u.objects;
        users.push_back(std::move(e));
    }
    auto& orgs = j["org_pools"] = nlohmann::ordered_json::object();
    for (const auto& [org, pool] : truth.org_pools) orgs[org] = pool;
    return j.dump(2) + "\n";
}

}  // namespace lfsim
