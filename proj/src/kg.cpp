#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "csv.hpp"
#include "lfsim/ckat.hpp"
#include "lfsim/random.hpp"

namespace lfsim {

std::string_view to_string(Source s) {
    switch (s) {
        case Source::Locality: return "locality";
        case Source::DomainModel: return "domain_model";
        case Source::UserAssociation: return "user_association";
        case Source::Interactions: return "interactions";
        case Source::Noise: return "noise";
    }
    return "interactions";
}

Source parse_source(std::string_view s) {
    for (auto x : {Source::Locality, Source::DomainModel, Source::UserAssociation, Source::Interactions, Source::Noise})
        if (to_string(x) == s) return x;
    throw ConfigError("unknown knowledge source '" + std::string(s) + "'");
}

std::string canonical_id(std::string_view type, std::string_view id) {
    std::string out(type);
    out += ':';
    out += csv::trim(id);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

UserItems user_items(const Trace& trace) {
    UserItems out;
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& q : trace)
        if (seen[q.user_id].insert(q.object_id).second) out[q.user_id].push_back(q.object_id);
    return out;
}

namespace {

void finish(SourceKG& kg) {
    std::sort(kg.triples.begin(), kg.triples.end());
    kg.triples.erase(std::unique(kg.triples.begin(), kg.triples.end()), kg.triples.end());
}

}  // namespace

SourceKGs build_source_kgs(const Catalog& catalog, const UserItems& interactions) {
    SourceKGs out;
    auto& loc = out[Source::Locality];
    loc.source = Source::Locality;
    auto& dom = out[Source::DomainModel];
    dom.source = Source::DomainModel;
    auto& assoc = out[Source::UserAssociation];
    assoc.source = Source::UserAssociation;
    auto& inter = out[Source::Interactions];
    inter.source = Source::Interactions;

    for (const auto& o : catalog.objects()) {
        const auto item = canonical_id("item", o.object_id);
        loc.triples.push_back({item, "located_in", canonical_id("region", o.region_id)});
        loc.triples.push_back({item, "mounted_on", canonical_id("instrument", o.instrument_id)});
        dom.triples.push_back({item, "has_kind", canonical_id("kind", o.data_kind)});
    }
    for (const auto& r : catalog.recipes())
        for (const auto& in : r.input_kinds)
            dom.triples.push_back({canonical_id("kind", in), "derives", canonical_id("kind", r.product_kind)});
    for (const auto& u : catalog.users())
        assoc.triples.push_back({canonical_id("user", u.user_id), "member_of", canonical_id("org", u.org_id)});
    for (const auto& [user, items] : interactions)
        for (const auto& i : items) inter.triples.push_back({canonical_id("user", user), "interact", canonical_id("item", i)});
    for (auto& [_, kg] : out) finish(kg);
    return out;
}

SourceKGs build_source_kgs(const Catalog& catalog, const Trace& trace) {
    return build_source_kgs(catalog, user_items(trace));
}

SourceKG inject_noise(const std::vector<std::string>& entities, std::size_t m, std::uint64_t seed) {
    SourceKG kg;
    kg.source = Source::Noise;
    const auto n = entities.size();
    if (m == 0) return kg;
    if (n < 2 || m > n * (n - 1)) throw ConfigError("cannot draw " + std::to_string(m) + " distinct noise triples");
    Rng rng(seed);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    while (pairs.size() < m) {
        const auto a = rng.index(n);
        const auto b = rng.index(n);
        if (a != b) pairs.insert({a, b});
    }
    for (const auto& [a, b] : pairs) kg.triples.push_back({entities[a], "noise", entities[b]});
    finish(kg);
    return kg;
}

std::optional<std::size_t> CKG::entity(std::string_view canonical) const {
    auto it = entity_index_.find(std::string(canonical));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> CKG::relation(std::string_view name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i)
        if (relations_[i] == name) return i;
    return std::nullopt;
}

bool CKG::has_triple(std::size_t h, std::size_t r, std::size_t t) const { return triple_set_.contains({h, r, t}); }

CKG build_ckg(const SourceKGs& sources, const std::set<Source>& selection) {
    std::set<Source> chosen = selection;
    chosen.insert(Source::Interactions);
    std::vector<const SourceKG*> parts;
    for (auto s : chosen) {
        auto it = sources.find(s);
        if (it == sources.end()) throw ValidationError("knowledge source '" + std::string(to_string(s)) + "' is not available");
        parts.push_back(&it->second);
    }
    if (sources.at(Source::Interactions).triples.empty()) throw ValidationError("no user-item interactions");

    CKG g;
    g.sources_ = chosen;
    std::set<std::string> ents, rels;
    for (const auto* p : parts)
        for (const auto& t : p->triples) {
            ents.insert(t.head);
            ents.insert(t.tail);
            rels.insert(t.relation);
        }
    g.entities_.assign(ents.begin(), ents.end());
    for (std::size_t i = 0; i < g.entities_.size(); ++i) g.entity_index_.emplace(g.entities_[i], i);
    for (const auto& r : rels) {
        g.relations_.push_back(r);
        g.relations_.push_back(r + "_inv");
    }
    auto rel_index = [&](const std::string& r) {
        return 2 * static_cast<std::size_t>(std::distance(rels.begin(), rels.find(r)));
    };

    g.adjacency_.resize(g.entities_.size());
    for (const auto* p : parts) {
        for (const auto& t : p->triples) {
            const auto h = g.entity_index_.at(t.head);
            const auto tl = g.entity_index_.at(t.tail);
            const auto r = rel_index(t.relation);
            for (const Triple& e : {Triple{h, r, tl}, Triple{tl, r + 1, h}}) {
                if (!g.triple_set_.insert({e.h, e.r, e.t}).second) continue;
                g.triples_.push_back(e);
                g.adjacency_[e.h].push_back({e.r, e.t});
            }
            if (t.relation == "interact") g.interactions_[h].push_back(tl);
        }
    }
    for (auto& adj : g.adjacency_)
        std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) {
            return a.r != b.r ? a.r < b.r : a.t < b.t;
        });
    for (auto& [_, items] : g.interactions_) std::sort(items.begin(), items.end());
    for (std::size_t i = 0; i < g.entities_.size(); ++i) {
        if (g.entities_[i].starts_with("user:")) g.users_.push_back(i);
        if (g.entities_[i].starts_with("item:")) g.items_.push_back(i);
    }
    return g;
}

HoldoutSplit holdout_split(const UserItems& items, double fraction) {
    if (!(fraction >= 0 && fraction < 1)) throw ConfigError("holdout fraction must be in [0, 1)");
    HoldoutSplit s;
    for (const auto& [user, list] : items) {
        const auto n = list.size();
        if (n < 2) {
            s.train[user] = list;
            continue;
        }
        const auto held = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
        s.train[user].assign(list.begin(), list.end() - static_cast<std::ptrdiff_t>(held));
        s.test[user].assign(list.end() - static_cast<std::ptrdiff_t>(held), list.end());
    }
    return s;
}

Workload planted_rec_dataset(const RecDatasetParams& p, std::uint64_t seed) {
    static const std::vector<std::string> kKinds{"adcp", "ctd", "conductivity", "temperature", "depth",
                                                 "oxygen", "pressure", "salinity", "density", "fluorescence"};
    if (p.users <= 0 || p.regions <= 0 || p.instruments_per_region <= 0 || p.kinds_per_instrument <= 0 || p.orgs <= 0)
        throw ConfigError("planted dataset needs positive users, regions, instruments, kinds and orgs");
    if (p.interactions_min < 1 || p.interactions_max < p.interactions_min)
        throw ConfigError("invalid interaction count range");
    const int kinds = std::min<int>(p.kinds_per_instrument, static_cast<int>(kKinds.size()));

    auto two = [](int v) {
        std::string s = std::to_string(v);
        return s.size() < 2 ? "0" + s : s;
    };
    std::vector<DataObject> objects;
    std::vector<std::vector<std::size_t>> by_region(static_cast<std::size_t>(p.regions));
    for (int r = 0; r < p.regions; ++r)
        for (int i = 0; i < p.instruments_per_region; ++i)
            for (int k = 0; k < kinds; ++k) {
                const auto& kind = kKinds[static_cast<std::size_t>((i * kinds + k) % static_cast<int>(kKinds.size()))];
                const auto region = "site" + two(r);
                by_region[static_cast<std::size_t>(r)].push_back(objects.size());
                objects.push_back({region + "-ins" + two(i) + "-" + kind, region + "-ins" + two(i), region, kind, 1000});
            }

    std::set<std::string> present;
    for (const auto& o : objects) present.insert(o.data_kind);
    std::vector<DerivationRecipe> recipes;
    const std::vector<std::string> ctd_inputs{"conductivity", "depth", "temperature"};
    if (std::all_of(ctd_inputs.begin(), ctd_inputs.end(), [&](const auto& k) { return present.contains(k); }))
        for (const auto* product : {"density", "salinity"})
            if (present.contains(product)) recipes.push_back({product, ctd_inputs});

    Rng rng(seed);
    std::vector<UserProfile> users;
    Trace trace;
    std::int64_t id = 0;
    for (int u = 0; u < p.users; ++u) {
        const int org = u % p.orgs;
        const auto focus = static_cast<std::size_t>(org % p.regions);
        const auto uid = "u" + std::string(4 - std::min<std::size_t>(4, std::to_string(u).size()), '0') + std::to_string(u);
        users.push_back({uid, "org" + two(org), static_cast<double>(org), 0.0, "dtn1"});
        const auto n = static_cast<std::size_t>(rng.uniform_int(p.interactions_min, p.interactions_max));
        std::set<std::size_t> chosen;
        std::size_t guard = 0;
        while (chosen.size() < std::min(n, objects.size()) && guard++ < 100000) {
            const auto& local = by_region[focus];
            std::size_t pick;
            if (rng.uniform() < p.locality) {
                pick = local[rng.index(local.size())];
            } else {
                pick = rng.index(objects.size());
            }
            if (!chosen.insert(pick).second) continue;
            const double t = static_cast<double>(chosen.size()) * 3600.0 + static_cast<double>(u);
            trace.push_back({++id, t, uid, objects[pick].object_id, {0.0, 3600.0}, Channel::Api});
        }
    }
    std::stable_sort(trace.begin(), trace.end(), [](const Request& a, const Request& b) { return a.t_arrive < b.t_arrive; });
    for (std::size_t i = 0; i < trace.size(); ++i) trace[i].req_id = static_cast<std::int64_t>(i + 1);

    Workload w;
    w.catalog = Catalog(std::move(objects), std::move(recipes), std::move(users));
    w.trace = std::move(trace);
    return w;
}

}  // namespace lfsim
