#include <algorithm>
#include <map>
#include <set>

#include "lfsim/workload.hpp"

namespace lfsim {

namespace {

double modal_share(const std::map<std::string, std::size_t>& counts, std::size_t total) {
    std::size_t best = 0;
    for (const auto& [_, c] : counts) best = std::max(best, c);
    return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
}

}  // namespace

AffinityReport affinity_stats(const Trace& trace, const Catalog& catalog) {
    AffinityReport report;
    if (trace.empty()) return report;

    struct Acc {
        std::size_t n = 0;
        std::map<std::string, std::size_t> regions;
        std::map<std::string, std::size_t> kinds;
        std::set<std::string> objects;
    };
    std::map<std::string, Acc> per_user;
    std::size_t api = 0;
    for (const auto& q : trace) {
        const auto& obj = catalog.object(q.object_id);
        auto& a = per_user[q.user_id];
        ++a.n;
        ++a.regions[obj.region_id];
        ++a.kinds[obj.data_kind];
        a.objects.insert(q.object_id);
        if (q.channel == Channel::Api) ++api;
    }

    // object -> orgs -> number of members who queried it
    std::map<std::string, std::map<std::string, std::size_t>> org_object_users;
    auto org_of = [&](const std::string& user) -> std::string {
        auto idx = catalog.user_index(user);
        return idx ? catalog.users()[*idx].org_id : std::string("?") + user;
    };
    for (const auto& [user, a] : per_user) {
        const auto org = org_of(user);
        for (const auto& o : a.objects) ++org_object_users[o][org];
    }

    for (const auto& [user, a] : per_user) {
        UserAffinity u;
        u.user_id = user;
        u.requests = a.n;
        u.modal_region_share = modal_share(a.regions, a.n);
        u.modal_kind_share = modal_share(a.kinds, a.n);
        const auto org = org_of(user);
        std::size_t shared = 0;
        for (const auto& o : a.objects)
            if (org_object_users[o][org] > 1) ++shared;
        u.org_overlap = a.objects.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(a.objects.size());
        report.users.push_back(std::move(u));
    }

    const double n = static_cast<double>(report.users.size());
    for (const auto& u : report.users) {
        report.mean_modal_region_share += u.modal_region_share / n;
        report.mean_modal_kind_share += u.modal_kind_share / n;
        report.mean_org_overlap += u.org_overlap / n;
    }
    report.api_request_share = static_cast<double>(api) / static_cast<double>(trace.size());
    return report;
}

}  // namespace lfsim
