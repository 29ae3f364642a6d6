#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include <json.hpp>

#include "lfsim/cachenet.hpp"
#include "lfsim/random.hpp"

namespace lfsim {

namespace {

std::vector<std::size_t> assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c) {
    std::vector<std::size_t> a(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < c.rows(); ++j) {
            const double d = (x.row(i) - c.row(j)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        a[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return a;
}

double wcss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, const std::vector<std::size_t>& a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        s += (x.row(i) - c.row(static_cast<Eigen::Index>(a[static_cast<std::size_t>(i)]))).squaredNorm();
    return s;
}

// One k-means++ seeding followed by Lloyd iterations.
KMeansResult lloyd(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
    const auto n = static_cast<std::size_t>(points.rows());
    Rng rng(seed);
    const auto K = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd c(K, points.cols());

    // k-means++ seeding
    c.row(0) = points.row(static_cast<Eigen::Index>(rng.index(n)));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index j = 1; j < K; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - c.row(j - 1)).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0) {
            double r = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                if (d2[pick] > 0 && r < d2[pick]) break;
                r -= d2[pick];
            }
            while (d2[pick] == 0 && pick > 0) --pick;
        } else {
            pick = rng.index(n);
        }
        c.row(j) = points.row(static_cast<Eigen::Index>(pick));
    }

    KMeansResult out;
    out.assignment = assign(points, c);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // update step
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(K, points.cols());
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum.row(static_cast<Eigen::Index>(out.assignment[i])) += points.row(static_cast<Eigen::Index>(i));
            ++count[out.assignment[i]];
        }
        for (std::size_t j = 0; j < k; ++j)
            if (count[j] > 0) c.row(static_cast<Eigen::Index>(j)) = sum.row(static_cast<Eigen::Index>(j)) / static_cast<double>(count[j]);

        // empty clusters take the point farthest from its centroid
        for (std::size_t j = 0; j < k; ++j) {
            if (count[j] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[out.assignment[i]] <= 1) continue;
                const double d = (points.row(static_cast<Eigen::Index>(i)) -
                                  c.row(static_cast<Eigen::Index>(out.assignment[i])))
                                     .squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            --count[out.assignment[far]];
            out.assignment[far] = j;
            count[j] = 1;
            c.row(static_cast<Eigen::Index>(j)) = points.row(static_cast<Eigen::Index>(far));
        }
        out.wcss_history.push_back(wcss(points, c, out.assignment));
        ++out.iterations;

        auto next = assign(points, c);
        if (next == out.assignment) {
            out.converged = true;
            break;
        }
        out.assignment = std::move(next);
    }
    out.centroids = std::move(c);
    return out;
}

}  // namespace

KMeansResult kmeans_users(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                          std::size_t restarts) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k < 1) throw ConfigError("k must be at least 1");
    if (k > n) throw ConfigError("k = " + std::to_string(k) + " exceeds the number of users (" + std::to_string(n) + ")");
    if (restarts < 1) throw ConfigError("k-means needs at least one restart");

    // Restart r seeds its own stream; r = 0 uses `seed` itself. Ties keep the earlier run.
    KMeansResult best = lloyd(points, k, seed, max_iter);
    for (std::size_t r = 1; r < restarts; ++r) {
        auto run = lloyd(points, k, derive_seed(seed, r), max_iter);
        if (run.wcss() < best.wcss()) best = std::move(run);
    }
    return best;
}

Eigen::MatrixXd user_features(const Catalog& catalog, const Trace& trace, const FeatureWeights& w) {
    const auto& users = catalog.users();
    std::set<std::pair<std::string, std::string>> dims_set;
    for (const auto& o : catalog.objects()) dims_set.insert({o.region_id, o.data_kind});
    std::vector<std::pair<std::string, std::string>> dims(dims_set.begin(), dims_set.end());
    auto dim_of = [&](const DataObject& o) {
        return static_cast<Eigen::Index>(std::lower_bound(dims.begin(), dims.end(), std::make_pair(o.region_id, o.data_kind)) -
                                         dims.begin());
    };

    const auto n = static_cast<Eigen::Index>(users.size());
    const auto h = static_cast<Eigen::Index>(dims.size());
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, 2 + h);
    for (Eigen::Index i = 0; i < n; ++i) {
        f(i, 0) = users[static_cast<std::size_t>(i)].x;
        f(i, 1) = users[static_cast<std::size_t>(i)].y;
    }
    std::vector<double> totals(static_cast<std::size_t>(n), 0.0);
    for (const auto& q : trace) {
        auto u = catalog.user_index(q.user_id);
        auto o = catalog.object_index(q.object_id);
        if (!u || !o) continue;
        f(static_cast<Eigen::Index>(*u), 2 + dim_of(catalog.objects()[*o])) += 1.0;
        totals[*u] += 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (totals[static_cast<std::size_t>(i)] > 0) f.block(i, 2, 1, h) /= totals[static_cast<std::size_t>(i)];

    for (Eigen::Index j = 0; j < f.cols(); ++j) {
        if (n == 0) break;
        const double lo = f.col(j).minCoeff();
        const double hi = f.col(j).maxCoeff();
        if (hi > lo) {
            f.col(j) = (f.col(j).array() - lo) / (hi - lo);
        } else {
            f.col(j).setZero();
        }
        f.col(j) *= j < 2 ? w.coord : w.interest;
    }
    return f;
}

NodeIndex assign_group_dtn(const std::vector<NodeIndex>& member_homes, const Topology& topo, const RouteTable& routes,
                           double reference_bytes) {
    const auto candidates = topo.dtns();
    if (candidates.empty()) throw ConfigError("topology has no DTN with storage");
    if (member_homes.empty()) throw ValidationError("virtual group has no members");
    std::optional<NodeIndex> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (auto c : candidates) {  // sorted by id, so strict < keeps the smallest id on ties
        double cost = 0.0;
        for (auto h : member_homes) cost += routes.get(c, h).transfer_time(reference_bytes);
        if (cost < best_cost) {
            best_cost = cost;
            best = c;
        }
    }
    return *best;
}

PlacementPlan plan_virtual_groups(const Catalog& catalog, const Trace& trace, const Topology& topo,
                                  const PlacementConfig& config) {
    PlacementPlan plan;
    if (catalog.users().empty()) return plan;
    const auto features = user_features(catalog, trace, config.weights);
    std::size_t k = config.k == 0 ? topo.dtns().size() : config.k;
    k = std::min<std::size_t>(k, catalog.users().size());
    const auto km = kmeans_users(features, k, config.seed, config.max_iter);
    plan.wcss_history = km.wcss_history;

    RouteTable routes(topo);
    plan.groups.resize(k);
    std::vector<std::vector<NodeIndex>> homes(k);
    for (std::size_t i = 0; i < catalog.users().size(); ++i) {
        const auto& u = catalog.users()[i];
        const auto g = km.assignment[i];
        plan.groups[g].members.push_back(u.user_id);
        plan.user_group[u.user_id] = g;
        homes[g].push_back(topo.index(u.home_dtn));
    }
    for (std::size_t g = 0; g < k; ++g) {
        auto& vg = plan.groups[g];
        vg.group_id = g;
        const auto row = km.centroids.row(static_cast<Eigen::Index>(g));
        vg.centroid.resize(static_cast<std::size_t>(row.size()));
        for (Eigen::Index j = 0; j < row.size(); ++j) vg.centroid[static_cast<std::size_t>(j)] = row(j);
        if (!vg.members.empty())
            vg.assigned_dtn = topo.node(assign_group_dtn(homes[g], topo, routes, config.reference_bytes)).id;
    }
    return plan;
}

std::string placement_json(const PlacementPlan& plan) {
    nlohmann::ordered_json j;
    auto& groups = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : plan.groups) {
        nlohmann::ordered_json e;
        e["group_id"] = g.group_id;
        e["assigned_dtn"] = g.assigned_dtn;
        e["members"] = g.members;
        e["centroid"] = g.centroid;
        groups.push_back(std::move(e));
    }
    j["assignments"] = plan.user_group;
    j["wcss_history"] = plan.wcss_history;
    return j.dump(2) + "\n";
}

}  // namespace lfsim
