#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "lfsim/workload.hpp"

namespace lfsim {

std::string_view to_string(Channel c) { return c == Channel::Api ? "api" : "portal"; }

Channel parse_channel(std::string_view s) {
    if (s == "api") return Channel::Api;
    if (s == "portal") return Channel::Portal;
    throw ValidationError("unknown channel '" + std::string(s) + "'");
}

Catalog::Catalog(std::vector<DataObject> objects, std::vector<DerivationRecipe> recipes,
                 std::vector<UserProfile> users)
    : objects_(std::move(objects)), recipes_(std::move(recipes)), users_(std::move(users)) {
    for (std::size_t i = 0; i < objects_.size(); ++i) object_by_id_.emplace(objects_[i].object_id, i);
    for (std::size_t i = 0; i < users_.size(); ++i) user_by_id_.emplace(users_[i].user_id, i);
}

std::optional<std::size_t> Catalog::object_index(std::string_view object_id) const {
    auto it = object_by_id_.find(std::string(object_id));
    if (it == object_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Catalog::user_index(std::string_view user_id) const {
    auto it = user_by_id_.find(std::string(user_id));
    if (it == user_by_id_.end()) return std::nullopt;
    return it->second;
}

const DataObject& Catalog::object(std::string_view object_id) const {
    auto idx = object_index(object_id);
    if (!idx) throw NotFoundError("unknown object '" + std::string(object_id) + "'");
    return objects_[*idx];
}

const UserProfile& Catalog::user(std::string_view user_id) const {
    auto idx = user_index(user_id);
    if (!idx) throw NotFoundError("unknown user '" + std::string(user_id) + "'");
    return users_[*idx];
}

void Catalog::validate(const std::set<std::string>* known_nodes) const {
    if (object_by_id_.size() != objects_.size()) {
        std::set<std::string> seen;
        for (const auto& o : objects_)
            if (!seen.insert(o.object_id).second) throw ValidationError("duplicate object_id '" + o.object_id + "'");
    }
    if (user_by_id_.size() != users_.size()) {
        std::set<std::string> seen;
        for (const auto& u : users_)
            if (!seen.insert(u.user_id).second) throw ValidationError("duplicate user_id '" + u.user_id + "'");
    }
    for (const auto& o : objects_) {
        if (o.rate <= 0) throw ValidationError("object '" + o.object_id + "' has non-positive rate");
    }
    std::set<std::string> products;
    for (const auto& r : recipes_) {
        if (r.input_kinds.empty()) throw ValidationError("recipe '" + r.product_kind + "' has no inputs");
        if (std::find(r.input_kinds.begin(), r.input_kinds.end(), r.product_kind) != r.input_kinds.end()) {
            throw ValidationError("recipe '" + r.product_kind + "' lists itself as an input");
        }
        if (!products.insert(r.product_kind).second) {
            throw ValidationError("duplicate recipe for '" + r.product_kind + "'");
        }
    }
    if (known_nodes) {
        for (const auto& u : users_) {
            if (!known_nodes->contains(u.home_dtn)) {
                throw ValidationError("user '" + u.user_id + "' homed at unknown node '" + u.home_dtn + "'");
            }
        }
    }
}

Catalog parse_catalog(std::istream& catalog_csv, std::istream& users_csv, std::istream& recipes_csv,
                      const std::set<std::string>* known_nodes) {
    std::vector<DataObject> objects;
    {
        csv::Reader r(catalog_csv, "catalog.csv",
                      {"object_id", "instrument_id", "region_id", "data_kind", "rate_bytes_per_s"});
        csv::Row row;
        std::set<std::string> seen;
        while (r.next(row)) {
            DataObject o{r.to_id(row, 0), r.to_id(row, 1), r.to_id(row, 2), r.to_id(row, 3), r.to_int(row, 4)};
            if (!seen.insert(o.object_id).second) throw ValidationError("duplicate object_id '" + o.object_id + "'");
            objects.push_back(std::move(o));
        }
    }
    std::vector<UserProfile> users;
    {
        csv::Reader r(users_csv, "users.csv", {"user_id", "org_id", "x", "y", "home_dtn"});
        csv::Row row;
        std::set<std::string> seen;
        while (r.next(row)) {
            UserProfile u{r.to_id(row, 0), r.to_id(row, 1), r.to_double(row, 2), r.to_double(row, 3),
                          r.to_id(row, 4)};
            if (!seen.insert(u.user_id).second) throw ValidationError("duplicate user_id '" + u.user_id + "'");
            users.push_back(std::move(u));
        }
    }
    std::vector<DerivationRecipe> recipes;
    {
        csv::Reader r(recipes_csv, "recipes.csv", {"product_kind", "input_kind"});
        csv::Row row;
        std::map<std::string, std::set<std::string>> by_product;
        std::vector<std::string> order;
        while (r.next(row)) {
            const auto& p = r.to_id(row, 0);
            if (!by_product.contains(p)) order.push_back(p);
            by_product[p].insert(r.to_id(row, 1));
        }
        for (const auto& p : order) {
            const auto& in = by_product[p];
            recipes.push_back({p, std::vector<std::string>(in.begin(), in.end())});
        }
    }
    Catalog c(std::move(objects), std::move(recipes), std::move(users));
    c.validate(known_nodes);
    return c;
}

namespace {

std::ifstream open_input(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw NotFoundError("cannot open '" + p.string() + "'");
    return in;
}

}  // namespace

Catalog load_catalog(const CatalogPaths& paths, const std::set<std::string>* known_nodes) {
    auto c = open_input(paths.catalog);
    auto u = open_input(paths.users);
    std::stringstream empty_recipes("product_kind,input_kind\n");
    if (paths.recipes.empty()) return parse_catalog(c, u, empty_recipes, known_nodes);
    auto r = open_input(paths.recipes);
    return parse_catalog(c, u, r, known_nodes);
}

Trace parse_requests(std::istream& in, const std::string& name, const Catalog* catalog) {
    csv::Reader r(in, name,
                  {"req_id", "t_arrive_s", "user_id", "object_id", "window_start_s", "window_end_s", "channel"});
    Trace trace;
    csv::Row row;
    while (r.next(row)) {
        Request q;
        q.req_id = r.to_int(row, 0);
        q.t_arrive = r.to_double(row, 1);
        q.user_id = r.to_id(row, 2);
        q.object_id = r.to_id(row, 3);
        q.window = {r.to_double(row, 4), r.to_double(row, 5)};
        if (row.fields[6] == "api") {
            q.channel = Channel::Api;
        } else if (row.fields[6] == "portal") {
            q.channel = Channel::Portal;
        } else {
            r.fail(row, "unknown channel '" + row.fields[6] + "'");
        }
        if (!q.window.valid()) r.fail(row, "window start must precede end");
        if (q.t_arrive < 0) r.fail(row, "negative arrival time");
        if (!trace.empty() && q.t_arrive < trace.back().t_arrive) r.fail(row, "requests not sorted by t_arrive");
        if (catalog) {
            if (!catalog->object_index(q.object_id)) r.fail(row, "unknown object '" + q.object_id + "'");
            if (!catalog->user_index(q.user_id)) r.fail(row, "unknown user '" + q.user_id + "'");
        }
        trace.push_back(std::move(q));
    }
    return trace;
}

Trace load_requests(const std::filesystem::path& path, const Catalog* catalog) {
    auto in = open_input(path);
    return parse_requests(in, path.filename().string(), catalog);
}

void validate_trace(const Trace& trace, const Catalog& catalog) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& q = trace[i];
        if (!catalog.object_index(q.object_id))
            throw ValidationError("request " + std::to_string(q.req_id) + ": unknown object '" + q.object_id + "'");
        if (!catalog.user_index(q.user_id))
            throw ValidationError("request " + std::to_string(q.req_id) + ": unknown user '" + q.user_id + "'");
        if (!q.window.valid()) throw ValidationError("request " + std::to_string(q.req_id) + ": empty window");
        if (q.t_arrive < 0) throw ValidationError("request " + std::to_string(q.req_id) + ": negative arrival");
        if (i > 0 && q.t_arrive < trace[i - 1].t_arrive)
            throw ValidationError("trace not sorted by t_arrive at request " + std::to_string(q.req_id));
    }
}

void write_catalog_csv(std::ostream& out, const Catalog& catalog) {
    out << "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\n";
    for (const auto& o : catalog.objects())
        out << o.object_id << ',' << o.instrument_id << ',' << o.region_id << ',' << o.data_kind << ',' << o.rate
            << '\n';
}

void write_users_csv(std::ostream& out, const Catalog& catalog) {
    out << "user_id,org_id,x,y,home_dtn\n";
    for (const auto& u : catalog.users())
        out << u.user_id << ',' << u.org_id << ',' << format_number(u.x) << ',' << format_number(u.y) << ','
            << u.home_dtn << '\n';
}

void write_recipes_csv(std::ostream& out, const Catalog& catalog) {
    out << "product_kind,input_kind\n";
    for (const auto& r : catalog.recipes())
        for (const auto& k : r.input_kinds) out << r.product_kind << ',' << k << '\n';
}

void write_requests_csv(std::ostream& out, const Trace& trace) {
    out << "req_id,t_arrive_s,user_id,object_id,window_start_s,window_end_s,channel\n";
    for (const auto& q : trace)
        out << q.req_id << ',' << format_number(q.t_arrive) << ',' << q.user_id << ',' << q.object_id << ','
            << format_number(q.window.start) << ',' << format_number(q.window.end) << ',' << to_string(q.channel)
            << '\n';
}

}  // namespace lfsim
