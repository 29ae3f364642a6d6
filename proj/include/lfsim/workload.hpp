#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfsim/common.hpp"

namespace lfsim {

struct DataObject {
    std::string object_id;
    std::string instrument_id;
    std::string region_id;
    std::string data_kind;
    std::int64_t rate = 0;  // bytes per second of recorded data
};

// A data product derived from a set of input kinds (e.g. salinity from
// conductivity, temperature and depth).
struct DerivationRecipe {
    std::string product_kind;
    std::vector<std::string> input_kinds;  // sorted, unique
};

struct UserProfile {
    std::string user_id;
    std::string org_id;
    double x = 0.0;
    double y = 0.0;
    std::string home_dtn;
};

enum class Channel { Portal, Api };

std::string_view to_string(Channel c);
Channel parse_channel(std::string_view s);

struct Request {
    std::int64_t req_id = 0;
    double t_arrive = 0.0;
    std::string user_id;
    std::string object_id;
    Window window;
    Channel channel = Channel::Api;
};

using Trace = std::vector<Request>;

// Cross-referenced catalog. Lookups by id are O(1); the vectors keep file order.
class Catalog {
public:
    Catalog() = default;
    Catalog(std::vector<DataObject> objects, std::vector<DerivationRecipe> recipes,
            std::vector<UserProfile> users);

    const std::vector<DataObject>& objects() const { return objects_; }
    const std::vector<DerivationRecipe>& recipes() const { return recipes_; }
    const std::vector<UserProfile>& users() const { return users_; }

    std::optional<std::size_t> object_index(std::string_view object_id) const;
    std::optional<std::size_t> user_index(std::string_view user_id) const;
    const DataObject& object(std::string_view object_id) const;  // throws NotFoundError
    const UserProfile& user(std::string_view user_id) const;     // throws NotFoundError

    // Rejects duplicate ids, non-positive rates, invalid recipes and (when
    // known_nodes is given) users homed at unknown nodes.
    void validate(const std::set<std::string>* known_nodes = nullptr) const;

private:
    std::vector<DataObject> objects_;
    std::vector<DerivationRecipe> recipes_;
    std::vector<UserProfile> users_;
    std::unordered_map<std::string, std::size_t> object_by_id_;
    std::unordered_map<std::string, std::size_t> user_by_id_;
};

struct CatalogPaths {
    std::filesystem::path catalog;
    std::filesystem::path users;
    std::filesystem::path recipes;
};

Catalog load_catalog(const CatalogPaths& paths, const std::set<std::string>* known_nodes = nullptr);
Catalog parse_catalog(std::istream& catalog_csv, std::istream& users_csv, std::istream& recipes_csv,
                      const std::set<std::string>* known_nodes = nullptr);

Trace load_requests(const std::filesystem::path& path, const Catalog* catalog = nullptr);
Trace parse_requests(std::istream& in, const std::string& name = "requests.csv",
                     const Catalog* catalog = nullptr);

void write_catalog_csv(std::ostream& out, const Catalog& catalog);
void write_users_csv(std::ostream& out, const Catalog& catalog);
void write_recipes_csv(std::ostream& out, const Catalog& catalog);
void write_requests_csv(std::ostream& out, const Trace& trace);

// Every request must name a known user and object and carry a valid window.
void validate_trace(const Trace& trace, const Catalog& catalog);

// ---------------------------------------------------------------------------
// Access patterns

enum class PatternKind { Regular, Overlapping, RealTime, Unknown };

std::string_view to_string(PatternKind k);
PatternKind parse_pattern_kind(std::string_view s);

struct AccessPattern {
    PatternKind kind = PatternKind::Unknown;
    double period_s = 0.0;
    double window_s = 0.0;
    double overlap_s = 0.0;
    std::size_t history = 0;  // number of sessions the estimate is based on
};

struct ClassifierConfig {
    double cv_max = 0.2;
    double realtime_threshold_s = 300.0;
    std::size_t min_history = 3;
};

// Classifies one user's request history (sorted by t_arrive). Requests sharing
// a timestamp form one session; inter-arrival times are measured between
// sessions, overlaps between consecutive windows of the same object.
AccessPattern classify_user_pattern(std::span<const Request> history, const ClassifierConfig& config = {});

// Groups a trace by user, keeping only api-channel requests, in trace order.
std::map<std::string, std::vector<Request>> program_histories(const Trace& trace);

// ---------------------------------------------------------------------------
// Synthetic workloads

struct GeneratorParams {
    int regular_users = 50;
    int overlapping_users = 30;
    int realtime_users = 20;
    int portal_users = 5;

    std::vector<double> regular_periods{1800, 3600, 7200, 14400, 21600};
    std::vector<double> overlapping_periods{1800, 3600, 7200};
    std::vector<double> overlap_fractions{0.25, 0.5, 0.75};
    std::vector<double> realtime_periods{60, 120, 180, 240};
    std::vector<double> realtime_windows{120, 300, 600};

    double jitter = 0.0;  // request times move by U(-jitter, jitter) * period
    int orgs = 10;
    int regions = 6;
    int instruments_per_region = 3;
    int kinds_per_instrument = 4;
    double reuse_fraction = 0.4;
    double locality_bias = 0.5;
    int objects_per_user_min = 2;
    int objects_per_user_max = 5;
    int realtime_objects_max = 2;
    int portal_requests_per_user = 10;

    double duration_s = 2 * 86400.0;
    double chunk_s = 3600.0;  // publication granularity of the origin archives
    std::int64_t rate_min = 1000;
    std::int64_t rate_max = 8000;
    std::vector<std::string> dtns{"dtn1", "dtn2", "dtn3", "dtn4", "dtn5", "dtn6", "dtn7"};
};

struct UserTruth {
    std::string user_id;
    PatternKind kind = PatternKind::Unknown;  // Unknown for portal users
    bool portal = false;
    double period_s = 0.0;
    double window_s = 0.0;
    double overlap_s = 0.0;
    std::string org_id;
    std::string focus_region;
    std::vector<std::string> objects;
};

struct GroundTruth {
    std::vector<UserTruth> users;
    std::map<std::string, std::vector<std::string>> org_pools;  // org -> objects queried by its members
    double locality_bias = 0.0;
    double reuse_fraction = 0.0;

    const UserTruth* find(std::string_view user_id) const;
};

struct Workload {
    Catalog catalog;
    Trace trace;
    GroundTruth truth;
};

// Deterministic in (params, seed). Throws ConfigError on empty populations.
Workload generate_trace(const GeneratorParams& params, std::uint64_t seed);

std::string ground_truth_json(const GroundTruth& truth);

// ---------------------------------------------------------------------------
// Affinity statistics

struct UserAffinity {
    std::string user_id;
    std::size_t requests = 0;
    double modal_region_share = 0.0;
    double modal_kind_share = 0.0;
    double org_overlap = 0.0;  // share of the user's objects also queried by someone else in the org
};

struct AffinityReport {
    std::vector<UserAffinity> users;  // sorted by user_id
    double mean_modal_region_share = 0.0;
    double mean_modal_kind_share = 0.0;
    double mean_org_overlap = 0.0;
    double api_request_share = 0.0;
};

AffinityReport affinity_stats(const Trace& trace, const Catalog& catalog);

}  // namespace lfsim
