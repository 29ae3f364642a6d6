#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lfsim/workload.hpp"

namespace lfsim {

// ---------------------------------------------------------------------------
// Knowledge sources

enum class Source { Locality, DomainModel, UserAssociation, Interactions, Noise };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);  // throws ConfigError

struct NamedTriple {
    std::string head;
    std::string relation;
    std::string tail;
    friend auto operator<=>(const NamedTriple&, const NamedTriple&) = default;
};

struct SourceKG {
    Source source = Source::Interactions;
    std::vector<NamedTriple> triples;  // sorted, unique
};

using SourceKGs = std::map<Source, SourceKG>;

// Canonical entity ids: "<type>:<id>" lowercased and trimmed, so identical
// real-world entities from different sources align.
std::string canonical_id(std::string_view type, std::string_view id);

// Per-user distinct items, in order of first query.
using UserItems = std::map<std::string, std::vector<std::string>>;

UserItems user_items(const Trace& trace);

// Locality: (item, located_in, region), (item, mounted_on, instrument).
// Domain model: (input kind, derives, product kind), (item, has_kind, kind).
// User association: (user, member_of, org). Interactions: (user, interact, item).
SourceKGs build_source_kgs(const Catalog& catalog, const UserItems& interactions);
SourceKGs build_source_kgs(const Catalog& catalog, const Trace& trace);

// m distinct (head, noise, tail) triples between uniformly drawn distinct
// entities of `entities`.
SourceKG inject_noise(const std::vector<std::string>& entities, std::size_t m, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Collaborative knowledge graph

struct Triple {
    std::size_t h = 0;
    std::size_t r = 0;
    std::size_t t = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
};

struct Neighbor {
    std::size_t r = 0;
    std::size_t t = 0;
};

class CKG {
public:
    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<std::string>& relations() const { return relations_; }  // base at 2b, inverse at 2b+1
    const std::vector<Triple>& triples() const { return triples_; }           // including inverse edges
    const std::vector<Neighbor>& neighbors(std::size_t h) const { return adjacency_.at(h); }
    const std::vector<std::size_t>& users() const { return users_; }  // entity indices, sorted
    const std::vector<std::size_t>& items() const { return items_; }  // entity indices, sorted
    // Training interactions per user entity (item entity indices, sorted).
    const std::map<std::size_t, std::vector<std::size_t>>& interactions() const { return interactions_; }

    std::optional<std::size_t> entity(std::string_view canonical) const;
    std::optional<std::size_t> relation(std::string_view name) const;
    bool has_triple(std::size_t h, std::size_t r, std::size_t t) const;
    std::set<Source> sources() const { return sources_; }

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }

private:
    friend CKG build_ckg(const SourceKGs&, const std::set<Source>&);
    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::vector<Triple> triples_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<std::size_t> users_;
    std::vector<std::size_t> items_;
    std::map<std::size_t, std::vector<std::size_t>> interactions_;
    std::unordered_map<std::string, std::size_t> entity_index_;
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> triple_set_;
    std::set<Source> sources_;
};

// Interactions are always included. Throws ValidationError when a selected
// source is unavailable or there are no interactions.
CKG build_ckg(const SourceKGs& sources, const std::set<Source>& selection);

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingParams {
    Eigen::MatrixXd E;                 // entities x d
    Eigen::MatrixXd R;                 // relations x k
    std::vector<Eigen::MatrixXd> Wr;   // per relation, k x d
    std::vector<Eigen::MatrixXd> W;    // per layer, d x d

    std::size_t d() const { return static_cast<std::size_t>(E.cols()); }
    std::size_t k() const { return static_cast<std::size_t>(R.cols()); }
    std::size_t layers() const { return W.size(); }
    double squared_norm() const;
    bool finite() const;
    EmbeddingParams zeros_like() const;
    void axpy(double a, const EmbeddingParams& x);  // this += a * x
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
EmbeddingParams init_params(std::size_t entities, std::size_t relations, std::size_t d, std::size_t k,
                            std::size_t layers, std::uint64_t seed);

// g(h,r,t) = |W_r e_h + e_r - W_r e_t|^2
double transr_energy(const EmbeddingParams& p, std::size_t h, std::size_t r, std::size_t t);

// Softmax over N(h) of (W_r e_t)^T tanh(W_r e_h + e_r); uniform when disabled.
std::vector<double> attention_weights(const EmbeddingParams& p, const CKG& g, std::size_t h, bool enabled = true);

// Per-entity weights aligned with CKG::neighbors(h).
using Attention = std::vector<std::vector<double>>;
Attention compute_attention(const EmbeddingParams& p, const CKG& g, bool enabled = true);

struct Propagation {
    std::vector<Eigen::MatrixXd> X;  // layer outputs e^(0..L)
    std::vector<Eigen::MatrixXd> S;  // e^(l-1) + e_N^(l), l = 1..L
    std::vector<Eigen::MatrixXd> Z;  // pre-activations, l = 1..L
    Eigen::MatrixXd final() const;   // concatenation [e^(0) | ... | e^(L)]
};

inline constexpr double kLeakySlope = 0.2;

Propagation propagate(const EmbeddingParams& p, const CKG& g, const Attention& att);

// y(u, i) = e*_u . e*_i over rows of the final representation.
double predict_score(const Eigen::MatrixXd& final_repr, std::size_t u, std::size_t i);

// ---------------------------------------------------------------------------
// Losses and training

enum class Reduction { Mean, Sum };

struct KgSample {
    std::size_t h, r, t, t_neg;
};
struct CfSample {
    std::size_t u, i, j;
};

// Pairwise losses plus lambda * |Theta|^2 over every parameter block. When
// grad is given it receives the analytic gradient. The CF loss treats the
// attention weights as constants.
double kg_loss(const EmbeddingParams& p, const std::vector<KgSample>& batch, double lambda, Reduction red,
               EmbeddingParams* grad = nullptr);
double cf_loss(const EmbeddingParams& p, const CKG& g, const Attention& att, const std::vector<CfSample>& batch,
               double lambda, Reduction red, EmbeddingParams* grad = nullptr);

struct TrainConfig {
    double learning_rate = 0.01;
    double lambda = 1e-5;
    std::size_t batch_size = 256;
    std::size_t epochs = 60;
    std::size_t negatives = 1;
    bool attention = true;
    std::uint64_t seed = 1;
    std::size_t d = 16;
    std::size_t k = 16;
    std::size_t layers = 2;
    Reduction reduction = Reduction::Sum;
};

struct TrainResult {
    EmbeddingParams params;
    std::vector<double> kg_loss;  // per epoch, mean per sample
    std::vector<double> cf_loss;  // per epoch, mean per sample
    std::vector<double> param_norm;  // |Theta| after every epoch
};

// Alternates one KG epoch and one CF epoch. Throws TrainingError when a loss
// or parameter becomes non-finite.
TrainResult train(const CKG& g, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Model, recommendation and evaluation

struct Model {
    CKG graph;
    EmbeddingParams params;
    bool attention = true;
    Eigen::MatrixXd final_repr;  // cached e*

    void refresh();  // recompute attention and e* from params
    double score(std::size_t u, std::size_t i) const { return predict_score(final_repr, u, i); }
};

Model make_model(CKG graph, EmbeddingParams params, bool attention);

struct Recommendation {
    std::string item;  // canonical id
    double score = 0.0;
};

// Items by score descending, ties by smallest canonical id. Throws
// NotFoundError for unknown users and ConfigError for K < 1.
std::vector<Recommendation> recommend_topk(const Model& m, std::string_view user, std::size_t K, bool exclude_seen = true);

struct HoldoutSplit {
    UserItems train;  // every user
    UserItems test;   // users with >= 2 items: the last max(1, floor(fraction * n))
};

HoldoutSplit holdout_split(const UserItems& items, double fraction = 0.2);

struct EvalResult {
    double recall = 0.0;
    double ndcg = 0.0;
    std::size_t users = 0;
};

// Ranking function: user canonical id -> ordered canonical item ids (top K).
using Ranker = std::function<std::vector<std::string>(const std::string& user, std::size_t K)>;

// test keys/values are raw user/object ids as in HoldoutSplit.
EvalResult evaluate_ranker(const Ranker& rank, const UserItems& test, std::size_t K);
EvalResult evaluate(const Model& m, const UserItems& test, std::size_t K);

// Global interaction counts over `train`; ties by canonical id; seen items excluded.
Ranker popularity_ranker(const UserItems& train);

// ---------------------------------------------------------------------------
// Studies

struct ComboRow {
    std::set<Source> sources;  // always includes Interactions
    bool attention = true;
    std::size_t noise_triples = 0;
    std::uint64_t seed = 0;
    EvalResult metrics;
};

struct StudyConfig {
    TrainConfig train;
    std::size_t K = 10;
    std::vector<std::set<Source>> subsets;  // empty = every subset of the available sources
    std::vector<bool> attention{true, false};
    std::size_t noise_triples = 0;  // added to every subset when > 0
    double holdout = 0.2;
};

std::vector<ComboRow> run_combination_study(const Catalog& catalog, const Trace& trace, const StudyConfig& config);

// Every subset of {Locality, DomainModel, UserAssociation}, each with Interactions.
std::vector<std::set<Source>> all_source_subsets();
std::string sources_label(const std::set<Source>& s);  // "interactions+locality"
std::set<Source> parse_sources_label(std::string_view s);

void write_combos_csv(std::ostream& out, const std::vector<ComboRow>& rows, std::size_t K);
void write_rec_csv(std::ostream& out, const std::string& user_id, const std::vector<Recommendation>& recs,
                   bool header);

// Checkpoint: dictionaries, config and every parameter block; doubles
// round-trip exactly.
std::string checkpoint_json(const Model& m, const TrainConfig& config);
struct Checkpoint {
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    std::set<Source> sources;
    TrainConfig config;
    EmbeddingParams params;
};
Checkpoint parse_checkpoint(std::string_view text);

// ---------------------------------------------------------------------------
// Planted-affinity recommendation dataset

struct RecDatasetParams {
    int users = 200;
    int regions = 15;
    int instruments_per_region = 4;
    int kinds_per_instrument = 5;  // items = regions * instruments * kinds
    int orgs = 20;
    int interactions_min = 8;
    int interactions_max = 16;
    double locality = 0.8;  // share of a user's items drawn from the org's focus region
};

// Users query mostly items co-located in their organisation's focus region.
Workload planted_rec_dataset(const RecDatasetParams& params, std::uint64_t seed);

}  // namespace lfsim
