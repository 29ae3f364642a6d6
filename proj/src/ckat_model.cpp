#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lfsim/ckat.hpp"
#include "lfsim/random.hpp"

namespace lfsim {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// -ln sigmoid(x), stable for large |x|.
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

double leaky(double z) { return z > 0 ? z : kLeakySlope * z; }
double leaky_grad(double z) { return z > 0 ? 1.0 : kLeakySlope; }

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

// out[h] = sum over N(h) of att * x[t]
MatrixXd aggregate(const CKG& g, const Attention& att, const MatrixXd& x) {
    MatrixXd out = MatrixXd::Zero(x.rows(), x.cols());
    for (std::size_t h = 0; h < g.num_entities(); ++h) {
        const auto& nb = g.neighbors(h);
        for (std::size_t k = 0; k < nb.size(); ++k)
            out.row(static_cast<Eigen::Index>(h)) += att[h][k] * x.row(static_cast<Eigen::Index>(nb[k].t));
    }
    return out;
}

// out[t] += att * x[h], the transpose of aggregate
MatrixXd aggregate_transpose(const CKG& g, const Attention& att, const MatrixXd& x) {
    MatrixXd out = MatrixXd::Zero(x.rows(), x.cols());
    for (std::size_t h = 0; h < g.num_entities(); ++h) {
        const auto& nb = g.neighbors(h);
        for (std::size_t k = 0; k < nb.size(); ++k)
            out.row(static_cast<Eigen::Index>(nb[k].t)) += att[h][k] * x.row(static_cast<Eigen::Index>(h));
    }
    return out;
}

void add_regulariser(const EmbeddingParams& p, double lambda, EmbeddingParams* grad) {
    if (grad == nullptr || lambda == 0.0) return;
    grad->axpy(2.0 * lambda, p);
}

double reduce_scale(Reduction red, std::size_t n) { return red == Reduction::Mean && n > 0 ? 1.0 / static_cast<double>(n) : 1.0; }

}  // namespace

double EmbeddingParams::squared_norm() const {
    double s = E.squaredNorm() + R.squaredNorm();
    for (const auto& m : Wr) s += m.squaredNorm();
    for (const auto& m : W) s += m.squaredNorm();
    return s;
}

bool EmbeddingParams::finite() const {
    if (!E.allFinite() || !R.allFinite()) return false;
    for (const auto& m : Wr)
        if (!m.allFinite()) return false;
    for (const auto& m : W)
        if (!m.allFinite()) return false;
    return true;
}

EmbeddingParams EmbeddingParams::zeros_like() const {
    EmbeddingParams z;
    z.E = MatrixXd::Zero(E.rows(), E.cols());
    z.R = MatrixXd::Zero(R.rows(), R.cols());
    for (const auto& m : Wr) z.Wr.push_back(MatrixXd::Zero(m.rows(), m.cols()));
    for (const auto& m : W) z.W.push_back(MatrixXd::Zero(m.rows(), m.cols()));
    return z;
}

void EmbeddingParams::axpy(double a, const EmbeddingParams& x) {
    E += a * x.E;
    R += a * x.R;
    for (std::size_t i = 0; i < Wr.size(); ++i) Wr[i] += a * x.Wr[i];
    for (std::size_t i = 0; i < W.size(); ++i) W[i] += a * x.W[i];
}

EmbeddingParams init_params(std::size_t entities, std::size_t relations, std::size_t d, std::size_t k,
                            std::size_t layers, std::uint64_t seed) {
    if (d == 0 || k == 0) throw ConfigError("embedding sizes must be positive");
    Rng rng(seed);
    EmbeddingParams p;
    const auto di = static_cast<Eigen::Index>(d);
    const auto ki = static_cast<Eigen::Index>(k);
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    const double bk = 1.0 / std::sqrt(static_cast<double>(k));
    p.E.resize(static_cast<Eigen::Index>(entities), di);
    fill_uniform(p.E, bd, rng);
    p.R.resize(static_cast<Eigen::Index>(relations), ki);
    fill_uniform(p.R, bk, rng);
    for (std::size_t r = 0; r < relations; ++r) {
        MatrixXd m(ki, di);
        fill_uniform(m, bd, rng);
        p.Wr.push_back(std::move(m));
    }
    for (std::size_t l = 0; l < layers; ++l) {
        MatrixXd m(di, di);
        fill_uniform(m, bd, rng);
        p.W.push_back(std::move(m));
    }
    return p;
}

double transr_energy(const EmbeddingParams& p, std::size_t h, std::size_t r, std::size_t t) {
    const auto ri = static_cast<Eigen::Index>(r);
    VectorXd v = p.Wr[r] * (p.E.row(static_cast<Eigen::Index>(h)) - p.E.row(static_cast<Eigen::Index>(t))).transpose() +
                 p.R.row(ri).transpose();
    return v.squaredNorm();
}

std::vector<double> attention_weights(const EmbeddingParams& p, const CKG& g, std::size_t h, bool enabled) {
    const auto& nb = g.neighbors(h);
    std::vector<double> w(nb.size(), nb.empty() ? 0.0 : 1.0 / static_cast<double>(nb.size()));
    if (!enabled || nb.empty()) return w;
    const VectorXd eh = p.E.row(static_cast<Eigen::Index>(h)).transpose();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto& Wr = p.Wr[nb[k].r];
        const VectorXd et = p.E.row(static_cast<Eigen::Index>(nb[k].t)).transpose();
        const VectorXd a = (Wr * eh + p.R.row(static_cast<Eigen::Index>(nb[k].r)).transpose()).array().tanh();
        w[k] = (Wr * et).dot(a);
        best = std::max(best, w[k]);
    }
    double z = 0.0;
    for (auto& x : w) z += (x = std::exp(x - best));
    for (auto& x : w) x /= z;
    return w;
}

Attention compute_attention(const EmbeddingParams& p, const CKG& g, bool enabled) {
    Attention att(g.num_entities());
    for (std::size_t h = 0; h < g.num_entities(); ++h) att[h] = attention_weights(p, g, h, enabled);
    return att;
}

MatrixXd Propagation::final() const {
    if (X.empty()) return {};
    const auto d = X.front().cols();
    MatrixXd out(X.front().rows(), d * static_cast<Eigen::Index>(X.size()));
    for (std::size_t l = 0; l < X.size(); ++l) out.middleCols(static_cast<Eigen::Index>(l) * d, d) = X[l];
    return out;
}

Propagation propagate(const EmbeddingParams& p, const CKG& g, const Attention& att) {
    Propagation out;
    out.X.push_back(p.E);
    for (std::size_t l = 0; l < p.layers(); ++l) {
        const auto& prev = out.X.back();
        MatrixXd s = prev + aggregate(g, att, prev);
        MatrixXd z = s * p.W[l].transpose();
        out.X.push_back(z.unaryExpr([](double v) { return leaky(v); }));
        out.S.push_back(std::move(s));
        out.Z.push_back(std::move(z));
    }
    return out;
}

double predict_score(const MatrixXd& final_repr, std::size_t u, std::size_t i) {
    return final_repr.row(static_cast<Eigen::Index>(u)).dot(final_repr.row(static_cast<Eigen::Index>(i)));
}

double kg_loss(const EmbeddingParams& p, const std::vector<KgSample>& batch, double lambda, Reduction red,
               EmbeddingParams* grad) {
    const double scale = reduce_scale(red, batch.size());
    double loss = 0.0;
    for (const auto& s : batch) {
        const auto ri = static_cast<Eigen::Index>(s.r);
        const auto& Wr = p.Wr[s.r];
        const VectorXd eh = p.E.row(static_cast<Eigen::Index>(s.h)).transpose();
        const VectorXd et = p.E.row(static_cast<Eigen::Index>(s.t)).transpose();
        const VectorXd en = p.E.row(static_cast<Eigen::Index>(s.t_neg)).transpose();
        const VectorXd er = p.R.row(ri).transpose();
        const VectorXd vp = Wr * (eh - et) + er;
        const VectorXd vn = Wr * (eh - en) + er;
        const double x = vn.squaredNorm() - vp.squaredNorm();
        loss += scale * softplus_neg(x);
        if (grad == nullptr) continue;
        // d loss / d g_pos = sigma(-x), d loss / d g_neg = -sigma(-x)
        const double c = scale * sigmoid(-x);
        const VectorXd gp = 2.0 * c * vp;   // d loss / d vp
        const VectorXd gn = -2.0 * c * vn;  // d loss / d vn
        const VectorXd wp = Wr.transpose() * gp;
        const VectorXd wn = Wr.transpose() * gn;
        grad->E.row(static_cast<Eigen::Index>(s.h)) += (wp + wn).transpose();
        grad->E.row(static_cast<Eigen::Index>(s.t)) -= wp.transpose();
        grad->E.row(static_cast<Eigen::Index>(s.t_neg)) -= wn.transpose();
        grad->R.row(ri) += (gp + gn).transpose();
        grad->Wr[s.r] += gp * (eh - et).transpose() + gn * (eh - en).transpose();
    }
    add_regulariser(p, lambda, grad);
    return loss + lambda * p.squared_norm();
}

double cf_loss(const EmbeddingParams& p, const CKG& g, const Attention& att, const std::vector<CfSample>& batch,
               double lambda, Reduction red, EmbeddingParams* grad) {
    const double scale = reduce_scale(red, batch.size());
    const auto prop = propagate(p, g, att);
    const MatrixXd F = prop.final();
    MatrixXd dF;
    if (grad != nullptr) dF = MatrixXd::Zero(F.rows(), F.cols());
    double loss = 0.0;
    for (const auto& s : batch) {
        const auto u = static_cast<Eigen::Index>(s.u);
        const auto i = static_cast<Eigen::Index>(s.i);
        const auto j = static_cast<Eigen::Index>(s.j);
        const double x = F.row(u).dot(F.row(i)) - F.row(u).dot(F.row(j));
        loss += scale * softplus_neg(x);
        if (grad == nullptr) continue;
        const double c = -scale * sigmoid(-x);  // d loss / d x
        dF.row(u) += c * (F.row(i) - F.row(j));
        dF.row(i) += c * F.row(u);
        dF.row(j) -= c * F.row(u);
    }
    if (grad != nullptr) {
        const auto d = static_cast<Eigen::Index>(p.d());
        const auto L = p.layers();
        MatrixXd dX = dF.middleCols(static_cast<Eigen::Index>(L) * d, d);
        for (std::size_t l = L; l-- > 0;) {
            const MatrixXd dZ = dX.cwiseProduct(prop.Z[l].unaryExpr([](double v) { return leaky_grad(v); }));
            grad->W[l] += dZ.transpose() * prop.S[l];
            const MatrixXd dS = dZ * p.W[l];
            dX = dF.middleCols(static_cast<Eigen::Index>(l) * d, d) + dS + aggregate_transpose(g, att, dS);
        }
        grad->E += dX;
    }
    add_regulariser(p, lambda, grad);
    return loss + lambda * p.squared_norm();
}

TrainResult train(const CKG& g, const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(cfg.learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (cfg.lambda < 0) throw ConfigError("lambda must be non-negative");
    if (cfg.negatives == 0) throw ConfigError("negatives must be positive");
    if (g.items().size() < 2) throw TrainingError("need at least two items");

    TrainResult res;
    res.params = init_params(g.num_entities(), g.num_relations(), cfg.d, cfg.k, cfg.layers, cfg.seed);
    auto& p = res.params;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto n_ent = g.num_entities();

    std::vector<std::size_t> kg_order(g.triples().size());
    std::iota(kg_order.begin(), kg_order.end(), std::size_t{0});
    std::vector<std::pair<std::size_t, std::size_t>> cf_pairs;
    for (const auto& [u, items] : g.interactions())
        for (auto i : items) cf_pairs.emplace_back(u, i);
    const auto& items = g.items();

    auto check = [&](double v, const char* what) {
        if (!std::isfinite(v) || !p.finite())
            throw TrainingError(std::string("non-finite ") + what + " during training");
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(kg_order);
        double kg_sum = 0.0;
        std::size_t kg_n = 0;
        for (std::size_t b = 0; b < kg_order.size(); b += cfg.batch_size) {
            std::vector<KgSample> batch;
            for (std::size_t q = b; q < std::min(kg_order.size(), b + cfg.batch_size); ++q) {
                const auto& tr = g.triples()[kg_order[q]];
                for (std::size_t n = 0; n < cfg.negatives; ++n) {
                    std::size_t neg = tr.t;
                    for (int tries = 0; tries < 100; ++tries) {
                        neg = rng.index(n_ent);
                        if (!g.has_triple(tr.h, tr.r, neg)) break;
                    }
                    batch.push_back({tr.h, tr.r, tr.t, neg});
                }
            }
            auto grad = p.zeros_like();
            const double l = kg_loss(p, batch, cfg.lambda, cfg.reduction, &grad) - cfg.lambda * p.squared_norm();
            kg_sum += cfg.reduction == Reduction::Mean ? l * static_cast<double>(batch.size()) : l;
            kg_n += batch.size();
            p.axpy(-cfg.learning_rate, grad);
            check(l, "knowledge-graph loss");
        }

        const auto att = compute_attention(p, g, cfg.attention);
        rng.shuffle(cf_pairs);
        double cf_sum = 0.0;
        std::size_t cf_n = 0;
        for (std::size_t b = 0; b < cf_pairs.size(); b += cfg.batch_size) {
            std::vector<CfSample> batch;
            for (std::size_t q = b; q < std::min(cf_pairs.size(), b + cfg.batch_size); ++q) {
                const auto [u, i] = cf_pairs[q];
                const auto& pos = g.interactions().at(u);
                for (std::size_t n = 0; n < cfg.negatives; ++n) {
                    std::size_t j = i;
                    for (int tries = 0; tries < 100; ++tries) {
                        j = items[rng.index(items.size())];
                        if (!std::binary_search(pos.begin(), pos.end(), j)) break;
                    }
                    batch.push_back({u, i, j});
                }
            }
            auto grad = p.zeros_like();
            const double l = cf_loss(p, g, att, batch, cfg.lambda, cfg.reduction, &grad) - cfg.lambda * p.squared_norm();
            cf_sum += cfg.reduction == Reduction::Mean ? l * static_cast<double>(batch.size()) : l;
            cf_n += batch.size();
            p.axpy(-cfg.learning_rate, grad);
            check(l, "recommendation loss");
        }
        res.kg_loss.push_back(kg_n ? kg_sum / static_cast<double>(kg_n) : 0.0);
        res.cf_loss.push_back(cf_n ? cf_sum / static_cast<double>(cf_n) : 0.0);
        res.param_norm.push_back(std::sqrt(p.squared_norm()));
        check(res.param_norm.back(), "parameter norm");
    }
    return res;
}

void Model::refresh() {
    const auto att = compute_attention(params, graph, attention);
    final_repr = propagate(params, graph, att).final();
}

Model make_model(CKG graph, EmbeddingParams params, bool attention) {
    if (params.E.rows() != static_cast<Eigen::Index>(graph.num_entities()) ||
        params.R.rows() != static_cast<Eigen::Index>(graph.num_relations()) || params.Wr.size() != graph.num_relations())
        throw ValidationError("parameters do not match the graph dictionaries");
    Model m{std::move(graph), std::move(params), attention, {}};
    m.refresh();
    return m;
}

}  // namespace lfsim
