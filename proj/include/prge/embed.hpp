#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "prge/detail/digest.hpp"
#include "prge/detail/format.hpp"
#include "prge/detail/random.hpp"
#include "prge/error.hpp"
#include "prge/graph.hpp"
#include "prge/pathrank.hpp"

// Translation embeddings. energy(s, r, o) = ||s + r - o||_2 and the training
// objective is the margin loss sum of w * [margin + E(pos) - E(neg)]_+ with
// w = confidence^lambda (w = 1 for plain TransE).

namespace prge {

struct TrainingConfig {
    std::size_t dim = 50;
    double margin = 1.0;
    double lambda = 5.0;
    int epochs = 1000;
    double learning_rate = 0.01;
    std::size_t batch_size = 1024;
    int patience = 50;
    std::uint64_t seed = 0;
    // Single-threaded, bit-reproducible. When false and threads > 1, epochs
    // run lock-free per-sample SGD over disjoint shards of the training set.
    bool deterministic = true;
    unsigned threads = 1;
    int negative_retries = 100;

    std::string to_text() const {
        std::ostringstream os;
        os << "dim=" << dim << '\n'
           << "margin=" << shortest(margin) << '\n'
           << "lambda=" << shortest(lambda) << '\n'
           << "epochs=" << epochs << '\n'
           << "learning_rate=" << shortest(learning_rate) << '\n'
           << "batch_size=" << batch_size << '\n'
           << "patience=" << patience << '\n'
           << "seed=" << seed << '\n'
           << "deterministic=" << (deterministic ? 1 : 0) << '\n'
           << "threads=" << threads << '\n'
           << "negative_retries=" << negative_retries << '\n';
        return os.str();
    }

    static TrainingConfig from_text(const std::string& text) {
        TrainingConfig c;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ValidationError("bad config line '" + line + "'");
            const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
            try {
                if (k == "dim") c.dim = std::stoull(v);
                else if (k == "margin") c.margin = std::stod(v);
                else if (k == "lambda") c.lambda = std::stod(v);
                else if (k == "epochs") c.epochs = std::stoi(v);
                else if (k == "learning_rate") c.learning_rate = std::stod(v);
                else if (k == "batch_size") c.batch_size = std::stoull(v);
                else if (k == "patience") c.patience = std::stoi(v);
                else if (k == "seed") c.seed = std::stoull(v);
                else if (k == "deterministic") c.deterministic = v == "1";
                else if (k == "threads") c.threads = static_cast<unsigned>(std::stoul(v));
                else if (k == "negative_retries") c.negative_retries = std::stoi(v);
                else throw ValidationError("unknown config key '" + k + "'");
            } catch (const std::logic_error&) {
                throw ValidationError("bad value for config key '" + k + "'");
            }
        }
        return c;
    }

    std::string digest() const { return Digest().update(to_text()).hex(); }

    void validate() const {
        if (dim == 0) throw ValidationError("dim must be positive");
        if (!(margin > 0)) throw ValidationError("margin must be positive");
        if (!(lambda >= 0)) throw ValidationError("lambda must be non-negative");
        if (epochs <= 0) throw ValidationError("epochs must be positive");
        if (!(learning_rate > 0)) throw ValidationError("learning rate must be positive");
        if (batch_size == 0) throw ValidationError("batch size must be positive");
        if (patience <= 0) throw ValidationError("patience must be positive");
    }
};

// Entity and relation vectors, row-major.
template <typename Real>
class EmbeddingModel {
public:
    using value_type = Real;

    EmbeddingModel() = default;
    EmbeddingModel(std::size_t entities, std::size_t relations, std::size_t dim)
        : entities_(entities), relations_(relations), dim_(dim),
          entity_data_(entities * dim, Real(0)), relation_data_(relations * dim, Real(0)) {}

    std::size_t entity_count() const noexcept { return entities_; }
    std::size_t relation_count() const noexcept { return relations_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<Real> entity(EntityId e) { return {entity_data_.data() + row(e, entities_), dim_}; }
    std::span<const Real> entity(EntityId e) const { return {entity_data_.data() + row(e, entities_), dim_}; }
    std::span<Real> relation(RelationId r) { return {relation_data_.data() + row(r, relations_), dim_}; }
    std::span<const Real> relation(RelationId r) const {
        return {relation_data_.data() + row(r, relations_), dim_};
    }

    std::vector<Real>& entity_data() noexcept { return entity_data_; }
    const std::vector<Real>& entity_data() const noexcept { return entity_data_; }
    std::vector<Real>& relation_data() noexcept { return relation_data_; }
    const std::vector<Real>& relation_data() const noexcept { return relation_data_; }

    TrainingConfig config;
    bool weighted = false;
    int epochs_trained = 0;
    int best_epoch = 0;
    double best_validation = std::numeric_limits<double>::infinity();

private:
    std::size_t row(std::size_t i, std::size_t n) const {
        if (i >= n) throw std::out_of_range("embedding row " + std::to_string(i) + " out of range");
        return i * dim_;
    }

    std::size_t entities_ = 0;
    std::size_t relations_ = 0;
    std::size_t dim_ = 0;
    std::vector<Real> entity_data_;
    std::vector<Real> relation_data_;
};

template <typename Real>
Real energy(const EmbeddingModel<Real>& model, const Triple& t) {
    const auto s = model.entity(t.subject);
    const auto r = model.relation(t.relation);
    const auto o = model.entity(t.object);
    Real sum = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Real x = s[i] + r[i] - o[i];
        sum += x * x;
    }
    return std::sqrt(sum);
}

// NaN passes through so a diverging run is noticed.
inline double hinge(double margin, double e_pos, double e_neg) {
    const double x = margin + e_pos - e_neg;
    return std::isnan(x) || x > 0.0 ? x : 0.0;
}

// confidence^lambda, with lambda = 0 giving 1 for every confidence.
inline double prge_weight(double confidence, double lambda) {
    if (!(confidence >= 0.0 && confidence <= 1.0))
        throw ValidationError("confidence " + std::to_string(confidence) + " outside [0, 1]");
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    if (lambda == 0.0) return 1.0;
    return std::pow(confidence, lambda);
}

// Replaces subject or object (fair coin) with a uniformly drawn entity,
// rejecting training triples; after `retries` rejections the last candidate
// is returned as is.
inline Triple sample_negative(const TripleSet& training, std::size_t entity_count, const Triple& t, Rng& rng,
                              int retries = 100) {
    const bool subject_side = fair_coin(rng);
    Triple c = t;
    c.is_noise = false;
    for (int attempt = 0; attempt < std::max(retries, 1); ++attempt) {
        const auto e = static_cast<EntityId>(uniform_index(rng, entity_count));
        (subject_side ? c.subject : c.object) = e;
        if (!training.contains(c)) break;
    }
    return c;
}

// Gradient accumulator with dense storage; only touched rows are cleared.
template <typename Real>
class SparseGradient {
public:
    SparseGradient(std::size_t entities, std::size_t relations, std::size_t dim)
        : dim_(dim), entity_(entities * dim, Real(0)), relation_(relations * dim, Real(0)),
          entity_touched_(entities, 0), relation_touched_(relations, 0) {}

    std::span<Real> entity_row(EntityId e) {
        if (!entity_touched_[e]) {
            entity_touched_[e] = 1;
            touched_entities_.push_back(e);
        }
        return {entity_.data() + e * dim_, dim_};
    }
    std::span<Real> relation_row(RelationId r) {
        if (!relation_touched_[r]) {
            relation_touched_[r] = 1;
            touched_relations_.push_back(r);
        }
        return {relation_.data() + r * dim_, dim_};
    }

    std::span<const Real> entity(EntityId e) const { return {entity_.data() + e * dim_, dim_}; }
    std::span<const Real> relation(RelationId r) const { return {relation_.data() + r * dim_, dim_}; }
    const std::vector<EntityId>& touched_entities() const noexcept { return touched_entities_; }
    const std::vector<RelationId>& touched_relations() const noexcept { return touched_relations_; }

    void clear() {
        for (auto e : touched_entities_) {
            std::fill_n(entity_.begin() + static_cast<std::ptrdiff_t>(e * dim_), dim_, Real(0));
            entity_touched_[e] = 0;
        }
        for (auto r : touched_relations_) {
            std::fill_n(relation_.begin() + static_cast<std::ptrdiff_t>(r * dim_), dim_, Real(0));
            relation_touched_[r] = 0;
        }
        touched_entities_.clear();
        touched_relations_.clear();
    }

private:
    std::size_t dim_;
    std::vector<Real> entity_;
    std::vector<Real> relation_;
    std::vector<char> entity_touched_;
    std::vector<char> relation_touched_;
    std::vector<EntityId> touched_entities_;
    std::vector<RelationId> touched_relations_;
};

namespace detail {

// Adds scale * dE/dparams for one triple. At zero residual the
// subgradient 0 is used.
template <typename Real>
void add_energy_gradient(const EmbeddingModel<Real>& model, const Triple& t, Real scale,
                         SparseGradient<Real>& grad) {
    const auto s = model.entity(t.subject);
    const auto r = model.relation(t.relation);
    const auto o = model.entity(t.object);
    const std::size_t d = model.dim();
    std::vector<Real> u(d);
    Real sum = 0;
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = s[i] + r[i] - o[i];
        sum += u[i] * u[i];
    }
    const Real norm = std::sqrt(sum);
    if (norm == Real(0)) return;
    const Real k = scale / norm;
    auto gs = grad.entity_row(t.subject);
    for (std::size_t i = 0; i < d; ++i) gs[i] += k * u[i];
    auto gr = grad.relation_row(t.relation);
    for (std::size_t i = 0; i < d; ++i) gr[i] += k * u[i];
    auto go = grad.entity_row(t.object);
    for (std::size_t i = 0; i < d; ++i) go[i] -= k * u[i];
}

}  // namespace detail

// Weighted margin loss of aligned (positive, negative) pairs; adds its
// gradient into `grad` when given.
template <typename Real>
double batch_loss(const EmbeddingModel<Real>& model, std::span<const Triple> positives,
                  std::span<const Triple> negatives, std::span<const double> weights, double margin,
                  SparseGradient<Real>* grad = nullptr) {
    if (positives.size() != negatives.size() || positives.size() != weights.size())
        throw ValidationError("batch_loss: positives, negatives and weights must align");
    double loss = 0.0;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        const Real e_pos = energy(model, positives[i]);
        const Real e_neg = energy(model, negatives[i]);
        const double h = hinge(margin, static_cast<double>(e_pos), static_cast<double>(e_neg));
        if (std::isnan(h)) return h;
        if (h <= 0.0) continue;
        loss += weights[i] * h;
        if (grad) {
            const auto w = static_cast<Real>(weights[i]);
            detail::add_energy_gradient(model, positives[i], w, *grad);
            detail::add_energy_gradient(model, negatives[i], -w, *grad);
        }
    }
    return loss;
}

template <typename Real>
void normalize_rows(std::vector<Real>& data, std::size_t dim) {
    for (std::size_t off = 0; off < data.size(); off += dim) {
        Real sum = 0;
        for (std::size_t i = 0; i < dim; ++i) sum += data[off + i] * data[off + i];
        const Real norm = std::sqrt(sum);
        if (norm > Real(0))
            for (std::size_t i = 0; i < dim; ++i) data[off + i] /= norm;
    }
}

// Uniform [-6/sqrt(d), 6/sqrt(d)] initialization, rows normalized.
template <typename Real>
EmbeddingModel<Real> init_model(std::size_t entities, std::size_t relations, std::size_t dim, Rng& rng) {
    EmbeddingModel<Real> model(entities, relations, dim);
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    for (auto& x : model.entity_data()) x = static_cast<Real>(uniform_real(rng, -bound, bound));
    for (auto& x : model.relation_data()) x = static_cast<Real>(uniform_real(rng, -bound, bound));
    normalize_rows(model.entity_data(), dim);
    normalize_rows(model.relation_data(), dim);
    return model;
}

// Mean unweighted hinge loss of `triples` against freshly sampled negatives.
template <typename Real>
double validation_loss(const EmbeddingModel<Real>& model, const KnowledgeGraph& graph,
                       std::span<const TripleId> triples, const TripleSet& training, double margin, Rng& rng,
                       int retries) {
    double total = 0.0;
    for (TripleId id : triples) {
        const Triple& t = graph.triple(id);
        const Triple neg = sample_negative(training, model.entity_count(), t, rng, retries);
        total += hinge(margin, static_cast<double>(energy(model, t)), static_cast<double>(energy(model, neg)));
    }
    return triples.empty() ? 0.0 : total / static_cast<double>(triples.size());
}

namespace detail {

// Lock-free per-sample updates; concurrent writers may interleave on shared
// rows, which only perturbs convergence.
template <typename Real>
void hogwild_epoch(EmbeddingModel<Real>& model, const KnowledgeGraph& graph, std::span<const TripleId> order,
                   std::span<const double> weight_of, const TripleSet& training, const TrainingConfig& config,
                   std::uint64_t epoch_seed, std::atomic<bool>& non_finite) {
    const std::size_t d = model.dim();
    auto load = [](Real& x) { return std::atomic_ref<Real>(x).load(std::memory_order_relaxed); };
    auto store = [](Real& x, Real v) { std::atomic_ref<Real>(x).store(v, std::memory_order_relaxed); };
    auto worker = [&](std::size_t begin, std::size_t end, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<Real> up(d), un(d);
        for (std::size_t i = begin; i < end; ++i) {
            const TripleId id = order[i];
            const Triple& pos = graph.triple(id);
            const Triple neg = sample_negative(training, model.entity_count(), pos, rng, config.negative_retries);
            Real* s = model.entity(pos.subject).data();
            Real* o = model.entity(pos.object).data();
            Real* r = model.relation(pos.relation).data();
            Real* ns = model.entity(neg.subject).data();
            Real* no = model.entity(neg.object).data();
            Real sp = 0, sn = 0;
            for (std::size_t k = 0; k < d; ++k) {
                up[k] = load(s[k]) + load(r[k]) - load(o[k]);
                un[k] = load(ns[k]) + load(r[k]) - load(no[k]);
                sp += up[k] * up[k];
                sn += un[k] * un[k];
            }
            const Real ep = std::sqrt(sp), en = std::sqrt(sn);
            const double h = hinge(config.margin, ep, en);
            if (!std::isfinite(h)) non_finite = true;
            if (h <= 0.0) continue;
            const Real step = static_cast<Real>(config.learning_rate * weight_of[id]);
            const Real kp = ep > 0 ? step / ep : Real(0);
            const Real kn = en > 0 ? step / en : Real(0);
            for (std::size_t k = 0; k < d; ++k) {
                store(s[k], load(s[k]) - kp * up[k]);
                store(o[k], load(o[k]) + kp * up[k]);
                store(r[k], load(r[k]) - kp * up[k] + kn * un[k]);
                store(ns[k], load(ns[k]) + kn * un[k]);
                store(no[k], load(no[k]) - kn * un[k]);
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(config.threads, order.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(worker, order.size() * w / workers, order.size() * (w + 1) / workers,
                          derive_seed(epoch_seed, w));
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Trains on split.train with mini-batch SGD. With `confidences`, each
// positive's pair terms are weighted by confidence^lambda. The model from the
// epoch with the lowest validation loss is returned (the last epoch when the
// split has no validation triples).
template <typename Real = float>
EmbeddingModel<Real> train(const KnowledgeGraph& graph, const Split& split, const ConfidenceTable* confidences,
                           const TrainingConfig& config) {
    config.validate();
    if (split.train.empty()) throw ValidationError("training split is empty");

    std::vector<double> weight_of(graph.size(), 1.0);
    if (confidences) {
        for (TripleId id : split.train) {
            if (id >= confidences->size())
                throw ValidationError("no confidence score for training triple " + std::to_string(id));
            weight_of[id] = prge_weight((*confidences)[id], config.lambda);
        }
    }

    Rng rng(config.seed);
    Rng validation_rng(derive_seed(config.seed, 1));
    auto model = init_model<Real>(graph.entity_count(), graph.relation_count(), config.dim, rng);
    model.config = config;
    model.weighted = confidences != nullptr;

    const TripleSet training(graph, split.train);
    std::vector<TripleId> order = split.train;
    SparseGradient<Real> grad(graph.entity_count(), graph.relation_count(), config.dim);
    std::vector<Triple> pos, neg;
    std::vector<double> w;
    const bool hogwild = !config.deterministic && config.threads > 1;

    std::optional<EmbeddingModel<Real>> best;
    int since_best = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        if (hogwild) {
            std::atomic<bool> non_finite{false};
            detail::hogwild_epoch(model, graph, order, weight_of, training, config, rng(), non_finite);
            if (non_finite) epoch_loss = std::numeric_limits<double>::quiet_NaN();
        } else {
            for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
                const std::size_t end = std::min(order.size(), begin + config.batch_size);
                pos.clear();
                neg.clear();
                w.clear();
                for (std::size_t i = begin; i < end; ++i) {
                    const Triple& t = graph.triple(order[i]);
                    pos.push_back(t);
                    neg.push_back(sample_negative(training, graph.entity_count(), t, rng, config.negative_retries));
                    w.push_back(weight_of[order[i]]);
                }
                epoch_loss += batch_loss<Real>(model, pos, neg, w, config.margin, &grad);
                const auto lr = static_cast<Real>(config.learning_rate);
                for (auto e : grad.touched_entities()) {
                    auto row = model.entity(e);
                    const auto g = grad.entity(e);
                    for (std::size_t k = 0; k < row.size(); ++k) row[k] -= lr * g[k];
                }
                for (auto r : grad.touched_relations()) {
                    auto row = model.relation(r);
                    const auto g = grad.relation(r);
                    for (std::size_t k = 0; k < row.size(); ++k) row[k] -= lr * g[k];
                }
                grad.clear();
            }
        }
        if (!std::isfinite(epoch_loss))
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                "; the learning rate is probably too high");
        normalize_rows(model.entity_data(), config.dim);
        model.epochs_trained = epoch;

        if (split.validation.empty()) continue;
        const double v = validation_loss(model, graph, split.validation, training, config.margin, validation_rng,
                                         config.negative_retries);
        if (!std::isfinite(v))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        if (!best || v < best->best_validation) {
            model.best_validation = v;
            model.best_epoch = epoch;
            best = model;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    if (best) {
        best->epochs_trained = model.epochs_trained;
        return *std::move(best);
    }
    model.best_epoch = model.epochs_trained;
    return model;
}

}  // namespace prge
