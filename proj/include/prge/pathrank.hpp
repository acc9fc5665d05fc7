#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prge/detail/parallel.hpp"
#include "prge/detail/random.hpp"
#include "prge/error.hpp"
#include "prge/graph.hpp"
#include "prge/graph_io.hpp"
#include "prge/noise.hpp"

// Path-ranking confidence scorer. Relation sequences connecting a pair of
// entities are the features; each relation gets its own logistic model
// separating its triples from locally corrupted pairs, and its probability
// output is the triple's confidence (low = probably noise).

namespace prge {

// A walk's relation sequence, each step signed by traversal direction.
using PathFeature = std::vector<SignedRelation>;

// Multiset of path features: feature -> number of realizing walks (capped).
using PathCounts = std::map<PathFeature, std::uint32_t>;

inline constexpr std::uint32_t kMaxPathMultiplicity = 255;

inline std::string format_path(const KnowledgeGraph& graph, const PathFeature& path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) out += '/';
        out += graph.relations().label(path[i].relation());
        if (path[i].is_inverse()) out += "^-1";
    }
    return out;
}

// Every relation sequence of length 1..max_len realized by a walk from `s`
// to `o` over forward and inverse edges, with walk multiplicities capped at
// kMaxPathMultiplicity. The edge `excluded` (when given) is never walked in
// either direction.
inline PathCounts enumerate_paths(const KnowledgeGraph& graph, EntityId s, EntityId o, int max_len,
                                  const std::optional<Triple>& excluded = std::nullopt) {
    if (max_len < 1) throw ValidationError("max_len must be at least 1");
    static constexpr std::uint64_t saturate = std::uint64_t{1} << 40;
    auto add_sat = [](std::uint64_t a, std::uint64_t b) { return std::min(a + b, saturate); };
    auto is_excluded = [&](EntityId from, SignedRelation step, EntityId to) {
        if (!excluded) return false;
        if (step.relation() != excluded->relation) return false;
        return step.is_inverse() ? (to == excluded->subject && from == excluded->object)
                                 : (from == excluded->subject && to == excluded->object);
    };

    std::map<PathFeature, std::uint64_t> found;
    // Walks aggregated by (relation sequence so far, current entity).
    std::map<std::pair<PathFeature, EntityId>, std::uint64_t> frontier{{{PathFeature{}, s}, 1}};
    for (int depth = 0; depth < max_len && !frontier.empty(); ++depth) {
        for (const auto& [state, count] : frontier) {
            const auto& [path, at] = state;
            for (SignedRelation step : graph.connections(at, o)) {
                if (is_excluded(at, step, o)) continue;
                PathFeature p = path;
                p.push_back(step);
                auto& slot = found[std::move(p)];
                slot = add_sat(slot, count);
            }
        }
        if (depth + 1 == max_len) break;
        std::map<std::pair<PathFeature, EntityId>, std::uint64_t> next;
        for (const auto& [state, count] : frontier) {
            const auto& [path, at] = state;
            auto extend = [&](SignedRelation step, EntityId to) {
                if (is_excluded(at, step, to)) return;
                PathFeature p = path;
                p.push_back(step);
                auto& slot = next[{std::move(p), to}];
                slot = add_sat(slot, count);
            };
            for (const auto& e : graph.out_edges(at)) extend(SignedRelation::forward(e.relation), e.entity);
            for (const auto& e : graph.in_edges(at)) extend(SignedRelation::inverse(e.relation), e.entity);
        }
        frontier = std::move(next);
    }

    PathCounts out;
    for (auto& [path, count] : found)
        out.emplace(path, static_cast<std::uint32_t>(std::min<std::uint64_t>(count, kMaxPathMultiplicity)));
    return out;
}

struct PathRankParams {
    int max_len = 2;
    int features_per_relation = 50;
    int negatives_per_positive = 2;
    std::size_t min_support = 5;
    std::uint64_t seed = 0;
    bool binarize = false;
    double l2 = 1e-3;
    int iterations = 1000;
    // Confidence for triples whose relation has no scorer.
    double prior = 0.5;
    // 0 scores training triples in-sample; k >= 2 scores each triple with a
    // model trained on the other k-1 folds of its relation.
    int folds = 0;
    unsigned threads = 1;
};

// Logistic model over path-count features for one relation.
struct RelationScorer {
    RelationId relation = 0;
    std::vector<PathFeature> features;
    // Per-feature divisor applied to raw counts (max seen in training).
    std::vector<double> scale;
    std::vector<double> weights;
    double bias = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    int negatives_per_positive = 0;
    std::uint64_t seed = 0;
    bool binarize = false;

    std::vector<double> featurize(const PathCounts& counts) const {
        std::vector<double> x(features.size(), 0.0);
        for (std::size_t j = 0; j < features.size(); ++j) {
            auto it = counts.find(features[j]);
            if (it == counts.end()) continue;
            const double raw = binarize ? 1.0 : static_cast<double>(it->second);
            x[j] = raw / scale[j];
        }
        return x;
    }

    double predict(const std::vector<double>& x) const {
        double z = bias;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        const double p = 1.0 / (1.0 + std::exp(-z));
        return std::clamp(p, 0.0, 1.0);
    }
};

struct PathRankModel {
    PathRankParams params;
    std::map<RelationId, RelationScorer> scorers;
};

namespace detail {

struct PathExample {
    EntityId subject;
    EntityId object;
    bool positive;
    PathCounts paths;
};

// Positives are the given triples (their own edge excluded from their
// paths); negatives replace the subject or object with an entity seen on
// that side of the relation, falling back to any entity.
inline std::vector<PathExample> build_examples(const KnowledgeGraph& graph, RelationId relation,
                                               std::span<const TripleId> positives, const PathRankParams& params,
                                               Rng& rng) {
    std::vector<PathExample> examples;
    examples.reserve(positives.size() * static_cast<std::size_t>(1 + params.negatives_per_positive));
    std::set<std::pair<EntityId, EntityId>> negative_pairs;
    auto taken = [&](const Triple& c) {
        return graph.contains(c) || negative_pairs.contains({c.subject, c.object});
    };
    for (TripleId id : positives) {
        const Triple& t = graph.triple(id);
        examples.push_back({t.subject, t.object, true, {}});
        for (int k = 0; k < params.negatives_per_positive; ++k) {
            const auto side = fair_coin(rng) ? CorruptSide::subject : CorruptSide::object;
            auto neg = corrupt_with(graph, t, side, NoiseProtocol::same_relation, rng, 100, taken);
            if (!neg) neg = corrupt_with(graph, t, side, NoiseProtocol::random, rng, 100, taken);
            if (!neg) continue;
            negative_pairs.insert({neg->subject, neg->object});
            examples.push_back({neg->subject, neg->object, false, {}});
        }
    }
    for (auto& ex : examples) {
        std::optional<Triple> self;
        if (ex.positive) self = Triple{ex.subject, relation, ex.object, false};
        ex.paths = enumerate_paths(graph, ex.subject, ex.object, params.max_len, self);
    }
    return examples;
}

// Features ranked by |positive occurrence rate - negative occurrence rate|,
// then shorter first, then by signed relation codes. Features with no rate
// difference and the relation's own single forward step are dropped.
inline std::vector<PathFeature> rank_features(const std::vector<PathExample>& examples, RelationId relation,
                                              int m) {
    if (m <= 0) return {};
    std::map<PathFeature, std::pair<std::size_t, std::size_t>> occurrences;
    std::size_t pos = 0, neg = 0;
    for (const auto& ex : examples) {
        (ex.positive ? pos : neg)++;
        for (const auto& [path, count] : ex.paths) {
            auto& o = occurrences[path];
            (ex.positive ? o.first : o.second)++;
        }
    }
    const PathFeature trivial{SignedRelation::forward(relation)};
    struct Ranked {
        double relevance;
        const PathFeature* path;
    };
    std::vector<Ranked> ranked;
    for (const auto& [path, o] : occurrences) {
        if (path == trivial) continue;
        const double pr = pos ? static_cast<double>(o.first) / static_cast<double>(pos) : 0.0;
        const double nr = neg ? static_cast<double>(o.second) / static_cast<double>(neg) : 0.0;
        const double rel = std::abs(pr - nr);
        if (rel == 0.0) continue;
        ranked.push_back({rel, &path});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        if (a.path->size() != b.path->size()) return a.path->size() < b.path->size();
        return *a.path < *b.path;
    });
    if (ranked.size() > static_cast<std::size_t>(m)) ranked.resize(static_cast<std::size_t>(m));
    std::vector<PathFeature> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(*r.path);
    return out;
}

// L2-regularized logistic regression by full-batch gradient descent with a
// step of 1/L, L bounding the loss curvature for inputs scaled into [0, 1].
inline void fit_logistic(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                         const PathRankParams& params, std::vector<double>& w, double& b) {
    const std::size_t n = x.size();
    const std::size_t d = w.size();
    if (n == 0) return;
    double max_sq = 0.0;
    for (const auto& row : x) {
        double sq = 1.0;
        for (double v : row) sq += v * v;
        max_sq = std::max(max_sq, sq);
    }
    const double step = 1.0 / (0.25 * max_sq + params.l2);
    std::vector<double> grad(d);
    for (int it = 0; it < params.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
            const double r = 1.0 / (1.0 + std::exp(-z)) - y[i];
            for (std::size_t j = 0; j < d; ++j) grad[j] += r * x[i][j];
            gb += r;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) w[j] -= step * (grad[j] * inv_n + params.l2 * w[j]);
        b -= step * gb * inv_n;
    }
}

inline std::optional<RelationScorer> train_relation(const KnowledgeGraph& graph, RelationId relation,
                                                    std::span<const TripleId> positives,
                                                    const PathRankParams& params, std::uint64_t stream) {
    if (positives.size() < params.min_support) return std::nullopt;
    Rng rng(derive_seed(params.seed, stream));
    const auto examples = build_examples(graph, relation, positives, params, rng);

    RelationScorer scorer;
    scorer.relation = relation;
    scorer.features = rank_features(examples, relation, params.features_per_relation);
    scorer.negatives_per_positive = params.negatives_per_positive;
    scorer.seed = params.seed;
    scorer.binarize = params.binarize;
    for (const auto& ex : examples) (ex.positive ? scorer.positives : scorer.negatives)++;

    scorer.scale.assign(scorer.features.size(), 1.0);
    for (std::size_t j = 0; j < scorer.features.size(); ++j) {
        for (const auto& ex : examples) {
            auto it = ex.paths.find(scorer.features[j]);
            if (it != ex.paths.end() && !params.binarize)
                scorer.scale[j] = std::max(scorer.scale[j], static_cast<double>(it->second));
        }
    }
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    x.reserve(examples.size());
    for (const auto& ex : examples) {
        x.push_back(scorer.featurize(ex.paths));
        y.push_back(ex.positive ? 1.0 : 0.0);
    }
    scorer.weights.assign(scorer.features.size(), 0.0);
    fit_logistic(x, y, params, scorer.weights, scorer.bias);
    return scorer;
}

}  // namespace detail

// Up to m path features for `relation`, ranked by how differently often
// they connect the relation's triples versus corrupted pairs. Empty when the
// relation has fewer than params.min_support triples.
inline std::vector<PathFeature> select_features(const KnowledgeGraph& graph, RelationId relation,
                                                const PathRankParams& params) {
    const auto positives = graph.relation_triples(relation);
    if (positives.size() < params.min_support || params.features_per_relation <= 0) return {};
    Rng rng(derive_seed(params.seed, relation));
    const auto examples = detail::build_examples(graph, relation, positives, params, rng);
    return detail::rank_features(examples, relation, params.features_per_relation);
}

// One scorer per relation with at least min_support triples. Each relation
// draws from its own seeded stream, so the result does not depend on the
// number of worker threads.
inline PathRankModel train_scorers(const KnowledgeGraph& graph, const PathRankParams& params) {
    if (graph.empty()) throw ValidationError("cannot train path scorers on an empty graph");
    std::vector<std::optional<RelationScorer>> trained(graph.relation_count());
    parallel_for(graph.relation_count(), params.threads, [&](std::size_t r) {
        const auto rel = static_cast<RelationId>(r);
        trained[r] = detail::train_relation(graph, rel, graph.relation_triples(rel), params, rel);
    });
    PathRankModel model;
    model.params = params;
    for (auto& s : trained)
        if (s) model.scorers.emplace(s->relation, std::move(*s));
    return model;
}

// Confidence in [0, 1] for `triple`; the triple's own edge is never used as
// evidence for itself.
inline double score_triple(const PathRankModel& model, const KnowledgeGraph& graph, const Triple& triple) {
    auto it = model.scorers.find(triple.relation);
    if (it == model.scorers.end()) return model.params.prior;
    std::optional<Triple> self;
    if (graph.contains(triple)) self = triple;
    const auto paths = enumerate_paths(graph, triple.subject, triple.object, model.params.max_len, self);
    return it->second.predict(it->second.featurize(paths));
}

// Per-triple confidences, indexed by triple id.
struct ConfidenceTable {
    std::vector<double> scores;

    std::size_t size() const noexcept { return scores.size(); }
    double operator[](TripleId id) const { return scores.at(id); }
};

// Scores are kept on the 1e-6 grid the score file stores, so a table and
// its file round-trip exactly.
inline double quantize_score(double p) { return std::round(std::clamp(p, 0.0, 1.0) * 1e6) / 1e6; }

inline ConfidenceTable score_graph(const PathRankModel& model, const KnowledgeGraph& graph) {
    ConfidenceTable table;
    table.scores.resize(graph.size());
    parallel_for(graph.size(), model.params.threads, [&](std::size_t i) {
        table.scores[i] = quantize_score(score_triple(model, graph, graph.triple(i)));
    });
    return table;
}

// Scores every triple of a relation with a scorer trained on the other
// folds of that relation; relations too small to train fall back to the prior.
inline ConfidenceTable cross_validated_scores(const KnowledgeGraph& graph, const PathRankParams& params) {
    if (params.folds < 2) throw ValidationError("cross-validated scoring needs at least 2 folds");
    ConfidenceTable table;
    table.scores.assign(graph.size(), quantize_score(params.prior));
    parallel_for(graph.relation_count(), params.threads, [&](std::size_t r) {
        const auto rel = static_cast<RelationId>(r);
        std::vector<TripleId> ids(graph.relation_triples(rel).begin(), graph.relation_triples(rel).end());
        Rng rng(derive_seed(params.seed ^ 0x5f0f0f0fULL, rel));
        shuffle(ids.begin(), ids.end(), rng);
        const auto k = static_cast<std::size_t>(params.folds);
        for (std::size_t f = 0; f < k; ++f) {
            std::vector<TripleId> train, held_out;
            for (std::size_t i = 0; i < ids.size(); ++i) (i % k == f ? held_out : train).push_back(ids[i]);
            std::sort(train.begin(), train.end());
            auto scorer = detail::train_relation(graph, rel, train, params, rel * k + f);
            if (!scorer) continue;
            PathRankModel single;
            single.params = params;
            single.scorers.emplace(rel, std::move(*scorer));
            for (TripleId id : held_out)
                table.scores[id] = quantize_score(score_triple(single, graph, graph.triple(id)));
        }
    });
    return table;
}

inline void save_scores(const ConfidenceTable& table, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    char buf[32];
    for (TripleId i = 0; i < table.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", table.scores[i]);
        out << i << '\t' << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// Reads a score file; every index 0..n-1 must appear exactly once.
inline ConfidenceTable load_scores(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::vector<std::pair<TripleId, double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = detail::strip_cr(line);
        if (view.empty()) continue;
        const auto fields = detail::split_tabs(view);
        if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected index<TAB>score");
        try {
            std::size_t used_id = 0, used_score = 0;
            const std::string id_text(fields[0]), score_text(fields[1]);
            const TripleId id = std::stoull(id_text, &used_id);
            const double score = std::stod(score_text, &used_score);
            if (used_id != id_text.size() || used_score != score_text.size()) throw std::invalid_argument("trailing");
            if (!(score >= 0.0 && score <= 1.0)) throw ParseError(path.string(), line_no, "score outside [0,1]");
            rows.emplace_back(id, score);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(path.string(), line_no, "malformed score line");
        }
    }
    ConfidenceTable table;
    table.scores.assign(rows.size(), -1.0);
    for (const auto& [id, score] : rows) {
        if (id >= rows.size() || table.scores[id] >= 0.0)
            throw ValidationError(path.string() + ": triple indices must be 0..n-1, each once");
        table.scores[id] = score;
    }
    return table;
}

}  // namespace prge
