#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prge/detail/random.hpp"
#include "prge/embed.hpp"
#include "prge/eval.hpp"
#include "prge/graph.hpp"
#include "prge/graph_io.hpp"
#include "prge/noise.hpp"
#include "prge/pathrank.hpp"

// Building blocks shared by the pipeline and the acceptance suite: a noisy
// copy of a split dataset, and the two evaluations run on a trained model.

namespace prge {

enum class Method { transe, prge, pathrank };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::transe: return "transe";
        case Method::prge: return "prge";
        case Method::pathrank: return "pathrank";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "transe") return Method::transe;
    if (s == "prge") return Method::prge;
    if (s == "pathrank" || s == "pathrank-only") return Method::pathrank;
    throw ValidationError("unknown method '" + s + "'");
}

// Noise is imputed into the training part only. The resulting graph lists
// the noisy training triples first (ids 0..train_size-1), then validation,
// then test, all sharing the clean dataset's dictionaries.
struct NoisyDataset {
    KnowledgeGraph graph;
    Split split;
};

inline NoisyDataset make_noisy_dataset(const Dataset& clean, const NoiseConfig& noise) {
    const auto train = subgraph(clean.graph, clean.split.train);
    const auto noisy_train = impute_noise(train, noise, &clean.graph);
    NoisyDataset out{noisy_train, {}};
    out.split = Split::all_train(out.graph);
    for (TripleId id : clean.split.validation) {
        out.graph.add(clean.graph.triple(id));
        out.split.validation.push_back(out.graph.size() - 1);
    }
    for (TripleId id : clean.split.test) {
        out.graph.add(clean.graph.triple(id));
        out.split.test.push_back(out.graph.size() - 1);
    }
    return out;
}

// The training triples of `data` as their own graph (same ids, since they
// form the prefix).
inline KnowledgeGraph training_graph(const NoisyDataset& data) {
    return subgraph(data.graph, data.split.train);
}

struct DetectionMetrics {
    RankMetrics ranking;
    double auc = 0.0;
};

// Ranks `ids` by energy (higher = more suspicious) and scores the ranking
// against the graph's noise flags.
inline DetectionMetrics detection_metrics(const KnowledgeGraph& graph, std::span<const TripleId> ids,
                                          std::span<const double> energies) {
    std::vector<bool> is_noise(graph.size(), false);
    std::vector<bool> labels;
    labels.reserve(ids.size());
    for (TripleId id : ids) {
        is_noise[id] = graph.triple(id).is_noise;
        labels.push_back(is_noise[id]);
    }
    DetectionMetrics m;
    m.ranking = filtered_mean_rank(rank_triples(energies, ids), is_noise);
    m.auc = auc(normalize_scores(energies), labels);
    return m;
}

// Path-ranking "energy": low confidence means suspicious.
inline std::vector<double> confidence_energies(const ConfidenceTable& table, std::span<const TripleId> ids) {
    std::vector<double> out;
    out.reserve(ids.size());
    for (TripleId id : ids) out.push_back(1.0 - table[id]);
    return out;
}

// Each triple in `ids` as a positive, plus one corrupted negative per
// positive (absent from `graph`) drawn with the noise module's protocol.
// Every triple in `ids` must be known to the model.
template <typename Real>
std::vector<LabeledScore> classification_items(const EmbeddingModel<Real>& model, const KnowledgeGraph& graph,
                                               std::span<const TripleId> ids, NoiseProtocol protocol,
                                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledScore> items;
    items.reserve(2 * ids.size());
    for (TripleId id : ids) {
        const Triple& t = graph.triple(id);
        items.push_back({t.relation, static_cast<double>(energy(model, t)), true});
        auto neg = corrupt_triple(graph, t, protocol, rng);
        if (!neg && protocol != NoiseProtocol::random) neg = corrupt_triple(graph, t, NoiseProtocol::random, rng);
        // Entities the model never saw (appended after its dictionary) cannot be scored.
        if (neg && neg->subject < model.entity_count() && neg->object < model.entity_count())
            items.push_back({neg->relation, static_cast<double>(energy(model, *neg)), false});
    }
    return items;
}

}  // namespace prge
