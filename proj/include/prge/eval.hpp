#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "prge/embed.hpp"
#include "prge/error.hpp"
#include "prge/graph.hpp"

// Error-detection and triple-classification metrics. Energies follow the
// embedding convention: higher means more suspicious.

namespace prge {

// Triple ids by descending energy, ties by ascending id.
struct RankedList {
    std::vector<TripleId> ids;
    std::vector<double> energies;
};

inline RankedList rank_triples(std::span<const double> energies, std::span<const TripleId> ids) {
    if (energies.size() != ids.size()) throw ValidationError("rank_triples: energies and ids must align");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < energies.size(); ++i)
        if (!std::isfinite(energies[i]))
            throw ValidationError("non-finite energy for triple " + std::to_string(ids[i]));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (energies[a] != energies[b]) return energies[a] > energies[b];
        return ids[a] < ids[b];
    });
    RankedList out;
    out.ids.reserve(order.size());
    out.energies.reserve(order.size());
    for (auto i : order) {
        out.ids.push_back(ids[i]);
        out.energies.push_back(energies[i]);
    }
    return out;
}

// Energies indexed by triple id 0..n-1.
inline RankedList rank_triples(std::span<const double> energies) {
    std::vector<TripleId> ids(energies.size());
    std::iota(ids.begin(), ids.end(), TripleId{0});
    return rank_triples(energies, ids);
}

template <typename Real>
std::vector<double> triple_energies(const EmbeddingModel<Real>& model, const KnowledgeGraph& graph,
                                    std::span<const TripleId> ids) {
    std::vector<double> out;
    out.reserve(ids.size());
    for (TripleId id : ids) out.push_back(static_cast<double>(energy(model, graph.triple(id))));
    return out;
}

struct RankMetrics {
    double fmr = 0.0;
    double fmrr = 0.0;
    std::size_t noisy = 0;
};

// Filtered ranking: a noisy triple's rank is its 1-based position after all
// other noisy triples are removed, i.e. one plus the clean triples above it.
// `is_noise` is indexed by triple id.
inline RankMetrics filtered_mean_rank(const RankedList& ranked, const std::vector<bool>& is_noise) {
    RankMetrics m;
    std::size_t clean_above = 0;
    for (TripleId id : ranked.ids) {
        if (id >= is_noise.size()) throw ValidationError("noise label missing for triple " + std::to_string(id));
        if (!is_noise[id]) {
            ++clean_above;
            continue;
        }
        const double rank = static_cast<double>(clean_above + 1);
        m.fmr += rank;
        m.fmrr += 1.0 / rank;
        ++m.noisy;
    }
    if (m.noisy == 0) throw ValidationError("filtered ranking needs at least one noisy triple");
    m.fmr /= static_cast<double>(m.noisy);
    m.fmrr /= static_cast<double>(m.noisy);
    return m;
}

// Global min-max normalization into [0, 1].
inline std::vector<double> normalize_scores(std::span<const double> energies) {
    if (energies.empty()) throw ValidationError("cannot normalize an empty score list");
    const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
    if (!(*hi > *lo)) throw ValidationError("all scores are equal; normalization and AUC are undefined");
    const double range = *hi - *lo;
    std::vector<double> out;
    out.reserve(energies.size());
    for (double e : energies) out.push_back((e - *lo) / range);
    return out;
}

// Mann-Whitney AUC: probability a random positive-class item (label true)
// scores above a random negative-class item, ties counting one half.
inline double auc(std::span<const double> scores, const std::vector<bool>& positive_class) {
    if (scores.size() != positive_class.size()) throw ValidationError("auc: scores and labels must align");
    std::size_t n_pos = 0;
    for (bool b : positive_class) n_pos += b ? 1 : 0;
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("auc needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of (1-based, tie-averaged) ranks of the positive class, doubled to
    // stay in integers.
    long double twice_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const std::size_t twice_avg_rank = (i + 1) + j;  // 2 * (i+1 + j) / 2
        for (std::size_t k = i; k < j; ++k)
            if (positive_class[order[k]]) twice_rank_sum += static_cast<long double>(twice_avg_rank);
        i = j;
    }
    const long double twice_u = twice_rank_sum - static_cast<long double>(n_pos) * static_cast<long double>(n_pos + 1);
    return static_cast<double>(twice_u / 2.0L) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// One validation or test item for triple classification.
struct LabeledScore {
    RelationId relation = 0;
    double energy = 0.0;
    bool positive = false;
};

struct ThresholdTable {
    std::map<RelationId, double> thresholds;
    std::map<RelationId, double> relation_accuracy;
    double global = 0.0;
    double global_accuracy = 0.0;
    // Accuracy of the per-relation thresholds over the whole fitting set.
    double accuracy = 0.0;

    double threshold_for(RelationId r) const {
        auto it = thresholds.find(r);
        return it == thresholds.end() ? global : it->second;
    }
};

namespace detail {

struct ThresholdFit {
    double tau = 0.0;
    std::size_t correct = 0;
};

// Sweeps tau over min-1, the midpoints between consecutive distinct
// energies, and max+1; predicts positive iff energy < tau. Keeps the
// smallest tau among the most accurate.
inline ThresholdFit sweep_threshold(std::vector<LabeledScore> items) {
    std::sort(items.begin(), items.end(),
              [](const LabeledScore& a, const LabeledScore& b) { return a.energy < b.energy; });
    std::size_t negatives = 0;
    for (const auto& it : items) negatives += it.positive ? 0 : 1;
    // tau below everything: all predicted negative.
    ThresholdFit best{items.front().energy - 1.0, negatives};
    std::size_t correct = negatives;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        while (j < items.size() && items[j].energy == items[i].energy) {
            correct += items[j].positive ? 1 : 0;
            correct -= items[j].positive ? 0 : 1;
            ++j;
        }
        const double tau = j < items.size() ? (items[i].energy + items[j].energy) / 2.0 : items[i].energy + 1.0;
        if (correct > best.correct) best = {tau, correct};
        i = j;
    }
    return best;
}

}  // namespace detail

// Per-relation thresholds maximizing validation accuracy, plus a global
// threshold (fit on all items) for relations missing from validation.
inline ThresholdTable fit_thresholds(std::span<const LabeledScore> validation) {
    if (validation.empty()) throw ValidationError("cannot fit thresholds on an empty validation set");
    for (const auto& v : validation)
        if (!std::isfinite(v.energy)) throw ValidationError("non-finite validation energy");
    std::map<RelationId, std::vector<LabeledScore>> by_relation;
    for (const auto& v : validation) by_relation[v.relation].push_back(v);

    ThresholdTable table;
    const auto global = detail::sweep_threshold({validation.begin(), validation.end()});
    table.global = global.tau;
    table.global_accuracy = static_cast<double>(global.correct) / static_cast<double>(validation.size());
    std::size_t correct = 0;
    for (auto& [rel, items] : by_relation) {
        const auto fit = detail::sweep_threshold(items);
        table.thresholds[rel] = fit.tau;
        table.relation_accuracy[rel] = static_cast<double>(fit.correct) / static_cast<double>(items.size());
        correct += fit.correct;
    }
    table.accuracy = static_cast<double>(correct) / static_cast<double>(validation.size());
    return table;
}

struct ClassificationResult {
    double accuracy = 0.0;
    double roc_auc = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

// Accuracy under the thresholds plus threshold-free ROC-AUC (negatives are
// expected to have the higher energy). Items whose relation id is not below
// `known_relations` are skipped and counted.
inline ClassificationResult classify(std::span<const LabeledScore> test, const ThresholdTable& thresholds,
                                     std::size_t known_relations) {
    ClassificationResult result;
    std::vector<double> energies;
    std::vector<bool> negative;
    std::size_t correct = 0;
    for (const auto& item : test) {
        if (item.relation >= known_relations) {
            ++result.skipped;
            continue;
        }
        const bool predicted_positive = item.energy < thresholds.threshold_for(item.relation);
        correct += predicted_positive == item.positive ? 1 : 0;
        energies.push_back(item.energy);
        negative.push_back(!item.positive);
    }
    result.evaluated = energies.size();
    if (result.evaluated == 0) throw ValidationError("no classifiable test items");
    result.accuracy = static_cast<double>(correct) / static_cast<double>(result.evaluated);
    result.roc_auc = auc(energies, negative);
    return result;
}

}  // namespace prge
