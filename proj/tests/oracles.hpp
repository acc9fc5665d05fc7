#pragma once

// Slow, obviously-correct reference implementations. They deliberately avoid
// the library's indexes and sorting helpers: everything is a scan over the
// raw triple list or an exhaustive pairwise loop.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "prge/eval.hpp"
#include "prge/graph.hpp"
#include "prge/noise.hpp"

namespace oracle {

using prge::EntityId;
using prge::KnowledgeGraph;
using prge::SignedRelation;
using prge::Triple;
using prge::TripleId;

// Every walk of length 1..max_len from s, one edge at a time over the raw
// triple list, in both directions; counts the walks that end at o per
// relation sequence. Multiplicities are capped the way the library caps them.
inline std::map<std::vector<SignedRelation>, std::uint32_t> walk_paths(const KnowledgeGraph& g, EntityId s,
                                                                        EntityId o, int max_len,
                                                                        std::optional<Triple> excluded = {}) {
    std::map<std::vector<SignedRelation>, std::uint64_t> raw;
    std::vector<SignedRelation> path;
    auto is_excluded = [&](const Triple& t) { return excluded && t.same_fact(*excluded); };
    auto walk = [&](auto&& self, EntityId at, int depth) -> void {
        if (depth > 0 && at == o) ++raw[path];
        if (depth == max_len) return;
        for (const auto& t : g.triples()) {
            if (is_excluded(t)) continue;
            if (t.subject == at) {
                path.push_back(SignedRelation::forward(t.relation));
                self(self, t.object, depth + 1);
                path.pop_back();
            }
            if (t.object == at) {
                path.push_back(SignedRelation::inverse(t.relation));
                self(self, t.subject, depth + 1);
                path.pop_back();
            }
        }
    };
    walk(walk, s, 0);
    std::map<std::vector<SignedRelation>, std::uint32_t> out;
    for (const auto& [p, n] : raw)
        out[p] = static_cast<std::uint32_t>(std::min<std::uint64_t>(n, prge::kMaxPathMultiplicity));
    return out;
}

// P(random positive-class score > random other score), ties 1/2, by
// enumerating every pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / pairs;
}

// Filtered rank of each noisy triple by direct counting: one plus the clean
// triples ordered before it (higher energy, or equal energy and smaller id).
struct FilteredRanks {
    double fmr = 0.0;
    double fmrr = 0.0;
};

inline FilteredRanks scan_filtered_ranks(const std::vector<double>& energies, const std::vector<TripleId>& ids,
                                         const std::vector<bool>& noisy) {
    FilteredRanks r;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!noisy[i]) continue;
        std::size_t above = 0;
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (noisy[j]) continue;
            if (energies[j] > energies[i] || (energies[j] == energies[i] && ids[j] < ids[i])) ++above;
        }
        const double rank = static_cast<double>(above + 1);
        r.fmr += rank;
        r.fmrr += 1.0 / rank;
        ++count;
    }
    r.fmr /= static_cast<double>(count);
    r.fmrr /= static_cast<double>(count);
    return r;
}

struct ThresholdChoice {
    double tau = 0.0;
    std::size_t correct = 0;
};

// Tries min-1, max+1 and the midpoint of every pair of distinct energies;
// keeps the most accurate, smallest tau on ties. Positive iff energy < tau.
inline ThresholdChoice exhaustive_threshold(const std::vector<prge::LabeledScore>& items) {
    std::vector<double> candidates;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& a : items) {
        lo = std::min(lo, a.energy);
        hi = std::max(hi, a.energy);
    }
    candidates.push_back(lo - 1.0);
    candidates.push_back(hi + 1.0);
    for (const auto& a : items)
        for (const auto& b : items) {
            if (!(a.energy < b.energy)) continue;
            // Only adjacent distinct values give midpoints the sweep uses.
            bool adjacent = true;
            for (const auto& c : items)
                if (c.energy > a.energy && c.energy < b.energy) adjacent = false;
            if (adjacent) candidates.push_back((a.energy + b.energy) / 2.0);
        }
    ThresholdChoice best{0.0, 0};
    bool first = true;
    for (double tau : candidates) {
        std::size_t correct = 0;
        for (const auto& it : items) correct += ((it.energy < tau) == it.positive) ? 1 : 0;
        if (first || correct > best.correct || (correct == best.correct && tau < best.tau)) best = {tau, correct};
        first = false;
    }
    return best;
}

// Every legal replacement for one side of t, by scanning the triple list.
inline std::set<EntityId> legal_corruptions(const KnowledgeGraph& g, const Triple& t, prge::CorruptSide side,
                                            prge::NoiseProtocol protocol) {
    std::set<EntityId> out;
    const bool subject = side == prge::CorruptSide::subject;
    for (EntityId e = 0; e < g.entity_count(); ++e) {
        if (e == (subject ? t.subject : t.object)) continue;
        Triple c = t;
        (subject ? c.subject : c.object) = e;
        bool exists = false, seen_with_relation = false;
        for (const auto& u : g.triples()) {
            if (u.same_fact(c)) exists = true;
            if (u.relation == t.relation && (subject ? u.subject : u.object) == e) seen_with_relation = true;
        }
        if (exists) continue;
        if (protocol == prge::NoiseProtocol::same_relation && !seen_with_relation) continue;
        out.insert(e);
    }
    return out;
}

}  // namespace oracle
