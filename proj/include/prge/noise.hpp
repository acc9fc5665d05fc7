#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "prge/detail/random.hpp"
#include "prge/error.hpp"
#include "prge/graph.hpp"

namespace prge {

enum class NoiseProtocol {
    random,         // replacement drawn from every entity
    same_relation,  // replacement must have appeared on that side of the same relation
};

enum class CorruptSide { subject, object };

struct NoiseConfig {
    double ratio = 0.10;
    NoiseProtocol protocol = NoiseProtocol::random;
    std::uint64_t seed = 0;
    // Candidate draws per source triple before giving up on it.
    int retry_budget = 100;
};

inline const char* to_string(NoiseProtocol p) {
    return p == NoiseProtocol::random ? "random" : "same-relation";
}

inline NoiseProtocol parse_noise_protocol(const std::string& s) {
    if (s == "random") return NoiseProtocol::random;
    if (s == "same-relation" || s == "same_relation") return NoiseProtocol::same_relation;
    throw ValidationError("unknown noise protocol '" + s + "'");
}

// round(ratio * n), halves rounded up.
inline std::size_t noise_target(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

namespace detail {

// Draws up to `retries` replacements for one side of `t`. The pool (every
// entity, or the entities seen on that side of t.relation in `pool_graph`)
// never offers the original entity back. `taken(candidate)` rejects
// candidates that already exist.
template <typename Taken>
std::optional<Triple> corrupt_with(const KnowledgeGraph& pool_graph, const Triple& t, CorruptSide side,
                                   NoiseProtocol protocol, Rng& rng, int retries, Taken&& taken) {
    const EntityId original = side == CorruptSide::subject ? t.subject : t.object;
    if (protocol == NoiseProtocol::random) {
        // Every entity but the original: draw from n-1 slots and skip over it.
        const std::size_t choices = pool_graph.entity_count() - (original < pool_graph.entity_count() ? 1 : 0);
        if (choices == 0) return std::nullopt;
        for (int attempt = 0; attempt < retries; ++attempt) {
            auto candidate = static_cast<EntityId>(uniform_index(rng, choices));
            if (candidate >= original) ++candidate;
            Triple c = t;
            c.is_noise = false;
            (side == CorruptSide::subject ? c.subject : c.object) = candidate;
            if (!taken(c)) return c;
        }
        return std::nullopt;
    }
    const auto pool = side == CorruptSide::subject ? pool_graph.relation_subjects(t.relation)
                                                   : pool_graph.relation_objects(t.relation);
    if (pool.empty() || (pool.size() == 1 && pool[0] == original)) return std::nullopt;
    for (int attempt = 0; attempt < retries; ++attempt) {
        const EntityId candidate = pool[uniform_index(rng, pool.size())];
        if (candidate == original) continue;
        Triple c = t;
        c.is_noise = false;
        (side == CorruptSide::subject ? c.subject : c.object) = candidate;
        if (!taken(c)) return c;
    }
    return std::nullopt;
}

}  // namespace detail

// Replaces one chosen side of `triple`; nullopt when no legal replacement
// was found within the retry budget.
inline std::optional<Triple> corrupt_side(const KnowledgeGraph& graph, const Triple& triple, CorruptSide side,
                                          NoiseProtocol protocol, Rng& rng, int retries = 100) {
    return detail::corrupt_with(graph, triple, side, protocol, rng, retries,
                                [&](const Triple& c) { return graph.contains(c); });
}

// Replaces the subject or the object (fair coin) of `triple` so that the
// result is not in `graph`. nullopt signals the caller to pick another source.
inline std::optional<Triple> corrupt_triple(const KnowledgeGraph& graph, const Triple& triple,
                                            NoiseProtocol protocol, Rng& rng, int retries = 100) {
    const auto side = fair_coin(rng) ? CorruptSide::subject : CorruptSide::object;
    return corrupt_side(graph, triple, side, protocol, rng, retries);
}

// Copy of `graph` with round(ratio * |graph|) corrupted triples appended,
// flagged is_noise. Noise never collides with a stored triple, with another
// noise triple, or with any triple of `also_exclude` (when given; it must
// share dictionaries with `graph`).
inline KnowledgeGraph impute_noise(const KnowledgeGraph& graph, const NoiseConfig& config,
                                   const KnowledgeGraph* also_exclude = nullptr) {
    if (graph.empty()) throw ValidationError("cannot impute noise into an empty graph");
    if (!(config.ratio > 0.0 && config.ratio <= 1.0))
        throw ValidationError("noise ratio must lie in (0, 1]");

    KnowledgeGraph out = graph;
    const std::size_t target = noise_target(graph.size(), config.ratio);
    Rng rng(config.seed);

    auto taken = [&](const Triple& c) {
        return out.contains(c) || (also_exclude != nullptr && also_exclude->contains(c));
    };

    const std::size_t stall_limit = 10000 + 10 * target;
    std::size_t stalled = 0, added = 0;
    std::map<RelationId, std::size_t> failures;
    while (added < target) {
        const Triple& source = graph.triple(uniform_index(rng, graph.size()));
        const auto side = fair_coin(rng) ? CorruptSide::subject : CorruptSide::object;
        auto noisy = detail::corrupt_with(graph, source, side, config.protocol, rng, config.retry_budget, taken);
        if (!noisy) {
            ++failures[source.relation];
            if (++stalled > stall_limit) {
                const auto worst = std::max_element(failures.begin(), failures.end(),
                                                    [](auto& a, auto& b) { return a.second < b.second; });
                throw ValidationError("noise imputation stalled after " + std::to_string(added) + " of " +
                                      std::to_string(target) + " triples; no legal " + to_string(config.protocol) +
                                      " corruption left for relation '" +
                                      graph.relations().label(worst->first) + "'");
            }
            continue;
        }
        noisy->is_noise = true;
        out.add(*noisy);
        ++added;
        stalled = 0;
    }
    return out;
}

}  // namespace prge
