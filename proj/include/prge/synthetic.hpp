#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prge/detail/random.hpp"
#include "prge/error.hpp"
#include "prge/graph.hpp"

// Synthetic graphs for tests, benchmarks and the demo pipeline.

namespace prge {

// Entities sit in ordered clusters (c, i). Relation j links (c, i) to
// (c + j + 1, i + k) for every offset k in `offsets` (mod cluster size),
// so relations compose: j1 followed by j2 lands where j1 + j2 + 1 does.
// That gives every relation both a translational layout and path evidence.
struct PlantedGraphParams {
    std::size_t clusters = 10;
    std::size_t cluster_size = 20;
    std::size_t relations = 5;
    std::vector<std::size_t> offsets{0, 1, 3};
};

inline KnowledgeGraph planted_graph(const PlantedGraphParams& p = {}) {
    if (p.clusters < 2 || p.cluster_size == 0 || p.relations == 0 || p.offsets.empty())
        throw ValidationError("degenerate planted graph parameters");
    KnowledgeGraph g;
    auto name = [](std::size_t c, std::size_t i) { return "e" + std::to_string(c) + "_" + std::to_string(i); };
    for (std::size_t c = 0; c < p.clusters; ++c)
        for (std::size_t i = 0; i < p.cluster_size; ++i) g.intern_entity(name(c, i));
    for (std::size_t j = 0; j < p.relations; ++j) {
        const std::string rel = "r" + std::to_string(j);
        g.intern_relation(rel);
        for (std::size_t c = 0; c + j + 1 < p.clusters; ++c)
            for (std::size_t i = 0; i < p.cluster_size; ++i)
                for (std::size_t k : p.offsets) g.add(name(c, i), rel, name(c + j + 1, (i + k) % p.cluster_size));
    }
    return g;
}

// A uniformly random graph with roughly Zipf-distributed relation sizes,
// shaped like the large benchmark graphs (many relations, a few dominant).
inline KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples,
                                   std::uint64_t seed) {
    if (entities < 2 || relations == 0) throw ValidationError("random graph needs entities and relations");
    if (static_cast<double>(triples) > 0.5 * static_cast<double>(entities) * static_cast<double>(entities))
        throw ValidationError("random graph too dense");
    KnowledgeGraph g;
    for (std::size_t e = 0; e < entities; ++e) g.intern_entity("m" + std::to_string(e));
    for (std::size_t r = 0; r < relations; ++r) g.intern_relation("/rel/" + std::to_string(r));
    std::vector<double> cumulative(relations);
    double total = 0.0;
    for (std::size_t r = 0; r < relations; ++r) {
        total += 1.0 / std::pow(static_cast<double>(r + 1), 0.8);
        cumulative[r] = total;
    }
    Rng rng(seed);
    // Every relation gets at least two triples so each has two subjects.
    for (std::size_t r = 0; r < relations && g.size() < triples; ++r) {
        for (int k = 0; k < 2; ++k) {
            Triple t{static_cast<EntityId>(uniform_index(rng, entities)), static_cast<RelationId>(r),
                     static_cast<EntityId>(uniform_index(rng, entities)), false};
            g.add(t);
        }
    }
    while (g.size() < triples) {
        const double u = uniform_unit(rng) * total;
        const auto r = static_cast<RelationId>(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                                               cumulative.begin());
        Triple t{static_cast<EntityId>(uniform_index(rng, entities)), std::min<RelationId>(r, relations - 1),
                 static_cast<EntityId>(uniform_index(rng, entities)), false};
        g.add(t);
    }
    return g;
}

// Deterministic shuffled split of every triple id.
inline Split random_split(const KnowledgeGraph& graph, double validation_fraction, double test_fraction,
                          std::uint64_t seed) {
    if (validation_fraction < 0 || test_fraction < 0 || validation_fraction + test_fraction >= 1.0)
        throw ValidationError("split fractions must be non-negative and sum below 1");
    std::vector<TripleId> ids(graph.size());
    for (TripleId i = 0; i < ids.size(); ++i) ids[i] = i;
    Rng rng(seed);
    shuffle(ids.begin(), ids.end(), rng);
    const auto n_valid = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(ids.size())));
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(ids.size())));
    Split s;
    s.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_valid),
                  ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
    s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), ids.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

}  // namespace prge
