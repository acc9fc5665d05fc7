#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace prge {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TripleId = std::size_t;

// One (subject, relation, object) fact. `is_noise` marks imputed triples; it
// is never consulted by training, only by evaluation.
struct Triple {
    EntityId subject = 0;
    RelationId relation = 0;
    EntityId object = 0;
    bool is_noise = false;

    bool same_fact(const Triple& other) const noexcept {
        return subject == other.subject && relation == other.relation && object == other.object;
    }

    friend bool operator==(const Triple&, const Triple&) = default;
};

enum class Direction { forward, inverse };

// A relation traversed in a given direction. Encoded as 2*r (+1 when
// inverse) so the natural ordering is (relation, forward-before-inverse).
class SignedRelation {
public:
    constexpr SignedRelation() = default;

    static constexpr SignedRelation forward(RelationId r) { return SignedRelation(2 * r); }
    static constexpr SignedRelation inverse(RelationId r) { return SignedRelation(2 * r + 1); }
    static constexpr SignedRelation from_code(std::uint32_t code) { return SignedRelation(code); }

    constexpr RelationId relation() const noexcept { return code_ >> 1; }
    constexpr bool is_inverse() const noexcept { return (code_ & 1U) != 0; }
    constexpr std::uint32_t code() const noexcept { return code_; }
    constexpr SignedRelation reversed() const noexcept { return SignedRelation(code_ ^ 1U); }

    friend constexpr auto operator<=>(SignedRelation, SignedRelation) = default;

private:
    constexpr explicit SignedRelation(std::uint32_t code) : code_(code) {}
    std::uint32_t code_ = 0;
};

// Dense, insertion-ordered label interning.
class Dictionary {
public:
    std::uint32_t intern(std::string_view label) {
        if (auto it = ids_.find(std::string(label)); it != ids_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(labels_.size());
        labels_.emplace_back(label);
        ids_.emplace(labels_.back(), id);
        return id;
    }

    std::optional<std::uint32_t> find(std::string_view label) const {
        if (auto it = ids_.find(std::string(label)); it != ids_.end()) return it->second;
        return std::nullopt;
    }

    const std::string& label(std::uint32_t id) const { return labels_.at(id); }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

// An adjacency entry: the edge's relation, the entity at the other end, and
// the stored triple that realizes it.
struct Edge {
    RelationId relation;
    EntityId entity;
    TripleId triple;
};

// A set of interned triples plus the indexes used by path enumeration and
// negative sampling. Built single-threaded through add(); afterwards every
// const member is safe to call concurrently.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Empty graph sharing the dictionaries of `other`, so ids stay compatible.
    static KnowledgeGraph with_dictionaries_of(const KnowledgeGraph& other) {
        KnowledgeGraph g;
        g.entities_ = other.entities_;
        g.relations_ = other.relations_;
        g.out_edges_.resize(g.entities_.size());
        g.in_edges_.resize(g.entities_.size());
        g.relation_triples_.resize(g.relations_.size());
        g.relation_subjects_.resize(g.relations_.size());
        g.relation_objects_.resize(g.relations_.size());
        return g;
    }

    EntityId intern_entity(std::string_view label) {
        const EntityId id = entities_.intern(label);
        if (id >= out_edges_.size()) {
            out_edges_.resize(id + 1);
            in_edges_.resize(id + 1);
        }
        return id;
    }

    RelationId intern_relation(std::string_view label) {
        const RelationId id = relations_.intern(label);
        if (id >= relation_triples_.size()) {
            relation_triples_.resize(id + 1);
            relation_subjects_.resize(id + 1);
            relation_objects_.resize(id + 1);
        }
        return id;
    }

    // Returns false (and counts a duplicate) when the fact is already stored.
    bool add(std::string_view subject, std::string_view relation, std::string_view object,
             bool is_noise = false) {
        Triple t;
        t.subject = intern_entity(subject);
        t.relation = intern_relation(relation);
        t.object = intern_entity(object);
        t.is_noise = is_noise;
        return add(t);
    }

    bool add(const Triple& t) {
        if (t.subject >= entities_.size() || t.object >= entities_.size())
            throw std::out_of_range("triple entity id outside dictionary");
        if (t.relation >= relations_.size())
            throw std::out_of_range("triple relation id outside dictionary");
        const TripleId id = triples_.size();
        if (!membership_.emplace(key(t), id).second) {
            ++duplicates_;
            return false;
        }
        triples_.push_back(t);

        auto& objs = out_index_[pair_key(t.subject, t.relation)];
        if (objs.empty()) relation_subjects_[t.relation].push_back(t.subject);
        objs.push_back(t.object);
        auto& subs = in_index_[pair_key(t.object, t.relation)];
        if (subs.empty()) relation_objects_[t.relation].push_back(t.object);
        subs.push_back(t.subject);

        relation_triples_[t.relation].push_back(id);
        out_edges_[t.subject].push_back({t.relation, t.object, id});
        in_edges_[t.object].push_back({t.relation, t.subject, id});
        connections_[pair_key(t.subject, t.object)].push_back(SignedRelation::forward(t.relation));
        connections_[pair_key(t.object, t.subject)].push_back(SignedRelation::inverse(t.relation));
        return true;
    }

    std::size_t size() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty(); }
    const std::vector<Triple>& triples() const noexcept { return triples_; }
    const Triple& triple(TripleId id) const { return triples_.at(id); }
    const Dictionary& entities() const noexcept { return entities_; }
    const Dictionary& relations() const noexcept { return relations_; }
    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }
    std::size_t duplicates_dropped() const noexcept { return duplicates_; }
    std::size_t noise_count() const noexcept {
        std::size_t n = 0;
        for (const auto& t : triples_) n += t.is_noise ? 1 : 0;
        return n;
    }

    bool contains(EntityId s, RelationId r, EntityId o) const {
        return membership_.contains(key(s, r, o));
    }
    bool contains(const Triple& t) const { return contains(t.subject, t.relation, t.object); }

    std::optional<TripleId> find(const Triple& t) const {
        if (auto it = membership_.find(key(t)); it != membership_.end()) return it->second;
        return std::nullopt;
    }

    // Objects o with (s, r, o) stored, in insertion order.
    std::span<const EntityId> objects(EntityId s, RelationId r) const {
        return lookup(out_index_, pair_key(s, r));
    }
    // Subjects s with (s, r, o) stored, in insertion order.
    std::span<const EntityId> subjects(EntityId o, RelationId r) const {
        return lookup(in_index_, pair_key(o, r));
    }
    // Every step leading from `from` to `to` in one hop, either along a
    // stored edge (forward) or against one (inverse).
    std::span<const SignedRelation> connections(EntityId from, EntityId to) const {
        return lookup(connections_, pair_key(from, to));
    }

    std::span<const TripleId> relation_triples(RelationId r) const { return relation_triples_.at(r); }
    // Distinct subjects (resp. objects) seen with relation r, first-seen order.
    std::span<const EntityId> relation_subjects(RelationId r) const { return relation_subjects_.at(r); }
    std::span<const EntityId> relation_objects(RelationId r) const { return relation_objects_.at(r); }

    std::span<const Edge> out_edges(EntityId e) const { return out_edges_.at(e); }
    std::span<const Edge> in_edges(EntityId e) const { return in_edges_.at(e); }

    // Total entries in the (subject, relation) and (object, relation) indexes.
    std::pair<std::size_t, std::size_t> index_cardinality() const {
        std::size_t out = 0, in = 0;
        for (const auto& [k, v] : out_index_) out += v.size();
        for (const auto& [k, v] : in_index_) in += v.size();
        return {out, in};
    }

    std::string describe(const Triple& t) const {
        return entities_.label(t.subject) + "\t" + relations_.label(t.relation) + "\t" +
               entities_.label(t.object);
    }

private:
    struct Key {
        std::uint32_t s, r, o;
        friend bool operator==(const Key&, const Key&) = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            std::uint64_t h = (static_cast<std::uint64_t>(k.s) << 32) | k.o;
            h ^= static_cast<std::uint64_t>(k.r) * 0x9e3779b97f4a7c15ULL;
            h ^= h >> 29;
            h *= 0xbf58476d1ce4e5b9ULL;
            return static_cast<std::size_t>(h ^ (h >> 32));
        }
    };

    static Key key(std::uint32_t s, std::uint32_t r, std::uint32_t o) { return {s, r, o}; }
    static Key key(const Triple& t) { return {t.subject, t.relation, t.object}; }
    static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    template <typename Map>
    static auto lookup(const Map& map, std::uint64_t k)
        -> std::span<const typename Map::mapped_type::value_type> {
        if (auto it = map.find(k); it != map.end()) return it->second;
        return {};
    }

    std::vector<Triple> triples_;
    Dictionary entities_;
    Dictionary relations_;
    std::unordered_map<Key, TripleId, KeyHash> membership_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> out_index_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> in_index_;
    std::unordered_map<std::uint64_t, std::vector<SignedRelation>> connections_;
    std::vector<std::vector<TripleId>> relation_triples_;
    std::vector<std::vector<EntityId>> relation_subjects_;
    std::vector<std::vector<EntityId>> relation_objects_;
    std::vector<std::vector<Edge>> out_edges_;
    std::vector<std::vector<Edge>> in_edges_;
    std::size_t duplicates_ = 0;
};

// One-hop neighbours of `entity`: forward yields (r, o) for every (entity, r, o);
// inverse yields (r^-1, s) for every (s, r, entity).
inline std::vector<std::pair<SignedRelation, EntityId>> neighbors(const KnowledgeGraph& graph,
                                                                  EntityId entity,
                                                                  Direction direction) {
    if (entity >= graph.entity_count())
        throw std::out_of_range("entity id " + std::to_string(entity) + " out of range");
    std::vector<std::pair<SignedRelation, EntityId>> out;
    if (direction == Direction::forward) {
        for (const auto& e : graph.out_edges(entity))
            out.emplace_back(SignedRelation::forward(e.relation), e.entity);
    } else {
        for (const auto& e : graph.in_edges(entity))
            out.emplace_back(SignedRelation::inverse(e.relation), e.entity);
    }
    return out;
}

// The triples `ids` (in that order) as a new graph with the same dictionaries.
inline KnowledgeGraph subgraph(const KnowledgeGraph& graph, std::span<const TripleId> ids) {
    auto g = KnowledgeGraph::with_dictionaries_of(graph);
    for (TripleId id : ids) g.add(graph.triple(id));
    return g;
}

// Fact-level membership set (noise flags ignored).
class TripleSet {
public:
    TripleSet() = default;
    TripleSet(const KnowledgeGraph& graph, std::span<const TripleId> ids) {
        keys_.reserve(ids.size());
        for (TripleId id : ids) insert(graph.triple(id));
    }

    bool insert(const Triple& t) { return keys_.insert(key(t)).second; }
    bool contains(const Triple& t) const { return keys_.contains(key(t)); }
    std::size_t size() const noexcept { return keys_.size(); }

private:
    struct Key {
        std::uint32_t s, r, o;
        friend bool operator==(const Key&, const Key&) = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            std::uint64_t h = ((static_cast<std::uint64_t>(k.s) << 32) | k.o) ^
                              (static_cast<std::uint64_t>(k.r) * 0x9e3779b97f4a7c15ULL);
            h = (h ^ (h >> 31)) * 0xbf58476d1ce4e5b9ULL;
            return static_cast<std::size_t>(h ^ (h >> 29));
        }
    };
    static Key key(const Triple& t) { return {t.subject, t.relation, t.object}; }
    std::unordered_set<Key, KeyHash> keys_;
};

// Train / validation / test triple ids; disjoint by construction.
struct Split {
    std::vector<TripleId> train;
    std::vector<TripleId> validation;
    std::vector<TripleId> test;

    // Every triple in `graph` assigned to train.
    static Split all_train(const KnowledgeGraph& graph) {
        Split s;
        s.train.resize(graph.size());
        for (TripleId i = 0; i < graph.size(); ++i) s.train[i] = i;
        return s;
    }
};

}  // namespace prge
