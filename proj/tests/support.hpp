#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <unistd.h>

#include "prge/detail/random.hpp"
#include "prge/graph.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("prge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Fact {
    const char* s;
    const char* r;
    const char* o;
};

inline prge::KnowledgeGraph make_graph(std::initializer_list<Fact> facts) {
    prge::KnowledgeGraph g;
    for (const auto& f : facts) g.add(f.s, f.r, f.o);
    return g;
}

// Random graph over labels "n<i>" / "R<j>" with up to `triples` facts.
inline prge::KnowledgeGraph random_small_graph(std::size_t nodes, std::size_t relations, std::size_t triples,
                                               std::uint64_t seed) {
    prge::Rng rng(seed);
    prge::KnowledgeGraph g;
    for (std::size_t i = 0; i < nodes; ++i) g.intern_entity("n" + std::to_string(i));
    for (std::size_t j = 0; j < relations; ++j) g.intern_relation("R" + std::to_string(j));
    for (std::size_t k = 0; k < triples; ++k) {
        prge::Triple t{static_cast<prge::EntityId>(prge::uniform_index(rng, nodes)),
                       static_cast<prge::RelationId>(prge::uniform_index(rng, relations)),
                       static_cast<prge::EntityId>(prge::uniform_index(rng, nodes)), false};
        g.add(t);
    }
    return g;
}

}  // namespace testing_support
