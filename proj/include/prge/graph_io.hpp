#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prge/error.hpp"
#include "prge/graph.hpp"

// Triple files: UTF-8, one "subject\trelation\tobject" per line.
// Noise sidecar: one 0/1 per triple line, same line count.
// Split assignment: "triple-index\t{train|valid|test}" per line.

namespace prge {

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline std::vector<bool> read_flags(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<bool> flags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto v = strip_cr(line);
        if (v == "0")
            flags.push_back(false);
        else if (v == "1")
            flags.push_back(true);
        else
            throw ParseError(path.string(), line_no, "expected 0 or 1");
    }
    return flags;
}

// Appends the triples of one file to `graph`; returns how many were stored.
inline std::size_t append_triples(KnowledgeGraph& graph, const std::filesystem::path& path,
                                  const std::vector<bool>* noise_flags = nullptr) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0, triple_lines = 0, stored = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = strip_cr(line);
        if (view.empty()) continue;
        const auto fields = split_tabs(view);
        if (fields.size() != 3)
            throw ParseError(path.string(), line_no,
                             "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
        bool noise = false;
        if (noise_flags) {
            if (triple_lines >= noise_flags->size())
                throw ValidationError("noise label file has fewer lines than " + path.string());
            noise = (*noise_flags)[triple_lines];
        }
        ++triple_lines;
        if (graph.add(fields[0], fields[1], fields[2], noise)) ++stored;
    }
    if (noise_flags && triple_lines != noise_flags->size())
        throw ValidationError("noise label file line count differs from " + path.string());
    return stored;
}

inline void check_label(const std::string& label, const char* what) {
    if (label.empty()) throw ValidationError(std::string("empty ") + what + " label");
    if (label.find_first_of("\t\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " label contains a tab or newline: " + label);
}

}  // namespace detail

// Loads a triple file. Duplicate lines are dropped and counted in
// graph.duplicates_dropped(). With `noise_labels`, flags come from the sidecar.
inline KnowledgeGraph load_graph(const std::filesystem::path& path,
                                 const std::optional<std::filesystem::path>& noise_labels = std::nullopt) {
    KnowledgeGraph graph;
    std::vector<bool> flags;
    if (noise_labels) flags = detail::read_flags(*noise_labels);
    detail::append_triples(graph, path, noise_labels ? &flags : nullptr);
    if (graph.empty()) throw ParseError(path.string(), 0, "file contains no triples");
    return graph;
}

inline void save_noise_labels(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& t : graph.triples()) out << (t.is_noise ? '1' : '0') << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

// Writes the graph as a triple file; the sidecar is written when a path is
// given or, if not, whenever the graph holds noise triples (next to `path`
// with a ".labels" suffix).
inline void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path,
                       const std::optional<std::filesystem::path>& noise_labels = std::nullopt) {
    for (const auto& t : graph.triples()) {
        detail::check_label(graph.entities().label(t.subject), "subject");
        detail::check_label(graph.relations().label(t.relation), "relation");
        detail::check_label(graph.entities().label(t.object), "object");
    }
    {
        auto out = detail::open_output(path);
        for (const auto& t : graph.triples()) out << graph.describe(t) << '\n';
        if (!out) throw IoError("write failed: " + path.string());
    }
    if (noise_labels)
        save_noise_labels(graph, *noise_labels);
    else if (graph.noise_count() > 0)
        save_noise_labels(graph, std::filesystem::path(path.string() + ".labels"));
}

inline std::vector<bool> load_noise_labels(const std::filesystem::path& path) {
    return detail::read_flags(path);
}

inline Split load_split_assignment(const std::filesystem::path& path, const KnowledgeGraph& graph) {
    auto in = detail::open_input(path);
    Split split;
    std::vector<bool> seen(graph.size(), false);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = detail::strip_cr(line);
        if (view.empty()) continue;
        const auto fields = detail::split_tabs(view);
        if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected index<TAB>part");
        TripleId id = 0;
        try {
            std::size_t used = 0;
            id = std::stoull(std::string(fields[0]), &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(path.string(), line_no, "bad triple index");
        }
        if (id >= graph.size()) throw ParseError(path.string(), line_no, "triple index out of range");
        if (seen[id]) throw ParseError(path.string(), line_no, "triple assigned twice");
        seen[id] = true;
        if (fields[1] == "train")
            split.train.push_back(id);
        else if (fields[1] == "valid")
            split.validation.push_back(id);
        else if (fields[1] == "test")
            split.test.push_back(id);
        else
            throw ParseError(path.string(), line_no, "part must be train, valid or test");
    }
    return split;
}

inline void save_split_assignment(const Split& split, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (auto id : split.train) out << id << "\ttrain\n";
    for (auto id : split.validation) out << id << "\tvalid\n";
    for (auto id : split.test) out << id << "\ttest\n";
    if (!out) throw IoError("write failed: " + path.string());
}

struct Dataset {
    KnowledgeGraph graph;
    Split split;
};

// Loads the usual benchmark layout: three triple files interned in
// train, valid, test order. A triple repeated across files stays in the
// part where it first appeared. With `dictionaries`, ids of labels already
// known there are kept (new labels are appended after them).
inline Dataset load_split_files(const std::filesystem::path& train, const std::filesystem::path& valid,
                                const std::filesystem::path& test, const KnowledgeGraph* dictionaries = nullptr) {
    Dataset d;
    if (dictionaries) d.graph = KnowledgeGraph::with_dictionaries_of(*dictionaries);
    const std::filesystem::path* parts[] = {&train, &valid, &test};
    std::vector<TripleId>* targets[] = {&d.split.train, &d.split.validation, &d.split.test};
    for (int p = 0; p < 3; ++p) {
        const auto before = d.graph.size();
        detail::append_triples(d.graph, *parts[p]);
        for (TripleId id = before; id < d.graph.size(); ++id) targets[p]->push_back(id);
    }
    if (d.graph.empty()) throw ParseError(train.string(), 0, "dataset contains no triples");
    return d;
}

}  // namespace prge
