#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "prge/detail/digest.hpp"
#include "prge/detail/format.hpp"
#include "prge/embed.hpp"
#include "prge/error.hpp"

// Model files.
//
// Text variant, line oriented:
//   prge-model 1
//   precision float|double
//   dim <d>
//   entities <|E|>
//   relations <|R|>
//   config_digest <16 hex digits>
//   weighted 0|1
//   epochs_trained <n>
//   best_epoch <n>
//   best_validation <value>
//   config <key=value;key=value;...>
//   matrices
//   <|E| entity rows, then |R| relation rows; d space-separated values each>
// Values are printed with enough digits to round-trip exactly.
//
// Binary variant, little-endian, no padding:
//   offset  size  field
//   0       8     magic "PRGEMODL"
//   8       4     u32 format version (1)
//   12      4     u32 scalar width in bytes (4 = float, 8 = double)
//   16      8     u64 dim
//   24      8     u64 entity count
//   32      8     u64 relation count
//   40      8     u64 config digest (FNV-1a of the config text)
//   48      4     u32 weighted flag
//   52      4     u32 best epoch
//   56      8     u64 epochs trained
//   64      8     f64 best validation loss
//   72      4     u32 config text length L
//   76      L     config text (key=value lines)
//   76+L          entity matrix, |E| x d scalars, row-major
//   ...           relation matrix, |R| x d scalars, row-major

namespace prge {

static_assert(std::endian::native == std::endian::little, "binary model layout assumes a little-endian host");

enum class ModelFormat { text, binary };

inline constexpr char kModelMagic[8] = {'P', 'R', 'G', 'E', 'M', 'O', 'D', 'L'};

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError(path, 0, "truncated binary model");
    return v;
}

template <typename Real>
Real parse_real(std::string_view s, const std::string& path, std::size_t line) {
    Real v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(path, line, "bad number '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t digest_value(const std::string& hex) { return std::stoull(hex, nullptr, 16); }

template <typename Real>
void check_shape(const EmbeddingModel<Real>& m, std::optional<std::size_t> entities,
                 std::optional<std::size_t> relations, const std::string& path) {
    if (entities && *entities != m.entity_count())
        throw ValidationError(path + ": model has " + std::to_string(m.entity_count()) +
                              " entities but the dictionary has " + std::to_string(*entities));
    if (relations && *relations != m.relation_count())
        throw ValidationError(path + ": model has " + std::to_string(m.relation_count()) +
                              " relations but the dictionary has " + std::to_string(*relations));
}

}  // namespace detail

template <typename Real>
void save_model(const EmbeddingModel<Real>& model, const std::filesystem::path& path,
                ModelFormat format = ModelFormat::binary) {
    const std::string config_text = model.config.to_text();
    if (format == ModelFormat::binary) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(kModelMagic, sizeof kModelMagic);
        detail::put<std::uint32_t>(out, 1);
        detail::put<std::uint32_t>(out, sizeof(Real));
        detail::put<std::uint64_t>(out, model.dim());
        detail::put<std::uint64_t>(out, model.entity_count());
        detail::put<std::uint64_t>(out, model.relation_count());
        detail::put<std::uint64_t>(out, detail::digest_value(model.config.digest()));
        detail::put<std::uint32_t>(out, model.weighted ? 1 : 0);
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.best_epoch));
        detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(model.epochs_trained));
        detail::put<double>(out, model.best_validation);
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
        out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
        out.write(reinterpret_cast<const char*>(model.entity_data().data()),
                  static_cast<std::streamsize>(model.entity_data().size() * sizeof(Real)));
        out.write(reinterpret_cast<const char*>(model.relation_data().data()),
                  static_cast<std::streamsize>(model.relation_data().size() * sizeof(Real)));
        if (!out) throw IoError("write failed: " + path.string());
        return;
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    std::string config_line = config_text;
    for (auto& c : config_line)
        if (c == '\n') c = ';';
    out << "prge-model 1\n"
        << "precision " << (sizeof(Real) == 4 ? "float" : "double") << '\n'
        << "dim " << model.dim() << '\n'
        << "entities " << model.entity_count() << '\n'
        << "relations " << model.relation_count() << '\n'
        << "config_digest " << model.config.digest() << '\n'
        << "weighted " << (model.weighted ? 1 : 0) << '\n'
        << "epochs_trained " << model.epochs_trained << '\n'
        << "best_epoch " << model.best_epoch << '\n'
        << "best_validation " << shortest(model.best_validation) << '\n'
        << "config " << config_line << '\n'
        << "matrices\n";
    auto write_rows = [&](const std::vector<Real>& data) {
        for (std::size_t off = 0; off < data.size(); off += model.dim()) {
            for (std::size_t k = 0; k < model.dim(); ++k) {
                if (k) out << ' ';
                out << shortest(data[off + k]);
            }
            out << '\n';
        }
    };
    write_rows(model.entity_data());
    write_rows(model.relation_data());
    if (!out) throw IoError("write failed: " + path.string());
}

// Loads either variant (detected from the first bytes). When entity or
// relation counts are given, a mismatch with the file header is an error.
template <typename Real>
EmbeddingModel<Real> load_model(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_entities = std::nullopt,
                                std::optional<std::size_t> expected_relations = std::nullopt) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + name);
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (in && std::memcmp(magic, kModelMagic, sizeof magic) == 0) {
        if (detail::get<std::uint32_t>(in, name) != 1) throw ParseError(name, 0, "unsupported model version");
        const auto width = detail::get<std::uint32_t>(in, name);
        if (width != 4 && width != 8) throw ParseError(name, 0, "bad scalar width");
        const auto dim = detail::get<std::uint64_t>(in, name);
        const auto entities = detail::get<std::uint64_t>(in, name);
        const auto relations = detail::get<std::uint64_t>(in, name);
        const auto digest = detail::get<std::uint64_t>(in, name);
        const auto weighted = detail::get<std::uint32_t>(in, name);
        const auto best_epoch = detail::get<std::uint32_t>(in, name);
        const auto epochs = detail::get<std::uint64_t>(in, name);
        const auto best_validation = detail::get<double>(in, name);
        const auto config_len = detail::get<std::uint32_t>(in, name);
        std::string config_text(config_len, '\0');
        in.read(config_text.data(), config_len);
        if (!in) throw ParseError(name, 0, "truncated binary model");

        EmbeddingModel<Real> model(entities, relations, dim);
        detail::check_shape(model, expected_entities, expected_relations, name);
        model.config = TrainingConfig::from_text(config_text);
        if (detail::digest_value(model.config.digest()) != digest)
            throw ParseError(name, 0, "config digest mismatch");
        if (model.config.dim != dim) throw ParseError(name, 0, "config dim disagrees with header");
        model.weighted = weighted != 0;
        model.best_epoch = static_cast<int>(best_epoch);
        model.epochs_trained = static_cast<int>(epochs);
        model.best_validation = best_validation;
        auto read_matrix = [&](std::vector<Real>& data) {
            if (width == sizeof(Real)) {
                in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * width));
            } else {
                for (auto& x : data) {
                    if (width == 4)
                        x = static_cast<Real>(detail::get<float>(in, name));
                    else
                        x = static_cast<Real>(detail::get<double>(in, name));
                }
            }
            if (!in) throw ParseError(name, 0, "truncated binary model");
        };
        read_matrix(model.entity_data());
        read_matrix(model.relation_data());
        if (in.peek() != std::char_traits<char>::eof()) throw ParseError(name, 0, "trailing bytes after matrices");
        return model;
    }

    in.clear();
    in.seekg(0);
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw ParseError(name, line_no, "unexpected end of model file");
        ++line_no;
        return line;
    };
    auto field = [&](const char* key) -> std::string {
        const std::string l = next_line();
        const std::string prefix = std::string(key) + " ";
        if (l.rfind(prefix, 0) != 0) throw ParseError(name, line_no, std::string("expected '") + key + "'");
        return l.substr(prefix.size());
    };
    if (next_line() != "prge-model 1") throw ParseError(name, 1, "not a model file");
    const std::string precision = field("precision");
    if (precision != "float" && precision != "double") throw ParseError(name, line_no, "bad precision");
    // Values are parsed at the stored precision, then converted.
    const bool stored_float = precision == "float";
    std::size_t dim = 0, entities = 0, relations = 0;
    try {
        dim = std::stoull(field("dim"));
        entities = std::stoull(field("entities"));
        relations = std::stoull(field("relations"));
    } catch (const std::logic_error&) {
        throw ParseError(name, line_no, "bad header count");
    }
    EmbeddingModel<Real> model(entities, relations, dim);
    detail::check_shape(model, expected_entities, expected_relations, name);
    const std::string digest = field("config_digest");
    model.weighted = field("weighted") == "1";
    model.epochs_trained = std::stoi(field("epochs_trained"));
    model.best_epoch = std::stoi(field("best_epoch"));
    model.best_validation = detail::parse_real<double>(field("best_validation"), name, line_no);
    std::string config_text = field("config");
    for (auto& c : config_text)
        if (c == ';') c = '\n';
    model.config = TrainingConfig::from_text(config_text);
    if (model.config.digest() != digest) throw ParseError(name, line_no, "config digest mismatch");
    if (model.config.dim != dim) throw ParseError(name, line_no, "config dim disagrees with header");
    if (next_line() != "matrices") throw ParseError(name, line_no, "expected 'matrices'");
    auto read_rows = [&](std::vector<Real>& data) {
        for (std::size_t off = 0; off < data.size(); off += dim) {
            const std::string l = next_line();
            std::string_view rest(l);
            for (std::size_t k = 0; k < dim; ++k) {
                const auto sp = rest.find(' ');
                const auto tok = rest.substr(0, sp);
                data[off + k] = stored_float ? static_cast<Real>(detail::parse_real<float>(tok, name, line_no))
                                             : static_cast<Real>(detail::parse_real<double>(tok, name, line_no));
                if (k + 1 < dim && sp == std::string_view::npos)
                    throw ParseError(name, line_no, "row has fewer than dim values");
                rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
            }
            if (!rest.empty()) throw ParseError(name, line_no, "row has more than dim values");
        }
    };
    read_rows(model.entity_data());
    read_rows(model.relation_data());
    return model;
}

}  // namespace prge
