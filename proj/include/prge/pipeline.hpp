#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "prge/detail/digest.hpp"
#include "prge/detail/format.hpp"
#include "prge/embed.hpp"
#include "prge/error.hpp"
#include "prge/eval.hpp"
#include "prge/experiment.hpp"
#include "prge/graph_io.hpp"
#include "prge/model_io.hpp"
#include "prge/noise.hpp"
#include "prge/pathrank.hpp"
#include "prge/report.hpp"
#include "prge/synthetic.hpp"

// The impute -> score -> train -> evaluate grid with on-disk stage caching.
//
// Layout under the output directory:
//   cache/noisy-<key>.tsv (+ .labels, .split)   noisy graph per ratio
//   cache/scores-<key>.tsv                       path-ranking confidences
//   cache/model-<key>.bin                        trained embeddings
//   reports/<dataset>-<pct>-<method>.kv / .txt   one report per cell
//   comparison.txt, comparison.tsv
//   manifest.tsv
// Every cached file has a "<file>.digest" sidecar holding its content digest;
// a stage is reused only when the file still matches it.

namespace prge {

inline constexpr const char* kCodeVersion = "prge-0.1.0";
inline constexpr const char* kOutputRootEnv = "PRGE_OUTPUT_ROOT";

struct ExperimentConfig {
    std::string dataset = "dataset";
    // Input: one triple file (optionally with a split assignment), three
    // split files, or a built-in synthetic graph ("planted").
    std::filesystem::path graph;
    std::filesystem::path split;
    std::filesystem::path train_file, valid_file, test_file;
    std::string synthetic;
    // Held-out fractions used when the input carries no split.
    double holdout_valid = 0.1;
    double holdout_test = 0.1;

    std::vector<double> ratios{0.10, 0.20, 0.40};
    NoiseProtocol protocol = NoiseProtocol::random;
    int noise_retries = 100;
    std::vector<Method> methods{Method::transe, Method::prge, Method::pathrank};
    TrainingConfig training;
    PathRankParams pathrank;
    std::filesystem::path output;
    std::uint64_t seed = 0;

    // Applies one key=value setting. Unknown keys are errors.
    void set(const std::string& key, const std::string& value) {
        auto number = [&](auto& field) {
            using T = std::decay_t<decltype(field)>;
            try {
                std::size_t used = 0;
                if constexpr (std::is_floating_point_v<T>)
                    field = std::stod(value, &used);
                else if constexpr (std::is_signed_v<T>)
                    field = static_cast<T>(std::stoll(value, &used));
                else
                    field = static_cast<T>(std::stoull(value, &used));
                if (used != value.size()) throw std::invalid_argument("trailing");
            } catch (const std::logic_error&) {
                throw ValidationError("bad value '" + value + "' for '" + key + "'");
            }
        };
        auto flag = [&](bool& field) {
            if (value == "1" || value == "true") field = true;
            else if (value == "0" || value == "false") field = false;
            else throw ValidationError("bad value '" + value + "' for '" + key + "'");
        };

        if (key == "dataset") dataset = value;
        else if (key == "graph") graph = value;
        else if (key == "split") split = value;
        else if (key == "train") train_file = value;
        else if (key == "valid") valid_file = value;
        else if (key == "test") test_file = value;
        else if (key == "synthetic") synthetic = value;
        else if (key == "holdout.valid") number(holdout_valid);
        else if (key == "holdout.test") number(holdout_test);
        else if (key == "ratios") {
            ratios.clear();
            std::istringstream is(value);
            std::string item;
            while (std::getline(is, item, ',')) {
                double r = 0;
                try {
                    std::size_t used = 0;
                    r = std::stod(item, &used);
                    if (used != item.size()) throw std::invalid_argument("trailing");
                } catch (const std::logic_error&) {
                    throw ValidationError("bad noise ratio '" + item + "'");
                }
                ratios.push_back(r);
            }
        } else if (key == "protocol") protocol = parse_noise_protocol(value);
        else if (key == "noise.retries") number(noise_retries);
        else if (key == "methods") {
            methods.clear();
            std::istringstream is(value);
            std::string item;
            while (std::getline(is, item, ',')) methods.push_back(parse_method(item));
        } else if (key == "output") output = value;
        else if (key == "seed") number(seed);
        else if (key == "threads") {
            number(training.threads);
            pathrank.threads = training.threads;
        }
        else if (key == "train.dim") number(training.dim);
        else if (key == "train.margin") number(training.margin);
        else if (key == "train.lambda") number(training.lambda);
        else if (key == "train.epochs") number(training.epochs);
        else if (key == "train.learning_rate") number(training.learning_rate);
        else if (key == "train.batch_size") number(training.batch_size);
        else if (key == "train.patience") number(training.patience);
        else if (key == "train.deterministic") flag(training.deterministic);
        else if (key == "train.negative_retries") number(training.negative_retries);
        else if (key == "path.max_len") number(pathrank.max_len);
        else if (key == "path.features") number(pathrank.features_per_relation);
        else if (key == "path.negatives") number(pathrank.negatives_per_positive);
        else if (key == "path.min_support") number(pathrank.min_support);
        else if (key == "path.l2") number(pathrank.l2);
        else if (key == "path.iterations") number(pathrank.iterations);
        else if (key == "path.prior") number(pathrank.prior);
        else if (key == "path.folds") number(pathrank.folds);
        else if (key == "path.binarize") flag(pathrank.binarize);
        else throw ValidationError("unknown config key '" + key + "'");
    }

    // Flat "key = value" text; '#' starts a comment.
    static ExperimentConfig parse(const std::string& text, const std::string& source = "<config>") {
        ExperimentConfig c;
        std::istringstream is(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (trim(line).empty()) continue;
            if (eq == std::string::npos) throw ParseError(source, line_no, "expected key = value");
            try {
                c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            } catch (const ValidationError& e) {
                throw ParseError(source, line_no, e.what());
            }
        }
        return c;
    }

    static ExperimentConfig load(const std::filesystem::path& path) {
        auto in = detail::open_input(path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    // Canonical text: every setting, fixed order. Parsing it gives back an
    // equivalent config.
    std::string to_text() const {
        std::ostringstream os;
        auto join = [](const auto& items, auto fmt) {
            std::string s;
            for (const auto& x : items) s += (s.empty() ? "" : ",") + fmt(x);
            return s;
        };
        os << "dataset = " << dataset << '\n';
        if (!graph.empty()) os << "graph = " << graph.string() << '\n';
        if (!split.empty()) os << "split = " << split.string() << '\n';
        if (!train_file.empty()) os << "train = " << train_file.string() << '\n';
        if (!valid_file.empty()) os << "valid = " << valid_file.string() << '\n';
        if (!test_file.empty()) os << "test = " << test_file.string() << '\n';
        if (!synthetic.empty()) os << "synthetic = " << synthetic << '\n';
        os << "holdout.valid = " << shortest(holdout_valid) << '\n'
           << "holdout.test = " << shortest(holdout_test) << '\n'
           << "ratios = " << join(ratios, [](double r) { return shortest(r); }) << '\n'
           << "protocol = " << to_string(protocol) << '\n'
           << "noise.retries = " << noise_retries << '\n'
           << "methods = " << join(methods, [](Method m) { return std::string(to_string(m)); }) << '\n'
           << "output = " << output.string() << '\n'
           << "seed = " << seed << '\n'
           << "threads = " << training.threads << '\n'
           << "train.dim = " << training.dim << '\n'
           << "train.margin = " << shortest(training.margin) << '\n'
           << "train.lambda = " << shortest(training.lambda) << '\n'
           << "train.epochs = " << training.epochs << '\n'
           << "train.learning_rate = " << shortest(training.learning_rate) << '\n'
           << "train.batch_size = " << training.batch_size << '\n'
           << "train.patience = " << training.patience << '\n'
           << "train.deterministic = " << (training.deterministic ? 1 : 0) << '\n'
           << "train.negative_retries = " << training.negative_retries << '\n'
           << "path.max_len = " << pathrank.max_len << '\n'
           << "path.features = " << pathrank.features_per_relation << '\n'
           << "path.negatives = " << pathrank.negatives_per_positive << '\n'
           << "path.min_support = " << pathrank.min_support << '\n'
           << "path.l2 = " << shortest(pathrank.l2) << '\n'
           << "path.iterations = " << pathrank.iterations << '\n'
           << "path.prior = " << shortest(pathrank.prior) << '\n'
           << "path.folds = " << pathrank.folds << '\n'
           << "path.binarize = " << (pathrank.binarize ? 1 : 0) << '\n';
        return os.str();
    }

    // Output directory, defaulting to $PRGE_OUTPUT_ROOT/<dataset> (or
    // prge-out/<dataset>).
    std::filesystem::path output_dir() const {
        if (!output.empty()) return output;
        const char* root = std::getenv(kOutputRootEnv);
        return std::filesystem::path(root && *root ? root : "prge-out") / dataset;
    }

    void validate() const {
        if (methods.empty()) throw ValidationError("method list is empty");
        if (ratios.empty()) throw ValidationError("noise ratio list is empty");
        for (double r : ratios)
            if (!(r > 0.0 && r <= 1.0)) throw ValidationError("noise ratio " + shortest(r) + " outside (0, 1]");
        if (dataset.empty() || dataset.find_first_of("/\\\t\n") != std::string::npos)
            throw ValidationError("dataset name must be non-empty and contain no path separators");
        const int sources = (!graph.empty() ? 1 : 0) + (!train_file.empty() ? 1 : 0) + (!synthetic.empty() ? 1 : 0);
        if (sources != 1) throw ValidationError("give exactly one of graph, train/valid/test or synthetic");
        if (!train_file.empty() && (valid_file.empty() || test_file.empty()))
            throw ValidationError("train, valid and test files must be given together");
        if (!split.empty() && graph.empty()) throw ValidationError("split assignment needs a graph file");
        if (!synthetic.empty() && synthetic != "planted")
            throw ValidationError("unknown synthetic graph '" + synthetic + "'");
        for (const auto* p : {&graph, &split, &train_file, &valid_file, &test_file})
            if (!p->empty() && !std::filesystem::exists(*p)) throw ValidationError("no such file: " + p->string());
        training.validate();
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
};

// Loads (or generates) the clean dataset a config points at. `digest`
// receives a fingerprint of the inputs for cache keys.
inline Dataset load_dataset(const ExperimentConfig& config, std::string* digest = nullptr) {
    Digest d;
    Dataset data;
    bool has_split = true;
    if (!config.synthetic.empty()) {
        d.field("synthetic").field(config.synthetic);
        data.graph = planted_graph();
        has_split = false;
    } else if (!config.train_file.empty()) {
        data = load_split_files(config.train_file, config.valid_file, config.test_file);
        for (const auto* p : {&config.train_file, &config.valid_file, &config.test_file})
            d.field(digest_file(*p));
    } else {
        data.graph = load_graph(config.graph);
        d.field(digest_file(config.graph));
        if (!config.split.empty()) {
            data.split = load_split_assignment(config.split, data.graph);
            d.field(digest_file(config.split));
        } else {
            has_split = false;
        }
    }
    if (!has_split) {
        data.split = random_split(data.graph, config.holdout_valid, config.holdout_test, derive_seed(config.seed, 7));
        d.field("holdout").field(shortest(config.holdout_valid)).field(shortest(config.holdout_test));
        d.field(std::to_string(config.seed));
    }
    if (digest) *digest = d.hex();
    return data;
}

struct CellError {
    std::string cell;
    std::string message;
};

struct PipelineResult {
    std::vector<MetricsReport> reports;
    std::vector<CellError> errors;
    // Output-relative path -> content digest, for every file written or reused.
    std::map<std::string, std::string> files;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::filesystem::path manifest;

    int exit_code() const { return errors.empty() ? 0 : 2; }
};

namespace detail {

class StageCache {
public:
    StageCache(std::filesystem::path root, PipelineResult& result) : root_(std::move(root)), result_(result) {}

    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }

    // True when every file exists and matches its digest sidecar.
    bool valid(const std::vector<std::string>& rels) const {
        for (const auto& rel : rels) {
            const auto file = path(rel), side = path(rel + ".digest");
            if (!std::filesystem::exists(file) || !std::filesystem::exists(side)) return false;
            std::ifstream in(side);
            std::string recorded;
            in >> recorded;
            if (recorded != digest_file(file)) return false;
        }
        return true;
    }

    // Writes digest sidecars and records the files in the manifest.
    void commit(const std::vector<std::string>& rels) {
        for (const auto& rel : rels) {
            const std::string digest = digest_file(path(rel));
            {
                auto out = open_output(path(rel + ".digest"));
                out << digest << '\n';
            }
            record(rel);
            record(rel + ".digest");
        }
    }

    void record(const std::string& rel) { result_.files[rel] = digest_file(path(rel)); }

    template <typename Build>
    void ensure(const std::vector<std::string>& rels, Build&& build, std::ostream* log, const std::string& what) {
        if (valid(rels)) {
            ++result_.cache_hits;
            if (log) *log << "cached  " << what << '\n';
            for (const auto& rel : rels) {
                record(rel);
                record(rel + ".digest");
            }
            return;
        }
        ++result_.cache_misses;
        if (log) *log << "running " << what << '\n';
        build();
        commit(rels);
    }

private:
    std::filesystem::path root_;
    PipelineResult& result_;
};

inline std::string ratio_label(double ratio) { return fixed(ratio * 100.0, 0) + "pct"; }

}  // namespace detail

// Evaluates one trained embedding on a noisy dataset: error detection over
// the training triples, and triple classification when the split has
// validation and test parts.
template <typename Real>
MetricsReport evaluate_embedding(const EmbeddingModel<Real>& model, const NoisyDataset& data, NoiseProtocol protocol,
                                 std::uint64_t seed) {
    MetricsReport report;
    const auto energies = triple_energies(model, data.graph, data.split.train);
    const auto m = detection_metrics(data.graph, data.split.train, energies);
    report.triples = data.split.train.size();
    report.noisy = m.ranking.noisy;
    report.fmr = m.ranking.fmr;
    report.fmrr = m.ranking.fmrr;
    report.auc = m.auc;
    if (!data.split.validation.empty() && !data.split.test.empty()) {
        const auto valid = classification_items(model, data.graph, data.split.validation, protocol, derive_seed(seed, 11));
        const auto test = classification_items(model, data.graph, data.split.test, protocol, derive_seed(seed, 12));
        const auto thresholds = fit_thresholds(valid);
        const auto cls = classify(test, thresholds, model.relation_count());
        report.classification_accuracy = cls.accuracy;
        report.classification_roc_auc = cls.roc_auc;
        report.classification_skipped = cls.skipped;
    }
    return report;
}

inline MetricsReport evaluate_confidences(const ConfidenceTable& table, const NoisyDataset& data) {
    MetricsReport report;
    const auto m = detection_metrics(data.graph, data.split.train, confidence_energies(table, data.split.train));
    report.triples = data.split.train.size();
    report.noisy = m.ranking.noisy;
    report.fmr = m.ranking.fmr;
    report.fmrr = m.ranking.fmrr;
    report.auc = m.auc;
    return report;
}

inline std::string manifest_text(const ExperimentConfig& config, const PipelineResult& result) {
    std::ostringstream os;
    os << "# prge manifest\n" << "code_version\t" << kCodeVersion << '\n';
    std::istringstream cfg(config.to_text());
    std::string line;
    // The output location is not a parameter of the results.
    while (std::getline(cfg, line))
        if (line.rfind("output = ", 0) != 0) os << "config\t" << line << '\n';
    for (const auto& [rel, digest] : result.files) os << "file\t" << rel << '\t' << digest << '\n';
    for (const auto& e : result.errors) os << "error\t" << e.cell << '\t' << e.message << '\n';
    return os.str();
}

// Runs the whole grid. Config errors throw; a failing cell is recorded in
// the result (and manifest) while the remaining cells still run.
inline PipelineResult run_pipeline(const ExperimentConfig& config, std::ostream* log = nullptr) {
    config.validate();
    const auto root = config.output_dir();
    std::filesystem::create_directories(root / "cache");
    std::filesystem::create_directories(root / "reports");

    PipelineResult result;
    detail::StageCache cache(root, result);
    std::string input_digest;
    const Dataset clean = load_dataset(config, &input_digest);
    if (log)
        *log << "dataset " << config.dataset << ": " << clean.graph.size() << " triples, "
             << clean.split.train.size() << "/" << clean.split.validation.size() << "/" << clean.split.test.size()
             << " train/valid/test\n";

    const bool needs_scores = std::any_of(config.methods.begin(), config.methods.end(),
                                          [](Method m) { return m != Method::transe; });
    TrainingConfig training = config.training;
    training.seed = config.seed;
    PathRankParams path_params = config.pathrank;
    path_params.seed = config.seed;

    for (double ratio : config.ratios) {
        const std::string rlabel = detail::ratio_label(ratio);
        auto cell_name = [&](Method m) { return config.dataset + "-" + rlabel + "-" + to_string(m); };
        auto fail_all = [&](const std::string& message) {
            for (Method m : config.methods) result.errors.push_back({cell_name(m), message});
            if (log) *log << "error   " << config.dataset << "-" << rlabel << ": " << message << '\n';
        };

        // Stage 1: noisy graph.
        NoiseConfig noise;
        noise.ratio = ratio;
        noise.protocol = config.protocol;
        noise.seed = config.seed;
        noise.retry_budget = config.noise_retries;
        const std::string noisy_key = Digest()
                                          .field(kCodeVersion)
                                          .field(input_digest)
                                          .field(config.dataset)
                                          .field(shortest(ratio))
                                          .field(to_string(config.protocol))
                                          .field(std::to_string(config.seed))
                                          .field(std::to_string(config.noise_retries))
                                          .hex();
        const std::string noisy_rel = "cache/noisy-" + noisy_key + ".tsv";
        const std::vector<std::string> noisy_files{noisy_rel, noisy_rel + ".labels", noisy_rel + ".split"};
        NoisyDataset data;
        try {
            cache.ensure(
                noisy_files,
                [&] {
                    const auto fresh = make_noisy_dataset(clean, noise);
                    save_graph(fresh.graph, cache.path(noisy_rel), cache.path(noisy_rel + ".labels"));
                    save_split_assignment(fresh.split, cache.path(noisy_rel + ".split"));
                },
                log, "impute " + config.dataset + "-" + rlabel);
            // Downstream stages always read the stored copy, so a fresh run
            // and a cached rerun see identical inputs.
            data.graph = load_graph(cache.path(noisy_rel), cache.path(noisy_rel + ".labels"));
            data.split = load_split_assignment(cache.path(noisy_rel + ".split"), data.graph);
        } catch (const std::exception& e) {
            fail_all(e.what());
            continue;
        }

        // Stage 2: path-ranking confidences on the noisy training graph.
        std::optional<ConfidenceTable> scores;
        std::string scores_key;
        std::string scores_error;
        if (needs_scores) {
            std::ostringstream params;
            params << path_params.max_len << ',' << path_params.features_per_relation << ','
                   << path_params.negatives_per_positive << ',' << path_params.min_support << ','
                   << path_params.seed << ',' << path_params.binarize << ',' << shortest(path_params.l2) << ','
                   << path_params.iterations << ',' << shortest(path_params.prior) << ',' << path_params.folds;
            scores_key = Digest().field(noisy_key).field(params.str()).hex();
            const std::string rel = "cache/scores-" + scores_key + ".tsv";
            try {
                cache.ensure(
                    {rel},
                    [&] {
                        const auto train_graph = training_graph(data);
                        const auto table = path_params.folds >= 2
                                               ? cross_validated_scores(train_graph, path_params)
                                               : score_graph(train_scorers(train_graph, path_params), train_graph);
                        save_scores(table, cache.path(rel));
                    },
                    log, "score  " + config.dataset + "-" + rlabel);
                scores = load_scores(cache.path(rel));
            } catch (const std::exception& e) {
                scores_error = e.what();
            }
        }

        for (Method method : config.methods) {
            const std::string cell = cell_name(method);
            try {
                MetricsReport report;
                if (method != Method::transe && !scores) throw Error("path ranking failed: " + scores_error);
                if (method == Method::pathrank) {
                    report = evaluate_confidences(*scores, data);
                } else {
                    const bool weighted = method == Method::prge;
                    const std::string model_key = Digest()
                                                      .field(noisy_key)
                                                      .field(weighted ? scores_key : "unweighted")
                                                      .field(training.to_text())
                                                      .hex();
                    const std::string rel = "cache/model-" + model_key + ".bin";
                    cache.ensure(
                        {rel},
                        [&] {
                            const auto model = train<float>(data.graph, data.split, weighted ? &*scores : nullptr,
                                                            training);
                            save_model(model, cache.path(rel));
                        },
                        log, "train  " + cell);
                    const auto model = load_model<float>(cache.path(rel), data.graph.entity_count(),
                                                         data.graph.relation_count());
                    report = evaluate_embedding(model, data, config.protocol, config.seed);
                }
                report.dataset = config.dataset;
                report.method = to_string(method);
                report.noise_ratio = ratio;
                report.protocol = to_string(config.protocol);
                report.seed = config.seed;

                const std::string base = "reports/" + cell;
                save_report(report, root / (base + ".kv"));
                {
                    auto out = detail::open_output(root / (base + ".txt"));
                    out << report.to_table();
                }
                cache.record(base + ".kv");
                cache.record(base + ".txt");
                result.reports.push_back(std::move(report));
                if (log) *log << "done    " << cell << '\n';
            } catch (const std::exception& e) {
                result.errors.push_back({cell, e.what()});
                if (log) *log << "error   " << cell << ": " << e.what() << '\n';
            }
        }
    }

    if (!result.reports.empty()) {
        const auto table = emit_comparison(result.reports);
        {
            auto out = detail::open_output(root / "comparison.txt");
            out << table.text;
        }
        {
            auto out = detail::open_output(root / "comparison.tsv");
            out << table.tsv;
        }
        cache.record("comparison.txt");
        cache.record("comparison.tsv");
    }

    result.manifest = root / "manifest.tsv";
    auto out = detail::open_output(result.manifest);
    out << manifest_text(config, result);
    if (!out) throw IoError("write failed: " + result.manifest.string());
    return result;
}

}  // namespace prge
