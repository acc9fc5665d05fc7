// prge: command-line front end for the PRGE error-detection toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prge/prge.hpp"

namespace fs = std::filesystem;
using namespace prge;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// "--split" is either an assignment file for the graph or three
// comma-separated triple files (train,valid,test).
Dataset load_with_split(const std::string& graph_path, const std::string& split) {
    const auto parts = split.empty() ? std::vector<std::string>{} : split_commas(split);
    if (parts.size() == 3) {
        if (graph_path.empty()) return load_split_files(parts[0], parts[1], parts[2]);
        const auto base = load_graph(graph_path);
        return load_split_files(parts[0], parts[1], parts[2], &base);
    }
    if (parts.size() > 1) throw ValidationError("--split takes one assignment file or three comma-separated files");
    if (graph_path.empty()) throw ValidationError("--in/--graph is required unless --split names three files");
    Dataset d{load_graph(graph_path), {}};
    d.split = parts.empty() ? Split::all_train(d.graph) : load_split_assignment(parts[0], d.graph);
    return d;
}

std::optional<fs::path> default_labels(const std::string& graph, const std::string& labels) {
    if (!labels.empty()) return fs::path(labels);
    const fs::path side = graph + ".labels";
    if (fs::exists(side)) return side;
    return std::nullopt;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PRGE: path-ranking guided embeddings for knowledge-graph error detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kCodeVersion);

    // impute
    auto* impute = app.add_subcommand("impute", "Add corrupted triples to a graph");
    std::string imp_in, imp_out, imp_labels, imp_protocol = "random";
    double imp_ratio = 0.10;
    std::uint64_t imp_seed = 0;
    int imp_retries = 100;
    impute->add_option("--in", imp_in, "Input triple file")->required()->check(CLI::ExistingFile);
    impute->add_option("--ratio", imp_ratio, "Noise triples as a fraction of the graph size")->capture_default_str();
    impute->add_option("--protocol", imp_protocol, "random | same-relation")->capture_default_str();
    impute->add_option("--seed", imp_seed, "Random seed")->capture_default_str();
    impute->add_option("--retries", imp_retries, "Candidate draws per source triple")->capture_default_str();
    impute->add_option("--out", imp_out, "Output triple file")->required();
    impute->add_option("--labels", imp_labels, "Noise label sidecar (default <out>.labels)");

    // score
    auto* score = app.add_subcommand("score", "Path-ranking confidence for every triple");
    std::string sc_in, sc_out;
    PathRankParams sc;
    score->add_option("--in", sc_in, "Input triple file")->required()->check(CLI::ExistingFile);
    score->add_option("--max-len", sc.max_len, "Maximum path length")->capture_default_str();
    score->add_option("--features-per-relation", sc.features_per_relation, "Path features kept per relation")->capture_default_str();
    score->add_option("--neg-ratio", sc.negatives_per_positive, "Negatives per positive example")->capture_default_str();
    score->add_option("--min-support", sc.min_support, "Positives needed to train a relation's scorer")->capture_default_str();
    score->add_option("--folds", sc.folds, "Cross-validation folds (0 = in-sample scoring)")->capture_default_str();
    score->add_option("--prior", sc.prior, "Confidence for relations without a scorer")->capture_default_str();
    score->add_option("--seed", sc.seed, "Random seed")->capture_default_str();
    score->add_option("--threads", sc.threads, "Worker threads")->capture_default_str();
    score->add_option("--out", sc_out, "Output score file")->required();

    // train
    auto* trn = app.add_subcommand("train", "Train TransE, or PRGE when scores are given");
    std::string tr_in, tr_split, tr_scores = "none", tr_out, tr_format = "binary";
    TrainingConfig tc;
    bool tr_double = false;
    trn->add_option("--in", tr_in, "Triple file")->check(CLI::ExistingFile);
    trn->add_option("--split", tr_split, "Split assignment file, or train,valid,test files");
    trn->add_option("--scores", tr_scores, "Confidence file, or 'none' for plain TransE")->capture_default_str();
    trn->add_option("--dim", tc.dim, "Embedding dimension")->capture_default_str();
    trn->add_option("--margin", tc.margin, "Hinge margin")->capture_default_str();
    trn->add_option("--lambda", tc.lambda, "Confidence exponent")->capture_default_str();
    trn->add_option("--epochs", tc.epochs, "Maximum epochs")->capture_default_str();
    trn->add_option("--lr", tc.learning_rate, "Learning rate")->capture_default_str();
    trn->add_option("--batch", tc.batch_size, "Mini-batch size")->capture_default_str();
    trn->add_option("--patience", tc.patience, "Early-stopping patience in epochs")->capture_default_str();
    trn->add_option("--seed", tc.seed, "Random seed")->capture_default_str();
    trn->add_flag("--deterministic,!--hogwild", tc.deterministic,
                  "Bit-reproducible single-threaded updates (default) or lock-free parallel ones");
    trn->add_option("--threads", tc.threads, "Worker threads for --hogwild")->capture_default_str();
    trn->add_flag("--double", tr_double, "Train in 64-bit precision");
    trn->add_option("--format", tr_format, "binary | text")->capture_default_str();
    trn->add_option("--out", tr_out, "Output model file")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Error-detection metrics for a noisy graph");
    std::string ev_model, ev_scores, ev_graph, ev_labels, ev_out, ev_dataset, ev_method, ev_protocol = "random";
    double ev_ratio = -1.0;
    std::uint64_t ev_seed = 0;
    auto* ev_model_opt = evaluate->add_option("--model", ev_model, "Model file")->check(CLI::ExistingFile);
    auto* ev_scores_opt =
        evaluate->add_option("--scores", ev_scores, "Evaluate path-ranking confidences instead of a model")
            ->check(CLI::ExistingFile);
    ev_model_opt->excludes(ev_scores_opt);
    evaluate->add_option("--graph", ev_graph, "Noisy triple file the model was trained on")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--labels", ev_labels, "Noise label sidecar (default <graph>.labels)");
    evaluate->add_option("--out", ev_out, "Report file (key=value)")->required();
    evaluate->add_option("--dataset", ev_dataset, "Dataset name for the report (default: graph file stem)");
    evaluate->add_option("--method", ev_method, "Method name for the report (default: from the model)");
    evaluate->add_option("--ratio", ev_ratio, "Noise ratio for the report (default: noisy / clean)");
    evaluate->add_option("--protocol", ev_protocol, "Noise protocol for the report")->capture_default_str();
    evaluate->add_option("--seed", ev_seed, "Seed for the report")->capture_default_str();

    // classify
    auto* cls = app.add_subcommand("classify", "Triple classification with per-relation thresholds");
    std::string cl_model, cl_split, cl_graph, cl_out, cl_protocol = "random";
    std::uint64_t cl_seed = 0;
    cls->add_option("--model", cl_model, "Model file")->required()->check(CLI::ExistingFile);
    cls->add_option("--split", cl_split, "Split assignment file, or train,valid,test files")->required();
    cls->add_option("--graph", cl_graph, "Graph the model was trained on (fixes entity ids)")
        ->check(CLI::ExistingFile);
    cls->add_option("--protocol", cl_protocol, "Negative-generation protocol")->capture_default_str();
    cls->add_option("--seed", cl_seed, "Random seed for negatives")->capture_default_str();
    cls->add_option("--out", cl_out, "Report file (key=value)")->required();

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run the impute/score/train/evaluate grid");
    std::string pl_config;
    std::vector<std::string> pl_set;
    std::string pl_output, pl_dataset, pl_ratios, pl_methods, pl_protocol, pl_seed, pl_threads;
    pipe->add_option("--config", pl_config, "key = value config file")->check(CLI::ExistingFile);
    pipe->add_option("--set", pl_set, "Override one setting (key=value); repeatable");
    pipe->add_option("--output", pl_output, "Output directory (default $PRGE_OUTPUT_ROOT/<dataset>)");
    pipe->add_option("--dataset", pl_dataset, "Dataset name");
    pipe->add_option("--ratios", pl_ratios, "Comma-separated noise ratios");
    pipe->add_option("--methods", pl_methods, "Comma-separated methods: transe,prge,pathrank");
    pipe->add_option("--protocol", pl_protocol, "random | same-relation");
    pipe->add_option("--seed", pl_seed, "Seed");
    pipe->add_option("--threads", pl_threads, "Worker threads");
    bool pl_quiet = false;
    pipe->add_flag("--quiet", pl_quiet, "No progress output");

    // compare
    auto* cmp = app.add_subcommand("compare", "Comparison table from report files");
    std::vector<std::string> cmp_reports;
    std::string cmp_out;
    bool cmp_tsv = false;
    cmp->add_option("reports", cmp_reports, "Report files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", cmp_out, "Write <out>.txt and <out>.tsv instead of printing");
    cmp->add_flag("--tsv", cmp_tsv, "Print the tab-separated table");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic graph");
    std::string sy_kind = "planted", sy_out;
    std::size_t sy_entities = 14951, sy_relations = 1345, sy_triples = 483142;
    std::uint64_t sy_seed = 0;
    synth->add_option("--kind", sy_kind, "planted | random")->capture_default_str();
    synth->add_option("--entities", sy_entities, "Entities (random)")->capture_default_str();
    synth->add_option("--relations", sy_relations, "Relations (random)")->capture_default_str();
    synth->add_option("--triples", sy_triples, "Triples (random)")->capture_default_str();
    synth->add_option("--seed", sy_seed, "Seed (random)")->capture_default_str();
    synth->add_option("--out", sy_out, "Output triple file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*impute) {
            const auto graph = load_graph(imp_in);
            NoiseConfig cfg;
            cfg.ratio = imp_ratio;
            cfg.protocol = parse_noise_protocol(imp_protocol);
            cfg.seed = imp_seed;
            cfg.retry_budget = imp_retries;
            const auto noisy = impute_noise(graph, cfg);
            const fs::path labels = imp_labels.empty() ? fs::path(imp_out + ".labels") : fs::path(imp_labels);
            save_graph(noisy, imp_out, labels);
            std::cerr << "impute: " << graph.size() << " triples + " << noisy.noise_count() << " noise -> " << imp_out
                      << " (labels " << labels.string() << ")\n";
        } else if (*score) {
            const auto graph = load_graph(sc_in);
            const auto table = sc.folds >= 2 ? cross_validated_scores(graph, sc)
                                             : score_graph(train_scorers(graph, sc), graph);
            save_scores(table, sc_out);
            std::cerr << "score: " << table.size() << " confidences -> " << sc_out << '\n';
        } else if (*trn) {
            const auto data = load_with_split(tr_in, tr_split);
            std::optional<ConfidenceTable> conf;
            if (tr_scores != "none") {
                conf = load_scores(tr_scores);
                if (conf->size() != data.graph.size())
                    throw ValidationError("score file has " + std::to_string(conf->size()) +
                                          " entries but the graph has " + std::to_string(data.graph.size()) +
                                          " triples");
            }
            const auto format = tr_format == "text" ? ModelFormat::text : ModelFormat::binary;
            if (tr_format != "text" && tr_format != "binary") throw ValidationError("--format is binary or text");
            auto run = [&](auto tag) {
                using Real = decltype(tag);
                const auto model = train<Real>(data.graph, data.split, conf ? &*conf : nullptr, tc);
                save_model(model, tr_out, format);
                std::cerr << "train: " << (conf ? "prge" : "transe") << ", " << model.epochs_trained
                          << " epochs, best epoch " << model.best_epoch << " -> " << tr_out << '\n';
            };
            if (tr_double)
                run(double{});
            else
                run(float{});
        } else if (*evaluate) {
            const auto graph = load_graph(ev_graph, default_labels(ev_graph, ev_labels));
            if (graph.noise_count() == 0) throw ValidationError("no noise labels: pass --labels");
            std::vector<TripleId> ids(graph.size());
            for (TripleId i = 0; i < ids.size(); ++i) ids[i] = i;
            MetricsReport report;
            DetectionMetrics m;
            if (!ev_scores.empty()) {
                const auto table = load_scores(ev_scores);
                if (table.size() != graph.size()) throw ValidationError("score file does not match the graph");
                m = detection_metrics(graph, ids, confidence_energies(table, ids));
                report.method = ev_method.empty() ? "pathrank" : ev_method;
            } else if (!ev_model.empty()) {
                const auto model = load_model<double>(ev_model, graph.entity_count(), graph.relation_count());
                m = detection_metrics(graph, ids, triple_energies(model, graph, ids));
                report.method = ev_method.empty() ? (model.weighted ? "prge" : "transe") : ev_method;
            } else {
                throw ValidationError("give --model or --scores");
            }
            report.dataset = ev_dataset.empty() ? fs::path(ev_graph).stem().string() : ev_dataset;
            const auto clean = graph.size() - graph.noise_count();
            report.noise_ratio =
                ev_ratio >= 0 ? ev_ratio : static_cast<double>(graph.noise_count()) / static_cast<double>(clean);
            report.protocol = ev_protocol;
            report.seed = ev_seed;
            report.triples = graph.size();
            report.noisy = m.ranking.noisy;
            report.fmr = m.ranking.fmr;
            report.fmrr = m.ranking.fmrr;
            report.auc = m.auc;
            save_report(report, ev_out);
            std::cout << report.to_table();
        } else if (*cls) {
            const auto data = load_with_split(cl_graph, cl_split);
            const auto model = load_model<double>(cl_model);
            if (model.entity_count() > data.graph.entity_count())
                throw ValidationError("model has more entities than the dataset dictionary");
            const auto protocol = parse_noise_protocol(cl_protocol);
            // Triples mentioning labels the model never saw cannot be scored.
            std::size_t skipped = 0;
            auto known = [&](const std::vector<TripleId>& ids) {
                std::vector<TripleId> out;
                for (TripleId id : ids) {
                    const auto& t = data.graph.triple(id);
                    if (t.relation < model.relation_count() && t.subject < model.entity_count() &&
                        t.object < model.entity_count())
                        out.push_back(id);
                    else
                        ++skipped;
                }
                return out;
            };
            if (data.split.validation.empty() || data.split.test.empty())
                throw ValidationError("classification needs validation and test triples");
            const auto valid_ids = known(data.split.validation);
            const auto test_ids = known(data.split.test);
            auto items = [&](const std::vector<TripleId>& ids, std::uint64_t stream) {
                return classification_items(model, data.graph, ids, protocol, derive_seed(cl_seed, stream));
            };
            const auto thresholds = fit_thresholds(items(valid_ids, 11));
            const auto result = classify(items(test_ids, 12), thresholds, model.relation_count());
            std::ostringstream kv;
            kv << "accuracy=" << shortest(result.accuracy) << '\n'
               << "roc_auc=" << shortest(result.roc_auc) << '\n'
               << "evaluated=" << result.evaluated << '\n'
               << "skipped=" << result.skipped + skipped << '\n'
               << "validation_accuracy=" << shortest(thresholds.accuracy) << '\n'
               << "global_threshold=" << shortest(thresholds.global) << '\n'
               << "protocol=" << to_string(protocol) << '\n'
               << "seed=" << cl_seed << '\n';
            for (const auto& [rel, tau] : thresholds.thresholds)
                kv << "threshold." << data.graph.relations().label(rel) << '=' << shortest(tau) << '\n';
            write_text(cl_out, kv.str());
            std::cout << "accuracy " << fixed(result.accuracy, 4) << "  roc_auc " << fixed(result.roc_auc, 4)
                      << "  evaluated " << result.evaluated << "  skipped " << result.skipped + skipped << '\n';
            if (result.skipped + skipped > 0)
                std::cerr << "warning: " << result.skipped + skipped
                          << " test items mention labels unseen in training and were skipped\n";
        } else if (*pipe) {
            ExperimentConfig config;
            try {
                if (!pl_config.empty()) config = ExperimentConfig::load(pl_config);
                for (const auto& kv : pl_set) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
                    config.set(kv.substr(0, eq), kv.substr(eq + 1));
                }
                const std::pair<const char*, const std::string*> flags[] = {
                    {"output", &pl_output},     {"dataset", &pl_dataset}, {"ratios", &pl_ratios},
                    {"methods", &pl_methods},   {"protocol", &pl_protocol}, {"seed", &pl_seed},
                    {"threads", &pl_threads}};
                for (const auto& [key, value] : flags)
                    if (!value->empty()) config.set(key, *value);
                config.validate();
            } catch (const Error& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return 1;
            }
            const auto result = run_pipeline(config, pl_quiet ? nullptr : &std::cerr);
            if (!result.reports.empty()) std::cout << emit_comparison(result.reports).text;
            std::cerr << "manifest: " << result.manifest.string() << " (" << result.cache_hits << " cached, "
                      << result.cache_misses << " run, " << result.errors.size() << " failed)\n";
            return result.exit_code();
        } else if (*cmp) {
            std::vector<MetricsReport> reports;
            for (const auto& p : cmp_reports) reports.push_back(load_report(p));
            const auto table = emit_comparison(reports);
            if (!cmp_out.empty()) {
                write_text(cmp_out + ".txt", table.text);
                write_text(cmp_out + ".tsv", table.tsv);
            } else {
                std::cout << (cmp_tsv ? table.tsv : table.text);
            }
        } else if (*synth) {
            KnowledgeGraph g;
            if (sy_kind == "planted")
                g = planted_graph();
            else if (sy_kind == "random")
                g = random_graph(sy_entities, sy_relations, sy_triples, sy_seed);
            else
                throw ValidationError("--kind is planted or random");
            save_graph(g, sy_out);
            std::cerr << "synth: " << g.size() << " triples, " << g.entity_count() << " entities, "
                      << g.relation_count() << " relations -> " << sy_out << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
