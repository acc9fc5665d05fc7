#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prge/detail/format.hpp"
#include "prge/error.hpp"
#include "prge/graph_io.hpp"

namespace prge {

// Convention tag written into every report so numbers from different
// ranking conventions are never compared by accident.
inline constexpr const char* kRankingConvention = "filtered:other-noise-removed;descending-energy";

struct MetricsReport {
    std::string dataset;
    std::string method;
    double noise_ratio = 0.0;
    std::string protocol;
    std::uint64_t seed = 0;
    std::size_t triples = 0;
    std::size_t noisy = 0;
    double fmr = 0.0;
    double fmrr = 0.0;
    double auc = 0.0;
    std::optional<double> classification_accuracy;
    std::optional<double> classification_roc_auc;
    std::size_t classification_skipped = 0;
    std::string convention = kRankingConvention;

    // One "key=value" per line.
    std::string to_kv() const {
        std::ostringstream os;
        os << "dataset=" << dataset << '\n'
           << "method=" << method << '\n'
           << "noise_ratio=" << shortest(noise_ratio) << '\n'
           << "protocol=" << protocol << '\n'
           << "seed=" << seed << '\n'
           << "triples=" << triples << '\n'
           << "noisy=" << noisy << '\n'
           << "fmr=" << shortest(fmr) << '\n'
           << "fmrr=" << shortest(fmrr) << '\n'
           << "auc=" << shortest(auc) << '\n';
        if (classification_accuracy) os << "classification_accuracy=" << shortest(*classification_accuracy) << '\n';
        if (classification_roc_auc) os << "classification_roc_auc=" << shortest(*classification_roc_auc) << '\n';
        os << "classification_skipped=" << classification_skipped << '\n' << "convention=" << convention << '\n';
        return os.str();
    }

    static MetricsReport from_kv(const std::string& text, const std::string& source = "<report>") {
        MetricsReport r;
        std::istringstream is(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
            const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
            try {
                if (k == "dataset") r.dataset = v;
                else if (k == "method") r.method = v;
                else if (k == "noise_ratio") r.noise_ratio = std::stod(v);
                else if (k == "protocol") r.protocol = v;
                else if (k == "seed") r.seed = std::stoull(v);
                else if (k == "triples") r.triples = std::stoull(v);
                else if (k == "noisy") r.noisy = std::stoull(v);
                else if (k == "fmr") r.fmr = std::stod(v);
                else if (k == "fmrr") r.fmrr = std::stod(v);
                else if (k == "auc") r.auc = std::stod(v);
                else if (k == "classification_accuracy") r.classification_accuracy = std::stod(v);
                else if (k == "classification_roc_auc") r.classification_roc_auc = std::stod(v);
                else if (k == "classification_skipped") r.classification_skipped = std::stoull(v);
                else if (k == "convention") r.convention = v;
                else throw ParseError(source, line_no, "unknown key '" + k + "'");
            } catch (const std::logic_error&) {
                throw ParseError(source, line_no, "bad value for '" + k + "'");
            }
        }
        return r;
    }

    // Human-readable single-run table.
    std::string to_table() const {
        std::ostringstream os;
        const std::string ratio = fixed(noise_ratio * 100.0, 0) + "%";
        os << dataset << "-" << ratio << " (" << protocol << " noise, seed " << seed << ")\n";
        os << pad("Method", 12) << pad("fMR", 12) << pad("fMRR", 10) << pad("AUC", 10);
        if (classification_roc_auc) os << pad("Cls-Acc", 10) << pad("Cls-AUC", 10);
        os << '\n';
        os << pad(method, 12) << pad(fixed(fmr, 1), 12) << pad(fixed(fmrr, 4), 10) << pad(fixed(auc, 4), 10);
        if (classification_roc_auc)
            os << pad(fixed(classification_accuracy.value_or(0.0), 4), 10) << pad(fixed(*classification_roc_auc, 4), 10);
        os << '\n' << "triples=" << triples << " noisy=" << noisy << " ranking=" << convention << '\n';
        return os.str();
    }

    static std::string pad(const std::string& s, std::size_t width) {
        return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
    }
};

inline void save_report(const MetricsReport& report, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << report.to_kv();
    if (!out) throw IoError("write failed: " + path.string());
}

inline MetricsReport load_report(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return MetricsReport::from_kv(ss.str(), path.string());
}

struct ComparisonTable {
    std::string text;
    std::string tsv;
};

// Rows are methods, column groups are noise ratios, cells are fMR / fMRR /
// AUC. The best value of each column (lowest fMR, highest fMRR and AUC) is
// marked with '*'. All reports must come from one dataset.
inline ComparisonTable emit_comparison(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ValidationError("comparison needs at least one report");
    const std::string dataset = reports.front().dataset;
    for (const auto& r : reports)
        if (r.dataset != dataset)
            throw ValidationError("cannot compare reports from datasets '" + dataset + "' and '" + r.dataset + "'");

    std::vector<double> ratios;
    std::vector<std::string> methods;
    for (const auto& r : reports) {
        if (std::find(ratios.begin(), ratios.end(), r.noise_ratio) == ratios.end()) ratios.push_back(r.noise_ratio);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    std::sort(ratios.begin(), ratios.end());
    std::map<std::pair<std::string, double>, const MetricsReport*> cell;
    for (const auto& r : reports) {
        if (!cell.emplace(std::make_pair(r.method, r.noise_ratio), &r).second)
            throw ValidationError("duplicate report for method '" + r.method + "' at ratio " + shortest(r.noise_ratio));
    }

    struct Best {
        double fmr = INFINITY, fmrr = -INFINITY, auc = -INFINITY;
    };
    std::map<double, Best> best;
    for (const auto& r : reports) {
        auto& b = best[r.noise_ratio];
        b.fmr = std::min(b.fmr, r.fmr);
        b.fmrr = std::max(b.fmrr, r.fmrr);
        b.auc = std::max(b.auc, r.auc);
    }

    auto label = [&](double ratio) { return dataset + "-" + fixed(ratio * 100.0, 0) + "%"; };
    constexpr std::size_t w_method = 14, w_cell = 11;
    std::ostringstream text, tsv;
    text << MetricsReport::pad("", w_method);
    tsv << "method";
    for (double ratio : ratios) {
        text << "| " << MetricsReport::pad(label(ratio), 3 * w_cell - 2);
        for (const char* m : {"fMR", "fMRR", "AUC"}) tsv << '\t' << label(ratio) << ' ' << m;
    }
    text << '\n' << MetricsReport::pad("Method", w_method);
    tsv << '\n';
    for (std::size_t i = 0; i < ratios.size(); ++i)
        text << "| " << MetricsReport::pad("fMR", w_cell) << MetricsReport::pad("fMRR", w_cell)
             << MetricsReport::pad("AUC", w_cell - 2);
    text << '\n';
    for (const auto& method : methods) {
        text << MetricsReport::pad(method, w_method);
        tsv << method;
        for (double ratio : ratios) {
            auto it = cell.find({method, ratio});
            if (it == cell.end()) {
                text << "| " << MetricsReport::pad("-", w_cell) << MetricsReport::pad("-", w_cell)
                     << MetricsReport::pad("-", w_cell - 2);
                tsv << "\t\t\t";
                continue;
            }
            const auto& r = *it->second;
            const auto& b = best[ratio];
            const std::string fmr = fixed(r.fmr, 1) + (r.fmr == b.fmr ? "*" : "");
            const std::string fmrr = fixed(r.fmrr, 4) + (r.fmrr == b.fmrr ? "*" : "");
            const std::string auc_s = fixed(r.auc, 4) + (r.auc == b.auc ? "*" : "");
            text << "| " << MetricsReport::pad(fmr, w_cell) << MetricsReport::pad(fmrr, w_cell)
                 << MetricsReport::pad(auc_s, w_cell - 2);
            tsv << '\t' << fmr << '\t' << fmrr << '\t' << auc_s;
        }
        text << '\n';
        tsv << '\n';
    }
    text << "* best in column; ranking convention: " << kRankingConvention << '\n';
    return {text.str(), tsv.str()};
}

}  // namespace prge
