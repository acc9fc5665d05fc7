#include <gtest/gtest.h>

#include <cstdlib>

#include "prge/pipeline.hpp"
#include "support.hpp"

using namespace prge;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

ExperimentConfig quick_config(const std::filesystem::path& out) {
    auto c = ExperimentConfig::parse(
        "dataset = planted\n"
        "synthetic = planted\n"
        "ratios = 0.1\n"
        "methods = transe,prge\n"
        "train.dim = 8\n"
        "train.epochs = 5\n"
        "train.batch_size = 100\n"
        "train.learning_rate = 0.1\n"
        "path.iterations = 100\n");
    c.output = out;
    return c;
}

std::size_t count_prefix(const std::filesystem::path& dir, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().filename().string().rfind(prefix, 0) == 0) ++n;
    return n;
}

}  // namespace

TEST(ExperimentConfig, ParsesCommentsAndOverrides) {
    const auto c = ExperimentConfig::parse(
        "# experiment\n"
        "dataset = fb\n"
        "ratios = 0.1, 0.4   # two cells\n"
        "\n"
        "train.lambda=2\n"
        "path.binarize = true\n"
        "methods = transe,pathrank-only\n");
    EXPECT_EQ(c.dataset, "fb");
    EXPECT_EQ(c.ratios, (std::vector<double>{0.1, 0.4}));
    EXPECT_EQ(c.training.lambda, 2.0);
    EXPECT_TRUE(c.pathrank.binarize);
    EXPECT_EQ(c.methods, (std::vector<Method>{Method::transe, Method::pathrank}));
    auto d = c;
    d.set("train.lambda", "3");
    EXPECT_EQ(d.training.lambda, 3.0);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(ExperimentConfig::parse("colour = red\n"), ParseError);
    EXPECT_THROW(ExperimentConfig::parse("train.dim = wide\n"), ParseError);
    EXPECT_THROW(ExperimentConfig::parse("just words\n"), ParseError);
    EXPECT_THROW(ExperimentConfig::parse("methods = transe,rescal\n"), ParseError);
    EXPECT_THROW(ExperimentConfig::parse("protocol = typed\n"), ParseError);
    ExperimentConfig c;
    EXPECT_THROW(c.set("seed", "-"), ValidationError);
}

TEST(ExperimentConfig, CanonicalTextRoundTrips) {
    auto c = quick_config("out/dir");
    c.seed = 9;
    c.protocol = NoiseProtocol::same_relation;
    const auto back = ExperimentConfig::parse(c.to_text());
    EXPECT_EQ(back.to_text(), c.to_text());
}

TEST(ExperimentConfig, ValidatesSources) {
    ExperimentConfig c;
    EXPECT_THROW(c.validate(), ValidationError);
    c.synthetic = "planted";
    EXPECT_NO_THROW(c.validate());
    c.graph = "missing.tsv";
    EXPECT_THROW(c.validate(), ValidationError);
    c.graph.clear();
    c.ratios = {0.0};
    EXPECT_THROW(c.validate(), ValidationError);
    c.ratios = {0.1};
    c.dataset = "a/b";
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ExperimentConfig, OutputRootFromEnvironment) {
    ExperimentConfig c;
    c.dataset = "wn";
    ::setenv(kOutputRootEnv, "/tmp/prge-root", 1);
    EXPECT_EQ(c.output_dir(), std::filesystem::path("/tmp/prge-root/wn"));
    ::unsetenv(kOutputRootEnv);
    EXPECT_EQ(c.output_dir(), std::filesystem::path("prge-out/wn"));
    c.output = "elsewhere";
    EXPECT_EQ(c.output_dir(), std::filesystem::path("elsewhere"));
}

TEST(Pipeline, SharesNoisyGraphAndCachesRerun) {
    TempDir dir;
    const auto config = quick_config(dir / "out");
    const auto first = run_pipeline(config);
    EXPECT_EQ(first.exit_code(), 0);
    ASSERT_EQ(first.reports.size(), 2u);
    EXPECT_EQ(first.cache_hits, 0u);
    // One noisy graph and one score table serve both methods.
    EXPECT_EQ(count_prefix(dir / "out" / "cache", "noisy-"), 6u);  // graph, labels, split + sidecars
    EXPECT_EQ(count_prefix(dir / "out" / "cache", "scores-"), 2u);
    EXPECT_EQ(count_prefix(dir / "out" / "cache", "model-"), 4u);

    const auto kv = read_file(dir / "out" / "reports" / "planted-10pct-prge.kv");
    const auto manifest = read_file(first.manifest);
    const auto second = run_pipeline(config);
    EXPECT_EQ(second.exit_code(), 0);
    EXPECT_EQ(second.cache_misses, 0u);
    EXPECT_EQ(second.cache_hits, first.cache_misses);
    EXPECT_EQ(read_file(dir / "out" / "reports" / "planted-10pct-prge.kv"), kv);
    EXPECT_EQ(read_file(second.manifest), manifest);
    EXPECT_NE(manifest.find("code_version\t"), std::string::npos);
}

TEST(Pipeline, ManifestIndependentOfOutputDirectory) {
    TempDir dir;
    const auto a = run_pipeline(quick_config(dir / "a"));
    const auto b = run_pipeline(quick_config(dir / "b"));
    EXPECT_EQ(read_file(a.manifest), read_file(b.manifest));
}

TEST(Pipeline, TamperedCacheFileIsRebuilt) {
    TempDir dir;
    const auto config = quick_config(dir / "out");
    const auto first = run_pipeline(config);
    const auto kv = read_file(dir / "out" / "reports" / "planted-10pct-transe.kv");
    for (const auto& entry : std::filesystem::directory_iterator(dir / "out" / "cache")) {
        const auto name = entry.path().filename().string();
        if (name.rfind("model-", 0) == 0 && entry.path().extension() == ".bin") {
            write_file(entry.path(), "garbage");
            break;
        }
    }
    const auto second = run_pipeline(config);
    EXPECT_EQ(second.exit_code(), 0);
    EXPECT_EQ(second.cache_misses, 1u);
    EXPECT_EQ(read_file(dir / "out" / "reports" / "planted-10pct-transe.kv"), kv);
    EXPECT_EQ(read_file(second.manifest), read_file(first.manifest));
}

TEST(Pipeline, FailingCellDoesNotStopOthers) {
    TempDir dir;
    auto config = quick_config(dir / "out");
    // Path length 0 makes scoring fail, which only the weighted method needs.
    config.set("path.max_len", "0");
    const auto result = run_pipeline(config);
    EXPECT_EQ(result.exit_code(), 2);
    ASSERT_EQ(result.reports.size(), 1u);
    EXPECT_EQ(result.reports.front().method, "transe");
    ASSERT_EQ(result.errors.size(), 1u);
    EXPECT_EQ(result.errors.front().cell, "planted-10pct-prge");
    EXPECT_NE(read_file(result.manifest).find("error\tplanted-10pct-prge"), std::string::npos);
}

TEST(Pipeline, PathRankOnlyReport) {
    TempDir dir;
    auto config = quick_config(dir / "out");
    config.set("methods", "pathrank");
    config.set("ratios", "0.2");
    const auto result = run_pipeline(config);
    ASSERT_EQ(result.exit_code(), 0);
    const auto& r = result.reports.front();
    EXPECT_EQ(r.method, "pathrank");
    EXPECT_GT(r.auc, 0.9);
    EXPECT_FALSE(r.classification_accuracy.has_value());
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "comparison.txt"));
}

TEST(Pipeline, ConfigErrorThrowsBeforeWriting) {
    TempDir dir;
    auto config = quick_config(dir / "out");
    config.methods.clear();
    EXPECT_THROW(run_pipeline(config), ValidationError);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(Pipeline, LoadsGraphFileWithHoldout) {
    TempDir dir;
    const auto g = random_graph(60, 3, 400, 2);
    save_graph(g, dir / "g.tsv");
    auto config = quick_config(dir / "out");
    config.synthetic.clear();
    config.graph = dir / "g.tsv";
    config.dataset = "toy";
    config.set("path.min_support", "1");
    const auto result = run_pipeline(config);
    EXPECT_EQ(result.exit_code(), 0);
    EXPECT_EQ(result.reports.size(), 2u);
    for (const auto& r : result.reports) EXPECT_EQ(r.triples, 320u + noise_target(320, 0.1));
}
