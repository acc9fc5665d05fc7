#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "prge/embed.hpp"
#include "prge/model_io.hpp"
#include "prge/noise.hpp"
#include "prge/synthetic.hpp"
#include "support.hpp"

using namespace prge;
using testing_support::make_graph;
using testing_support::TempDir;

namespace {

EmbeddingModel<double> model_2d(std::initializer_list<std::array<double, 2>> entities,
                                std::initializer_list<std::array<double, 2>> relations) {
    EmbeddingModel<double> m(entities.size(), relations.size(), 2);
    std::size_t i = 0;
    for (const auto& e : entities) std::copy(e.begin(), e.end(), m.entity(static_cast<EntityId>(i++)).begin());
    i = 0;
    for (const auto& r : relations) std::copy(r.begin(), r.end(), m.relation(static_cast<RelationId>(i++)).begin());
    return m;
}

TrainingConfig small_config(std::uint64_t seed = 0) {
    TrainingConfig c;
    c.dim = 16;
    c.epochs = 60;
    c.learning_rate = 0.05;
    c.batch_size = 50;
    c.seed = seed;
    return c;
}

template <typename Real>
double row_norm(std::span<const Real> row) {
    double s = 0.0;
    for (Real x : row) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

}  // namespace

TEST(Energy, Examples) {
    const auto m = model_2d({{1, 0}, {1, 1}, {0, 0}}, {{0, 1}, {4, 6}});
    EXPECT_DOUBLE_EQ(energy(m, Triple{0, 0, 1, false}), 0.0);
    EXPECT_DOUBLE_EQ(energy(m, Triple{2, 0, 2, false}), 1.0);
    EXPECT_DOUBLE_EQ(energy(m, Triple{2, 1, 2, false}), std::sqrt(52.0));
}

TEST(Hinge, Examples) {
    EXPECT_DOUBLE_EQ(hinge(1.0, 0.5, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(hinge(1.0, 2.0, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(hinge(1.0, 1.0, 2.0), 0.0);
}

TEST(PrgeWeight, Examples) {
    EXPECT_EQ(prge_weight(1.0, 5.0), 1.0);
    EXPECT_DOUBLE_EQ(prge_weight(0.5, 5.0), 0.03125);
    EXPECT_EQ(prge_weight(0.3, 0.0), 1.0);
    EXPECT_EQ(prge_weight(0.0, 0.0), 1.0);
    EXPECT_EQ(prge_weight(0.0, 2.0), 0.0);
    EXPECT_THROW(prge_weight(1.2, 5.0), ValidationError);
    EXPECT_THROW(prge_weight(-0.1, 5.0), ValidationError);
    EXPECT_THROW(prge_weight(0.5, -1.0), ValidationError);
}

TEST(SampleNegative, ReplacesOneSideAvoidingTraining) {
    const auto g = random_graph(500, 4, 3000, 3);
    const auto split = Split::all_train(g);
    const TripleSet training(g, split.train);
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const Triple& t = g.triple(static_cast<TripleId>(i % g.size()));
        const Triple c = sample_negative(training, g.entity_count(), t, rng);
        EXPECT_EQ(c.relation, t.relation);
        EXPECT_LE((c.subject != t.subject) + (c.object != t.object), 1);
        EXPECT_FALSE(training.contains(c));
    }
}

TEST(SampleNegative, TwoEntityGraphIsExhaustive) {
    const auto g = make_graph({{"a", "R", "b"}});
    const TripleSet training(g, Split::all_train(g).train);
    const EntityId a = *g.entities().find("a"), b = *g.entities().find("b");
    std::set<std::pair<EntityId, EntityId>> seen;
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const Triple c = sample_negative(training, 2, g.triple(0), rng);
        seen.insert({c.subject, c.object});
    }
    EXPECT_EQ(seen, (std::set<std::pair<EntityId, EntityId>>{{a, a}, {b, b}}));
}

TEST(BatchLoss, GradientMatchesFiniteDifferences) {
    Rng rng(17);
    auto m = init_model<double>(6, 2, 5, rng);
    const std::vector<Triple> pos{{0, 0, 1, false}, {2, 1, 3, false}, {4, 0, 5, false}};
    const std::vector<Triple> neg{{0, 0, 4, false}, {5, 1, 3, false}, {4, 0, 2, false}};
    const std::vector<double> w{1.0, 0.4, 0.03};
    // A wide margin keeps every pair in the active region of the hinge.
    const double margin = 10.0;
    SparseGradient<double> grad(6, 2, 5);
    batch_loss<double>(m, pos, neg, w, margin, &grad);

    const double h = 1e-6;
    auto check = [&](std::vector<double>& data, std::size_t idx, double analytic) {
        const double keep = data[idx];
        data[idx] = keep + h;
        const double up = batch_loss<double>(m, pos, neg, w, margin);
        data[idx] = keep - h;
        const double down = batch_loss<double>(m, pos, neg, w, margin);
        data[idx] = keep;
        const double numeric = (up - down) / (2 * h);
        EXPECT_LE(std::abs(numeric - analytic), 1e-4 * std::max(1.0, std::abs(numeric))) << "coordinate " << idx;
    };
    for (EntityId e = 0; e < 6; ++e)
        for (std::size_t k = 0; k < 5; ++k) check(m.entity_data(), e * 5 + k, grad.entity(e)[k]);
    for (RelationId r = 0; r < 2; ++r)
        for (std::size_t k = 0; k < 5; ++k) check(m.relation_data(), r * 5 + k, grad.relation(r)[k]);
}

TEST(BatchLoss, WeightedNeverExceedsUnweighted) {
    Rng rng(2);
    const auto m = init_model<double>(20, 3, 8, rng);
    std::vector<Triple> pos, neg;
    std::vector<double> w, ones;
    for (int i = 0; i < 50; ++i) {
        pos.push_back({static_cast<EntityId>(uniform_index(rng, 20)), static_cast<RelationId>(uniform_index(rng, 3)),
                       static_cast<EntityId>(uniform_index(rng, 20)), false});
        neg.push_back({pos.back().subject, pos.back().relation, static_cast<EntityId>(uniform_index(rng, 20)), false});
        w.push_back(prge_weight(uniform_real(rng, 0.0, 1.0), 5.0));
        ones.push_back(1.0);
    }
    EXPECT_LE(batch_loss<double>(m, pos, neg, w, 1.0), batch_loss<double>(m, pos, neg, ones, 1.0));
}

TEST(BatchLoss, GradientIsLinearInWeight) {
    Rng rng(3);
    const auto m = init_model<double>(4, 1, 6, rng);
    const std::vector<Triple> pos{{0, 0, 1, false}}, neg{{0, 0, 2, false}};
    SparseGradient<double> g1(4, 1, 6), g2(4, 1, 6);
    const std::vector<double> w1{0.25}, w2{0.75};
    batch_loss<double>(m, pos, neg, w1, 10.0, &g1);
    batch_loss<double>(m, pos, neg, w2, 10.0, &g2);
    for (EntityId e = 0; e < 4; ++e)
        for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(g2.entity(e)[k], 3.0 * g1.entity(e)[k], 1e-12);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(g2.relation(0)[k], 3.0 * g1.relation(0)[k], 1e-12);
}

TEST(BatchLoss, RejectsMisalignedInputs) {
    EmbeddingModel<double> m(2, 1, 2);
    const std::vector<Triple> pos{{0, 0, 1, false}};
    const std::vector<Triple> neg;
    const std::vector<double> w{1.0};
    EXPECT_THROW(batch_loss<double>(m, pos, neg, w, 1.0), ValidationError);
}

TEST(Train, LambdaZeroIsBitIdenticalToTransE) {
    const auto g = planted_graph();
    const auto split = Split::all_train(g);
    ConfidenceTable conf;
    Rng rng(4);
    for (std::size_t i = 0; i < g.size(); ++i) conf.scores.push_back(uniform_real(rng, 0.0, 1.0));
    auto cfg = small_config();
    cfg.epochs = 10;
    cfg.lambda = 0.0;
    const auto plain = train<float>(g, split, nullptr, cfg);
    const auto weighted = train<float>(g, split, &conf, cfg);
    EXPECT_EQ(plain.entity_data(), weighted.entity_data());
    EXPECT_EQ(plain.relation_data(), weighted.relation_data());
}

TEST(Train, FitsTinyGraph) {
    const auto g = make_graph({{"a", "R", "b"}, {"b", "R", "c"}, {"c", "R", "d"}, {"d", "Q", "a"}});
    auto cfg = small_config();
    cfg.epochs = 300;
    cfg.margin = 0.5;
    const auto m = train<double>(g, Split::all_train(g), nullptr, cfg);
    // Each training triple should sit well below every corruption of itself.
    for (const auto& t : g.triples()) {
        for (EntityId e = 0; e < g.entity_count(); ++e) {
            Triple c = t;
            c.object = e;
            if (g.contains(c)) continue;
            EXPECT_LT(energy(m, t), energy(m, c));
        }
    }
}

TEST(Train, EntityRowsAreUnitNorm) {
    const auto g = random_graph(80, 3, 400, 5);
    const auto m = train<float>(g, Split::all_train(g), nullptr, small_config());
    for (EntityId e = 0; e < m.entity_count(); ++e) EXPECT_NEAR(row_norm<float>(m.entity(e)), 1.0, 1e-5);
}

TEST(Train, DeterministicForSeed) {
    const auto g = random_graph(80, 3, 400, 5);
    const auto split = random_split(g, 0.1, 0.1, 1);
    const auto a = train<float>(g, split, nullptr, small_config(3));
    const auto b = train<float>(g, split, nullptr, small_config(3));
    const auto c = train<float>(g, split, nullptr, small_config(4));
    EXPECT_EQ(a.entity_data(), b.entity_data());
    EXPECT_EQ(a.best_epoch, b.best_epoch);
    EXPECT_NE(a.entity_data(), c.entity_data());
}

TEST(Train, EarlyStoppingKeepsBestEpoch) {
    const auto g = random_graph(80, 3, 400, 5);
    const auto split = random_split(g, 0.2, 0.0, 1);
    auto cfg = small_config();
    cfg.epochs = 400;
    cfg.patience = 5;
    const auto m = train<float>(g, split, nullptr, cfg);
    EXPECT_GE(m.best_epoch, 1);
    EXPECT_LE(m.best_epoch, m.epochs_trained);
    EXPECT_TRUE(m.epochs_trained == cfg.epochs || m.epochs_trained == m.best_epoch + cfg.patience);
    EXPECT_TRUE(std::isfinite(m.best_validation));
}

TEST(Train, DownweightingNoiseWidensEnergyGap) {
    // With the true labels as confidences, weighting should push noise energies
    // further above clean ones than unweighted training does.
    NoiseConfig noise;
    noise.ratio = 0.2;
    noise.seed = 1;
    const auto g = impute_noise(planted_graph(), noise);
    ConfidenceTable oracle;
    for (const auto& t : g.triples()) oracle.scores.push_back(t.is_noise ? 0.1 : 1.0);
    auto cfg = small_config(1);
    cfg.epochs = 150;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 100;
    const auto split = Split::all_train(g);
    auto gap = [&](const EmbeddingModel<float>& m) {
        double noisy = 0.0, clean = 0.0;
        for (const auto& t : g.triples()) (t.is_noise ? noisy : clean) += energy(m, t);
        return noisy / static_cast<double>(g.noise_count()) - clean / static_cast<double>(g.size() - g.noise_count());
    };
    const double transe = gap(train<float>(g, split, nullptr, cfg));
    const double prge = gap(train<float>(g, split, &oracle, cfg));
    EXPECT_GE(prge, transe);
}

TEST(Train, NonFiniteLossIsReported) {
    const auto g = random_graph(30, 2, 100, 1);
    auto cfg = small_config();
    cfg.learning_rate = 1e200;
    EXPECT_THROW(train<double>(g, Split::all_train(g), nullptr, cfg), TrainingError);
}

TEST(Train, RejectsBadInputs) {
    const auto g = random_graph(30, 2, 100, 1);
    auto cfg = small_config();
    cfg.dim = 0;
    EXPECT_THROW(train<float>(g, Split::all_train(g), nullptr, cfg), ValidationError);
    EXPECT_THROW(train<float>(g, Split{}, nullptr, small_config()), ValidationError);
    ConfidenceTable short_table;
    EXPECT_THROW(train<float>(g, Split::all_train(g), &short_table, small_config()), ValidationError);
}

TEST(Train, HogwildProducesUsableModel) {
    const auto g = random_graph(80, 3, 400, 5);
    auto cfg = small_config();
    cfg.deterministic = false;
    cfg.threads = 2;
    const auto m = train<float>(g, Split::all_train(g), nullptr, cfg);
    for (float x : m.entity_data()) ASSERT_TRUE(std::isfinite(x));
    for (EntityId e = 0; e < m.entity_count(); ++e) EXPECT_NEAR(row_norm<float>(m.entity(e)), 1.0, 1e-5);
}

TEST(TrainingConfig, TextRoundTrip) {
    auto cfg = small_config(12);
    cfg.lambda = 2.5;
    cfg.deterministic = false;
    const auto back = TrainingConfig::from_text(cfg.to_text());
    EXPECT_EQ(back.to_text(), cfg.to_text());
    EXPECT_EQ(back.digest(), cfg.digest());
    EXPECT_THROW(TrainingConfig::from_text("depth=3\n"), ValidationError);
}

TEST(ModelIo, RoundTripsBothFormats) {
    TempDir dir;
    const auto g = random_graph(40, 3, 200, 2);
    auto cfg = small_config();
    cfg.epochs = 5;
    const auto m = train<float>(g, Split::all_train(g), nullptr, cfg);
    for (auto format : {ModelFormat::text, ModelFormat::binary}) {
        const auto path = dir / (format == ModelFormat::text ? "m.txt" : "m.bin");
        save_model(m, path, format);
        const auto back = load_model<float>(path, g.entity_count(), g.relation_count());
        EXPECT_EQ(back.entity_data(), m.entity_data());
        EXPECT_EQ(back.relation_data(), m.relation_data());
        EXPECT_EQ(back.config.to_text(), m.config.to_text());
        EXPECT_EQ(back.epochs_trained, m.epochs_trained);
        EXPECT_EQ(back.best_epoch, m.best_epoch);

        const auto wide = load_model<double>(path);
        for (std::size_t i = 0; i < m.entity_data().size(); ++i)
            EXPECT_EQ(wide.entity_data()[i], static_cast<double>(m.entity_data()[i]));
    }
}

TEST(ModelIo, DoublePrecisionRoundTrip) {
    TempDir dir;
    Rng rng(8);
    auto m = init_model<double>(7, 2, 3, rng);
    m.config.dim = 3;
    for (auto format : {ModelFormat::text, ModelFormat::binary}) {
        save_model(m, dir / "d", format);
        EXPECT_EQ(load_model<double>(dir / "d").entity_data(), m.entity_data());
    }
}

TEST(ModelIo, ShapeMismatchIsAnError) {
    TempDir dir;
    Rng rng(8);
    save_model(init_model<float>(7, 2, 3, rng), dir / "m.bin");
    EXPECT_THROW(load_model<float>(dir / "m.bin", 8), ValidationError);
    EXPECT_THROW(load_model<float>(dir / "m.bin", 7, 3), ValidationError);
    EXPECT_THROW(load_model<float>(dir / "missing.bin"), IoError);
    testing_support::write_file(dir / "junk", "not a model\n");
    EXPECT_THROW(load_model<float>(dir / "junk"), ParseError);
}
