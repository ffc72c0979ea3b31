#include "support.hpp"

#include <semfeat/evalharness.hpp>
#include <semfeat/synthetic.hpp>

#include <cmath>

using namespace semfeat;
using namespace semfeat::testing;

namespace {

GridOptions quick(std::uint64_t seed) {
    GridOptions opt;
    opt.spec.hidden_dims = {16, 16, 8};
    opt.hyper.learning_rate = 3e-3;
    opt.hyper.epochs = 300;
    opt.hyper.batch_size = 32;
    opt.k = 5;
    opt.seed = seed;
    return opt;
}

} // namespace

TEST(SyntheticDump, ShapesAndTruth) {
    SyntheticSpec spec;
    spec.n_words = 50;
    spec.dim = 6;
    spec.n_layers = 3;
    spec.planted = {{"Pain", 1, 0.6}};
    const auto data = generate_synthetic_dump(spec);
    EXPECT_EQ(data.dump.size(), 50u);
    EXPECT_EQ(data.dump.manifest().n_layers, 3u);
    EXPECT_EQ(data.norms.word_count(), 50u);
    EXPECT_EQ(data.norms.feature_count(), 65u);
    ASSERT_EQ(data.truth.size(), 1u);
    EXPECT_NEAR(data.truth[0].theoretical_r2, 0.6, 1e-12);
    for (double v : data.norms.values.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 6.0);
    }
}

TEST(SyntheticDump, PlantedTargetIsLinearPlusNoise) {
    SyntheticSpec spec;
    spec.n_words = 80;
    spec.dim = 5;
    spec.n_layers = 2;
    spec.planted = {{"Vision", 0, 0.7}};
    spec.seed = 3;
    const auto data = generate_synthetic_dump(spec);
    const auto& t = data.truth[0];
    const std::size_t col = data.norms.feature_index("Vision");
    std::vector<double> y = data.norms.feature_column(col), fit(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto x = data.dump.records()[i].layer_as_double(0);
        fit[i] = t.intercept;
        for (std::size_t d = 0; d < x.size(); ++d) fit[i] += t.weights[d] * x[d];
    }
    // Sample R^2 of the planted linear predictor matches the recorded value.
    EXPECT_NEAR(r_squared(y, fit), t.theoretical_r2, 1e-4);
}

TEST(SyntheticDump, SameSeedSameBytes) {
    SyntheticSpec spec;
    spec.n_words = 20;
    spec.dim = 3;
    spec.planted = {{"Vision", 2, 0.5}};
    spec.seed = 9;
    EXPECT_EQ(serialize_dump(generate_synthetic_dump(spec).dump), serialize_dump(generate_synthetic_dump(spec).dump));
}

TEST(SyntheticDump, NoiselessSignalRecovered) {
    SyntheticSpec spec;
    spec.n_words = 200;
    spec.dim = 8;
    spec.n_layers = 2;
    spec.planted = {{"Vision", 1, 1.0}};
    spec.seed = 4;
    const auto data = generate_synthetic_dump(spec);
    EXPECT_EQ(data.truth[0].sigma, 0.0);
    EXPECT_EQ(data.truth[0].theoretical_r2, 1.0);
    auto opt = quick(4);
    opt.features = {"Vision"};
    EXPECT_GT(run_grid(data.dump, data.norms, {1}, opt).mean_r2(0, 0), 0.95);
}

TEST(SyntheticDump, BadSpecsRejected) {
    SyntheticSpec spec;
    spec.planted = {{"Sparkle", 0, 0.5}};
    EXPECT_TRUE(throws_kind([&] { generate_synthetic_dump(spec); }, ErrorKind::lookup, "Sparkle"));
    spec.planted = {{"Vision", 9, 0.5}};
    EXPECT_TRUE(throws_kind([&] { generate_synthetic_dump(spec); }, ErrorKind::index));
}

TEST(SyntheticPairs, StructureAndKeys) {
    SyntheticPairSpec spec;
    spec.n_properties = 12;
    const auto sp = generate_synthetic_pairs(spec);
    EXPECT_EQ(sp.pairs.entries.size(), 24u);
    EXPECT_EQ(sp.pairs.distinct_properties().size(), 12u);
    for (std::size_t i = 0; i < sp.pairs.entries.size(); ++i) EXPECT_NE(sp.dump.find(pair_key(sp.pairs, i)), nullptr);
    EXPECT_GT(sp.contextual_r2, sp.mean_of_pairs_r2);
}

TEST(SyntheticWiC, SplitsAndShuffledGold) {
    SyntheticWiCSpec spec;
    spec.n_items = 40;
    const auto wic = generate_synthetic_wic(spec);
    EXPECT_EQ(wic.train.dataset.items.size(), 40u);
    EXPECT_EQ(wic.dev.dataset.split, "dev");
    std::size_t positives = 0;
    for (const auto& it : wic.train.dataset.items) positives += it.gold;
    EXPECT_EQ(positives, 20u);
    const auto shuffled = shuffle_gold(wic.train.dataset, 1);
    std::size_t after = 0;
    for (const auto& it : shuffled.items) after += it.gold;
    EXPECT_EQ(after, 20u);
}
