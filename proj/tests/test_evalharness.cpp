#include "support.hpp"

#include <semfeat/evalharness.hpp>
#include <semfeat/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <set>

using namespace semfeat;
using namespace semfeat::testing;

namespace {

ScoreGrid grid_of(const std::vector<std::vector<double>>& rows, std::vector<std::size_t> layers) {
    ScoreGrid g;
    for (std::size_t f = 0; f < rows.size(); ++f) g.feature_names.push_back("f" + std::to_string(f + 1));
    g.layer_indices = std::move(layers);
    g.k = 1;
    g.mean_r2 = Matrix(rows.size(), g.layer_indices.size());
    g.per_fold_r2.assign(rows.size() * g.layer_indices.size(), 0.0);
    for (std::size_t f = 0; f < rows.size(); ++f)
        for (std::size_t l = 0; l < rows[f].size(); ++l) g.mean_r2(f, l) = g.fold_r2(f, l, 0) = rows[f][l];
    return g;
}

/// Exact two-sided p by enumerating every sign assignment of the ranks.
double enumerate_p(const std::vector<double>& ranks, double observed_min) {
    const std::size_t n = ranks.size();
    std::size_t hits = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double plus = 0, minus = 0;
        for (std::size_t i = 0; i < n; ++i) (mask >> i & 1 ? plus : minus) += ranks[i];
        if (std::min(plus, minus) <= observed_min + 1e-9) ++hits;
    }
    return std::min(1.0, static_cast<double>(hits) / static_cast<double>(std::uint64_t{1} << n));
}

GridOptions small_options(std::uint64_t seed) {
    GridOptions opt;
    opt.spec.hidden_dims = {8, 8, 8};
    opt.hyper.learning_rate = 3e-3;
    opt.hyper.epochs = 60;
    opt.hyper.batch_size = 32;
    opt.k = 5;
    opt.seed = seed;
    return opt;
}

} // namespace

TEST(Folds, SizesFor535By20) {
    const auto plan = kfold_indices(535, 20, 1);
    auto sizes = plan.fold_sizes();
    EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 27u), 15);
    EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 26u), 5);
}

TEST(Folds, SingletonsWhenNEqualsK) {
    const auto plan = kfold_indices(5, 5, 3);
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < 5; ++f) {
        const auto v = plan.validation(f);
        ASSERT_EQ(v.size(), 1u);
        seen.insert(v[0]);
    }
    EXPECT_EQ(seen.size(), 5u);
}

TEST(Folds, PartitionPropertyOnRandomShapes) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(20);
        const std::size_t n = k + rng.below(300);
        const auto seed = rng.next_u64();
        const auto plan = kfold_indices(n, k, seed);
        std::vector<int> hits(n, 0);
        for (std::size_t f = 0; f < k; ++f) {
            const auto v = plan.validation(f);
            const auto t = plan.training(f);
            EXPECT_EQ(v.size() + t.size(), n);
            for (auto i : v) ++hits[i];
        }
        for (int h : hits) EXPECT_EQ(h, 1);
        const auto sizes = plan.fold_sizes();
        EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
        EXPECT_EQ(kfold_indices(n, k, seed).assignment, plan.assignment);
    }
}

TEST(Folds, KAboveNIsDomainError) {
    EXPECT_TRUE(throws_kind([] { kfold_indices(3, 4, 0); }, ErrorKind::domain));
}

TEST(RSquared, HandValues) {
    const std::vector<double> y = {1, 2, 3};
    EXPECT_EQ(r_squared(y, y), 1.0);
    EXPECT_DOUBLE_EQ(r_squared(y, std::vector<double>{2, 2, 2}), 0.0);
    EXPECT_DOUBLE_EQ(r_squared(y, std::vector<double>{1, 2, 2}), 0.5);
    EXPECT_TRUE(throws_kind([] { r_squared(std::vector<double>{4, 4}, std::vector<double>{1, 2}); },
                            ErrorKind::degenerate));
}

TEST(RSquared, AffineInvariance) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(60);
        const auto y = random_vector(rng, n);
        const auto yh = random_vector(rng, n);
        const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
        std::vector<double> y2(n), yh2(n);
        for (std::size_t i = 0; i < n; ++i) {
            y2[i] = a * y[i] + b;
            yh2[i] = a * yh[i] + b;
        }
        EXPECT_NEAR(r_squared(y, yh), r_squared(y2, yh2), 1e-9 * (1 + std::abs(r_squared(y, yh))));
    }
}

TEST(Aggregation, TwoByTwoGrid) {
    const auto g = grid_of({{.1, .3}, {.4, .2}}, {0, 1});
    const auto cb = combined_best(g);
    EXPECT_EQ(cb.best_layers.at("f1"), 1u);
    EXPECT_EQ(cb.best_layers.at("f2"), 0u);
    EXPECT_NEAR(cb.mean, 0.35, 1e-15);
    const auto sl = best_single_layer(g);
    EXPECT_EQ(sl.layer, 0u);
    EXPECT_NEAR(sl.mean, 0.25, 1e-15);
}

TEST(Aggregation, SingleLayerGrid) {
    const auto g = grid_of({{.1}, {.5}, {.3}}, {7});
    EXPECT_EQ(best_single_layer(g).layer, 7u);
    EXPECT_NEAR(combined_best(g).mean, 0.3, 1e-15);
}

TEST(Aggregation, CombinedNeverBelowSingleLayer) {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t F = 1 + rng.below(10), L = 1 + rng.below(6);
        std::vector<std::vector<double>> rows(F, std::vector<double>(L));
        for (auto& r : rows)
            for (double& v : r) v = rng.uniform(-0.5, 1.0);
        std::vector<std::size_t> layers(L);
        for (std::size_t l = 0; l < L; ++l) layers[l] = l;
        const auto g = grid_of(rows, layers);
        EXPECT_GE(combined_best(g).mean, best_single_layer(g).mean - 1e-15);
    }
}

TEST(Wilcoxon, EqualInputsDegenerate) {
    const std::vector<double> a = {1, 2, 3};
    const auto r = wilcoxon_signed_rank(a, a);
    EXPECT_EQ(r.p_two_sided, 1.0);
    EXPECT_EQ(r.n_effective, 0u);
    EXPECT_EQ(r.method, WilcoxonMethod::exact);
}

TEST(Wilcoxon, ThreePositiveDifferences) {
    const auto r = wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0});
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_two_sided, 0.25);
}

TEST(Wilcoxon, SymmetricInArguments) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        const auto a = random_vector(rng, n);
        const auto b = random_vector(rng, n);
        const auto x = wilcoxon_signed_rank(a, b);
        const auto y = wilcoxon_signed_rank(b, a);
        EXPECT_EQ(x.p_two_sided, y.p_two_sided);
        EXPECT_EQ(x.w_plus, y.w_minus);
    }
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> a(n), b(n, 0.0);
        // Small integer magnitudes force tied ranks.
        for (double& v : a) v = static_cast<double>(1 + rng.below(4)) * (rng.below(2) ? 1.0 : -1.0);
        const auto r = wilcoxon_signed_rank(a, b);
        const auto sr = signed_ranks(a, b);
        EXPECT_EQ(r.method, WilcoxonMethod::exact);
        std::vector<double> ranks;
        for (auto d : sr.doubled) ranks.push_back(static_cast<double>(d) / 2.0);
        EXPECT_NEAR(r.p_two_sided, enumerate_p(ranks, r.statistic), 1e-12);
    }
}

TEST(Variance, HandMatrix) {
    Matrix m(2, 2);
    m(1, 0) = m(1, 1) = 1.0;
    const auto v = variance_decomposition(m);
    EXPECT_DOUBLE_EQ(v.inter_feature, 0.25);
    EXPECT_DOUBLE_EQ(v.inter_model, 0.0);
    Matrix t(2, 2);
    t(0, 1) = t(1, 1) = 3.0;
    EXPECT_DOUBLE_EQ(variance_decomposition(t).inter_feature, 0.0);
}

TEST(GridJson, RoundTrip) {
    Rng rng(9);
    ScoreGrid g;
    g.feature_names = {"Vision", "Pain"};
    g.layer_indices = {0, 3, 5};
    g.k = 4;
    g.mean_r2 = Matrix(2, 3);
    g.per_fold_r2.resize(2 * 3 * 4);
    for (double& v : g.per_fold_r2) v = rng.normal();
    for (double& v : g.mean_r2.data()) v = rng.normal();
    const auto back = grid_from_json(nlohmann::json::parse(grid_to_json(g).dump()));
    EXPECT_EQ(back.feature_names, g.feature_names);
    EXPECT_EQ(back.layer_indices, g.layer_indices);
    EXPECT_EQ(back.mean_r2.data(), g.mean_r2.data());
    EXPECT_EQ(back.per_fold_r2, g.per_fold_r2);
    EXPECT_TRUE(throws_kind([] { grid_from_json(nlohmann::json::object()); }, ErrorKind::format));
}

TEST(RunGrid, MeanIsAverageOfFolds) {
    SyntheticSpec spec;
    spec.n_words = 60;
    spec.dim = 6;
    spec.n_layers = 2;
    spec.planted = {{"Vision", 1, 0.8}};
    spec.seed = 10;
    const auto data = generate_synthetic_dump(spec);
    auto opt = small_options(10);
    opt.features = {"Vision", "Pain"};
    const auto g = run_grid(data.dump, data.norms, {0, 1}, opt);
    ASSERT_EQ(g.feature_count(), 2u);
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t l = 0; l < 2; ++l) {
            double s = 0;
            for (std::size_t k = 0; k < g.k; ++k) s += g.fold_r2(f, l, k);
            EXPECT_NEAR(g.mean_r2(f, l), s / g.k, 1e-12);
        }
    EXPECT_EQ(g.provenance.at("dump").at("model_id"), "synthetic");
}

TEST(RunGrid, StaticDumpGivesOneColumn) {
    SyntheticSpec spec;
    spec.n_words = 30;
    spec.dim = 4;
    spec.n_layers = 1;
    spec.seed = 11;
    const auto data = generate_synthetic_dump(spec);
    auto opt = small_options(11);
    opt.hyper.epochs = 2;
    opt.k = 3;
    const auto g = run_grid(data.dump, data.norms, {0}, opt);
    EXPECT_EQ(g.feature_count(), 65u);
    EXPECT_EQ(g.layer_count(), 1u);
}

TEST(RunGrid, MissingWordsFailBeforeTraining) {
    SyntheticSpec spec;
    spec.n_words = 10;
    spec.dim = 3;
    spec.n_layers = 1;
    auto data = generate_synthetic_dump(spec);
    data.norms.words[3] = "zzz";
    data.norms.words[7] = "yyy";
    EXPECT_TRUE(throws_kind([&] { run_grid(data.dump, data.norms, {0}, small_options(1)); }, ErrorKind::lookup,
                            "zzz yyy"));
}

TEST(RunGrid, ShuffledTargetsCarryNoSignal) {
    SyntheticSpec spec;
    spec.n_words = 200;
    spec.dim = 8;
    spec.n_layers = 1;
    spec.planted = {{"Vision", 0, 0.9}};
    spec.seed = 12;
    auto data = generate_synthetic_dump(spec);
    const std::size_t col = data.norms.feature_index("Vision");
    std::vector<double> y = data.norms.feature_column(col);
    Rng rng(13);
    rng.shuffle(y);
    for (std::size_t r = 0; r < y.size(); ++r) data.norms.values(r, col) = y[r];
    auto opt = small_options(12);
    opt.features = {"Vision"};
    EXPECT_LT(run_grid(data.dump, data.norms, {0}, opt).mean_r2(0, 0), 0.1);
}

TEST(Pairs, MeanOfPairsRowsAreEqualPerProperty) {
    SyntheticPairSpec spec;
    spec.n_properties = 10;
    spec.seed = 14;
    const auto sp = generate_synthetic_pairs(spec);
    const auto X = pair_design(sp.dump, sp.pairs, 1, PairMode::mean_of_pairs);
    const auto C = pair_design(sp.dump, sp.pairs, 1, PairMode::contextual);
    for (std::size_t i = 0; i + 1 < X.rows(); i += 2) {
        ASSERT_EQ(to_lower(sp.pairs.entries[i].property), to_lower(sp.pairs.entries[i + 1].property));
        for (std::size_t c = 0; c < X.cols(); ++c) {
            EXPECT_EQ(X(i, c), X(i + 1, c));
            EXPECT_NEAR(X(i, c), 0.5 * (C(i, c) + C(i + 1, c)), 1e-12);
        }
    }
}

TEST(Pairs, MissingRecordIsLookupError) {
    SyntheticPairSpec spec;
    spec.n_properties = 4;
    auto sp = generate_synthetic_pairs(spec);
    sp.pairs.entries[2].property = "unseen";
    EXPECT_TRUE(throws_kind([&] { pair_design(sp.dump, sp.pairs, 0, PairMode::contextual); }, ErrorKind::lookup,
                            "unseen"));
}
