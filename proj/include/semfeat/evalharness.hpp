#pragma once

// Cross-validated scoring of per-feature regressors across model layers,
// plus the aggregations and paired tests used to compare embedding models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "embedstore.hpp"
#include "error.hpp"
#include "mlp.hpp"
#include "util.hpp"

namespace semfeat {

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
    std::size_t n_samples = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment; // sample -> fold id

    std::vector<std::size_t> validation(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n_samples; ++i)
            if (assignment[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> training(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n_samples; ++i)
            if (assignment[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> fold_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t f : assignment) ++sizes[f];
        return sizes;
    }
};

/// Shuffle 0..n-1 and cut the permutation into k contiguous chunks; the
/// first n % k chunks get one extra sample.
inline FoldPlan kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::domain, "k must be at least 2");
    if (k > n) fail(ErrorKind::domain, "k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);

    FoldPlan plan{n, k, seed, std::vector<std::size_t>(n, 0)};
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) plan.assignment[perm[pos++]] = f;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// R^2

/// 1 - SS_res / SS_tot with SS_tot about the mean of y. Not clipped.
inline double r_squared(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) fail(ErrorKind::shape, "y and y_hat differ in length");
    if (y.size() < 2) fail(ErrorKind::domain, "R^2 needs at least 2 samples");
    const double mu = mean_of(y);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - mu) * (y[i] - mu);
    }
    if (ss_tot == 0.0) fail(ErrorKind::degenerate, "R^2 undefined for a constant target");
    return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Score grid

struct ScoreGrid {
    std::vector<std::string> feature_names;
    std::vector<std::size_t> layer_indices;
    std::size_t k = 0;
    Matrix mean_r2;                   // features x layers
    std::vector<double> per_fold_r2;  // [feature][layer][fold], row-major
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t feature_count() const { return feature_names.size(); }
    std::size_t layer_count() const { return layer_indices.size(); }

    double& fold_r2(std::size_t f, std::size_t l, std::size_t fold) {
        return per_fold_r2[(f * layer_count() + l) * k + fold];
    }
    double fold_r2(std::size_t f, std::size_t l, std::size_t fold) const {
        return per_fold_r2[(f * layer_count() + l) * k + fold];
    }

    /// Column position of a model layer index.
    std::size_t column_of(std::size_t layer) const {
        for (std::size_t c = 0; c < layer_indices.size(); ++c)
            if (layer_indices[c] == layer) return c;
        fail(ErrorKind::lookup, "layer " + std::to_string(layer) + " not in grid");
    }

    std::size_t row_of(std::string_view feature) const {
        for (std::size_t r = 0; r < feature_names.size(); ++r)
            if (feature_names[r] == feature) return r;
        fail(ErrorKind::lookup, "feature '" + std::string(feature) + "' not in grid");
    }

    std::vector<double> column_means() const {
        std::vector<double> out(layer_count(), 0.0);
        for (std::size_t c = 0; c < layer_count(); ++c) out[c] = mean_of(mean_r2.column(c));
        return out;
    }
};

struct GridOptions {
    NetworkSpec spec;
    TrainHyper hyper;
    std::size_t k = 20;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::vector<std::string> features; // empty = every norms feature
};

/// Seed for one (feature, layer, fold) training task.
inline std::uint64_t task_seed(std::uint64_t base, std::string_view feature, std::size_t layer, std::size_t fold) {
    return derive_seed(base, {tag_of(feature), layer, fold});
}

inline std::uint64_t fold_seed(std::uint64_t base) { return derive_seed(base, {tag_of("folds")}); }

inline nlohmann::json hyper_json(const NetworkSpec& spec, const TrainHyper& hyper) {
    return {{"hidden_dims", {spec.hidden_dims[0], spec.hidden_dims[1], spec.hidden_dims[2]}},
            {"activation", "relu"},
            {"learning_rate", hyper.learning_rate},
            {"epochs", hyper.epochs},
            {"batch_size", hyper.batch_size},
            {"adam_beta1", hyper.adam_beta1},
            {"adam_beta2", hyper.adam_beta2},
            {"adam_epsilon", hyper.adam_epsilon}};
}

namespace detail {

/// Cross-validate every (target column, layer) pair. `designs[l]` is the
/// design matrix for layers[l]; `targets` is samples x features.
inline ScoreGrid cross_validate(const std::vector<Matrix>& designs, const std::vector<std::size_t>& layers,
                                const Matrix& targets, const std::vector<std::string>& feature_names,
                                const GridOptions& opt) {
    const std::size_t n = targets.rows();
    const FoldPlan plan = kfold_indices(n, opt.k, fold_seed(opt.seed));
    std::vector<std::vector<std::size_t>> train_idx(opt.k), valid_idx(opt.k);
    for (std::size_t f = 0; f < opt.k; ++f) {
        train_idx[f] = plan.training(f);
        valid_idx[f] = plan.validation(f);
    }

    ScoreGrid grid;
    grid.feature_names = feature_names;
    grid.layer_indices = layers;
    grid.k = opt.k;
    grid.mean_r2 = Matrix(feature_names.size(), layers.size());
    grid.per_fold_r2.assign(feature_names.size() * layers.size() * opt.k, 0.0);

    std::vector<std::vector<double>> columns(feature_names.size());
    for (std::size_t f = 0; f < feature_names.size(); ++f) columns[f] = targets.column(f);

    const std::size_t tasks = feature_names.size() * layers.size() * opt.k;
    parallel_for(tasks, opt.jobs, [&](std::size_t t) {
        const std::size_t fold = t % opt.k;
        const std::size_t l = (t / opt.k) % layers.size();
        const std::size_t f = t / (opt.k * layers.size());
        const Matrix& X = designs[l];
        TrainHyper hyper = opt.hyper;
        hyper.seed = task_seed(opt.seed, feature_names[f], layers[l], fold);
        const auto y_train = select(columns[f], train_idx[fold]);
        const auto y_valid = select(columns[f], valid_idx[fold]);
        const TrainedModel model = train(X.select_rows(train_idx[fold]), y_train, opt.spec, hyper);
        const auto pred = predict(model, X.select_rows(valid_idx[fold]));
        grid.fold_r2(f, l, fold) = r_squared(y_valid, pred);
    });

    for (std::size_t f = 0; f < feature_names.size(); ++f)
        for (std::size_t l = 0; l < layers.size(); ++l) {
            double s = 0.0;
            for (std::size_t fold = 0; fold < opt.k; ++fold) s += grid.fold_r2(f, l, fold);
            grid.mean_r2(f, l) = s / static_cast<double>(opt.k);
        }

    grid.provenance["hyper"] = hyper_json(opt.spec, opt.hyper);
    grid.provenance["k"] = opt.k;
    grid.provenance["seed"] = opt.seed;
    grid.provenance["fold_seed"] = plan.seed;
    return grid;
}

inline nlohmann::json manifest_provenance(const DumpManifest& m) {
    return {{"model_id", m.model_id},
            {"n_layers", m.n_layers},
            {"dim", m.dim},
            {"pooling", std::string(to_string(m.pooling))},
            {"record_count", m.record_count}};
}

} // namespace detail

/// Cross-validated mean R^2 for every (feature, layer), predicting each
/// feature from the words' mean-over-occurrence embeddings. All design
/// matrices are built (and missing words reported) before any training.
inline ScoreGrid run_grid(const EmbeddingDump& dump, const SemanticNorms& norms, const std::vector<std::size_t>& layers,
                          const GridOptions& opt) {
    if (layers.empty()) fail(ErrorKind::domain, "no layers requested");
    std::vector<Matrix> designs;
    designs.reserve(layers.size());
    for (std::size_t layer : layers) designs.push_back(design_matrix(dump, norms.words, layer));

    std::vector<std::string> features = opt.features.empty() ? norms.feature_names : opt.features;
    Matrix targets(norms.word_count(), features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
        const std::size_t src = norms.feature_index(features[j]);
        for (std::size_t r = 0; r < norms.word_count(); ++r) targets(r, j) = norms.values(r, src);
    }
    ScoreGrid grid = detail::cross_validate(designs, layers, targets, features, opt);
    grid.provenance["dump"] = detail::manifest_provenance(dump.manifest());
    grid.provenance["mode"] = "mean";
    return grid;
}

// ---------------------------------------------------------------------------
// Aggregations

struct BestLayerMap {
    std::vector<std::string> feature_names;
    std::vector<std::size_t> layers; // model layer index per feature

    std::size_t at(std::string_view feature) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i)
            if (feature_names[i] == feature) return layers[i];
        fail(ErrorKind::lookup, "feature '" + std::string(feature) + "' has no best layer");
    }
};

struct CombinedBest {
    BestLayerMap best_layers;
    std::vector<double> best_r2; // per feature
    double mean = 0.0;
};

/// Per-feature best layer (ties to the lowest layer), and the mean over
/// features of those best scores.
inline CombinedBest combined_best(const ScoreGrid& grid) {
    if (grid.feature_count() == 0 || grid.layer_count() == 0) fail(ErrorKind::domain, "empty grid");
    CombinedBest out;
    out.best_layers.feature_names = grid.feature_names;
    for (std::size_t f = 0; f < grid.feature_count(); ++f) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < grid.layer_count(); ++c) {
            const double v = grid.mean_r2(f, c);
            const double b = grid.mean_r2(f, best);
            if (v > b || (v == b && grid.layer_indices[c] < grid.layer_indices[best])) best = c;
        }
        out.best_layers.layers.push_back(grid.layer_indices[best]);
        out.best_r2.push_back(grid.mean_r2(f, best));
    }
    out.mean = mean_of(out.best_r2);
    return out;
}

struct SingleLayerBest {
    std::size_t layer = 0;
    double mean = 0.0;
};

/// Layer with the highest mean R^2 across features; ties to the lowest layer.
inline SingleLayerBest best_single_layer(const ScoreGrid& grid) {
    if (grid.feature_count() == 0 || grid.layer_count() == 0) fail(ErrorKind::domain, "empty grid");
    const auto means = grid.column_means();
    std::size_t best = 0;
    for (std::size_t c = 1; c < means.size(); ++c)
        if (means[c] > means[best] || (means[c] == means[best] && grid.layer_indices[c] < grid.layer_indices[best]))
            best = c;
    return {grid.layer_indices[best], means[best]};
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class WilcoxonMethod { exact, normal_approx };

inline std::string_view to_string(WilcoxonMethod m) {
    return m == WilcoxonMethod::exact ? "exact" : "normal_approx";
}

struct WilcoxonResult {
    double statistic = 0.0; // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    std::size_t n_effective = 0;
    double p_two_sided = 1.0;
    WilcoxonMethod method = WilcoxonMethod::exact;
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

struct SignedRanks {
    std::vector<double> diffs;          // non-zero differences
    std::vector<std::uint64_t> doubled; // 2 * average rank of |d|, always an integer
    std::vector<std::size_t> tie_sizes;
};

/// Average ranks of |d| over the non-zero differences, doubled so that
/// tied half-ranks stay integral.
inline SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorKind::shape, "paired samples differ in length");
    SignedRanks sr;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) sr.diffs.push_back(d);
    }
    const std::size_t n = sr.diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return std::abs(sr.diffs[x]) < std::abs(sr.diffs[y]); });
    sr.doubled.assign(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(sr.diffs[order[j + 1]]) == std::abs(sr.diffs[order[i]])) ++j;
        // positions i..j (0-based) share rank ((i+1) + (j+1)) / 2
        const std::uint64_t doubled_rank = (i + 1) + (j + 1);
        for (std::size_t t = i; t <= j; ++t) sr.doubled[order[t]] = doubled_rank;
        sr.tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return sr;
}

inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    const SignedRanks sr = signed_ranks(a, b);
    WilcoxonResult res;
    res.n_effective = sr.diffs.size();
    if (res.n_effective == 0) return res; // p = 1, exact

    std::uint64_t w_plus2 = 0, total2 = 0;
    for (std::size_t i = 0; i < sr.diffs.size(); ++i) {
        total2 += sr.doubled[i];
        if (sr.diffs[i] > 0) w_plus2 += sr.doubled[i];
    }
    const std::uint64_t w_minus2 = total2 - w_plus2;
    const std::uint64_t w2 = std::min(w_plus2, w_minus2);
    res.w_plus = static_cast<double>(w_plus2) / 2.0;
    res.w_minus = static_cast<double>(w_minus2) / 2.0;
    res.statistic = static_cast<double>(w2) / 2.0;

    const std::size_t n = res.n_effective;
    if (n <= kWilcoxonExactMax) {
        // Distribution of the doubled positive-rank sum over all 2^n sign
        // assignments, by subset-sum counting.
        std::vector<std::uint64_t> counts(total2 + 1, 0);
        counts[0] = 1;
        for (std::uint64_t r : sr.doubled)
            for (std::uint64_t s = total2; s + 1 > r; --s) counts[s] += counts[s - r];
        std::uint64_t extreme = 0;
        for (std::uint64_t s = 0; s <= total2; ++s)
            if (std::min(s, total2 - s) <= w2) extreme += counts[s];
        res.p_two_sided = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
        res.method = WilcoxonMethod::exact;
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (std::size_t t : sr.tie_sizes) {
        const double tt = static_cast<double>(t);
        var -= (tt * tt * tt - tt) / 48.0;
    }
    res.method = WilcoxonMethod::normal_approx;
    if (var <= 0.0) {
        res.p_two_sided = 1.0;
        return res;
    }
    const double z = std::max(0.0, (std::abs(res.statistic - mu) - 0.5) / std::sqrt(var));
    res.p_two_sided = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
    return res;
}

// ---------------------------------------------------------------------------
// Variance decomposition

struct VarianceSplit {
    double inter_feature = 0.0;
    double inter_model = 0.0;
};

/// scores is features x models. inter_feature: mean over models of the
/// population variance down each column; inter_model: mean over features of
/// the population variance along each row.
inline VarianceSplit variance_decomposition(const Matrix& scores) {
    if (scores.rows() < 2 || scores.cols() < 2) fail(ErrorKind::domain, "need at least 2 features and 2 models");
    VarianceSplit out;
    for (std::size_t c = 0; c < scores.cols(); ++c) out.inter_feature += population_variance(scores.column(c));
    out.inter_feature /= static_cast<double>(scores.cols());
    for (std::size_t r = 0; r < scores.rows(); ++r) out.inter_model += population_variance(scores.row(r));
    out.inter_model /= static_cast<double>(scores.rows());
    return out;
}

// ---------------------------------------------------------------------------
// Property/object pairs

enum class PairMode { contextual, mean_of_pairs };

inline std::string_view to_string(PairMode m) { return m == PairMode::contextual ? "contextual" : "mean_of_pairs"; }

/// Dump key of the property-word occurrence for pair entry `index`.
inline OccurrenceKey pair_key(const PairNorms& pairs, std::size_t index) {
    return {to_lower(pairs.entries[index].property), static_cast<std::int64_t>(index), 0, std::string("property")};
}

struct PairResult {
    PairMode mode = PairMode::contextual;
    ScoreGrid grid;               // 5 features x layers
    CombinedBest best;            // per-feature best layer and R^2
};

/// Design matrix for the pair experiment at one layer. In mean_of_pairs
/// mode each row is the average of the property's two contextual vectors.
inline Matrix pair_design(const EmbeddingDump& dump, const PairNorms& pairs, std::size_t layer, PairMode mode) {
    std::vector<OccurrenceKey> keys;
    keys.reserve(pairs.entries.size());
    for (std::size_t i = 0; i < pairs.entries.size(); ++i) keys.push_back(pair_key(pairs, i));
    Matrix X = design_matrix(dump, keys, layer);
    if (mode == PairMode::contextual) return X;

    std::map<std::string, std::vector<std::size_t>> rows_by_property;
    for (std::size_t i = 0; i < pairs.entries.size(); ++i)
        rows_by_property[to_lower(pairs.entries[i].property)].push_back(i);
    Matrix out(X.rows(), X.cols());
    for (const auto& [property, rows] : rows_by_property) {
        std::vector<double> avg(X.cols(), 0.0);
        for (std::size_t r : rows)
            for (std::size_t c = 0; c < X.cols(); ++c) avg[c] += X(r, c);
        for (double& v : avg) v /= static_cast<double>(rows.size());
        for (std::size_t r : rows) std::copy(avg.begin(), avg.end(), out.row(r).begin());
    }
    return out;
}

inline PairResult run_pair_experiment(const EmbeddingDump& dump, const PairNorms& pairs, PairMode mode,
                                      const std::vector<std::size_t>& layers, const GridOptions& opt) {
    if (layers.empty()) fail(ErrorKind::domain, "no layers requested");
    std::vector<Matrix> designs;
    for (std::size_t layer : layers) designs.push_back(pair_design(dump, pairs, layer, mode));
    Matrix targets(pairs.entries.size(), 5);
    for (std::size_t i = 0; i < pairs.entries.size(); ++i)
        for (std::size_t f = 0; f < 5; ++f) targets(i, f) = pairs.entries[i].scores[f];

    PairResult out;
    out.mode = mode;
    out.grid = detail::cross_validate(designs, layers, targets, pair_feature_names(), opt);
    out.grid.provenance["dump"] = detail::manifest_provenance(dump.manifest());
    out.grid.provenance["mode"] = std::string(to_string(mode));
    out.best = combined_best(out.grid);
    return out;
}

// ---------------------------------------------------------------------------
// Grid JSON

inline nlohmann::json grid_to_json(const ScoreGrid& grid) {
    nlohmann::json mean = nlohmann::json::array();
    nlohmann::json per_fold = nlohmann::json::array();
    for (std::size_t f = 0; f < grid.feature_count(); ++f) {
        mean.push_back(std::vector<double>(grid.mean_r2.row(f).begin(), grid.mean_r2.row(f).end()));
        nlohmann::json layers = nlohmann::json::array();
        for (std::size_t l = 0; l < grid.layer_count(); ++l) {
            std::vector<double> folds(grid.k);
            for (std::size_t k = 0; k < grid.k; ++k) folds[k] = grid.fold_r2(f, l, k);
            layers.push_back(folds);
        }
        per_fold.push_back(layers);
    }
    return {{"feature_names", grid.feature_names},
            {"layer_indices", grid.layer_indices},
            {"k", grid.k},
            {"mean_r2", mean},
            {"per_fold_r2", per_fold},
            {"provenance", grid.provenance}};
}

inline ScoreGrid grid_from_json(const nlohmann::json& j) {
    ScoreGrid g;
    try {
        g.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        g.layer_indices = j.at("layer_indices").get<std::vector<std::size_t>>();
        g.k = j.at("k").get<std::size_t>();
        g.mean_r2 = Matrix(g.feature_names.size(), g.layer_indices.size());
        g.per_fold_r2.assign(g.feature_names.size() * g.layer_indices.size() * g.k, 0.0);
        const auto& mean = j.at("mean_r2");
        const auto& folds = j.at("per_fold_r2");
        for (std::size_t f = 0; f < g.feature_count(); ++f)
            for (std::size_t l = 0; l < g.layer_count(); ++l) {
                g.mean_r2(f, l) = mean.at(f).at(l).get<double>();
                for (std::size_t k = 0; k < g.k; ++k) g.fold_r2(f, l, k) = folds.at(f).at(l).at(k).get<double>();
            }
        if (j.contains("provenance")) g.provenance = j.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("bad grid JSON: ") + e.what());
    }
    return g;
}

} // namespace semfeat
