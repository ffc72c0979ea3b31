#pragma once

// Planted-signal fixtures: embedding dumps with known linear structure and
// matching norms, pair norms and WiC datasets. Every generator is a pure
// function of its spec.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedstore.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "util.hpp"
#include "wsd.hpp"

namespace semfeat {

struct PlantedFeature {
    std::string feature;
    std::size_t layer = 0;
    double r2 = 1.0; // theoretical R^2 of the linear relation
};

struct SyntheticSpec {
    std::size_t n_words = 500;
    std::size_t dim = 64;
    std::size_t n_layers = 4;
    std::size_t latent_rank = 1;      // rank of the structured part of each layer
    double isotropic_noise = 0.0;     // sd of extra noise in every embedding coordinate
    std::vector<PlantedFeature> planted;
    double target_mean = 3.0;
    double target_sd = 0.6;
    std::string model_id = "synthetic";
    std::uint64_t seed = 0;
};

struct PlantedTruth {
    std::string feature;
    std::size_t layer = 0;
    std::vector<double> weights; // y = intercept + w.x + eps
    double intercept = 0.0;
    double sigma = 0.0;          // sd of eps
    double theoretical_r2 = 1.0; // Var(w.x) / (Var(w.x) + sigma^2)
};

struct SyntheticData {
    EmbeddingDump dump;
    SemanticNorms norms;
    std::vector<PlantedTruth> truth;
};

namespace detail {

inline std::string synthetic_word(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%05zu", prefix, i);
    return buf;
}

/// `rank` orthonormal directions in R^dim by Gram-Schmidt on Gaussians.
inline std::vector<std::vector<double>> orthonormal_basis(std::size_t dim, std::size_t rank, Rng& rng) {
    if (rank > dim) fail(ErrorKind::domain, "latent rank exceeds dim");
    std::vector<std::vector<double>> basis;
    while (basis.size() < rank) {
        std::vector<double> q(dim);
        for (double& v : q) v = rng.normal();
        for (const auto& p : basis) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) d += p[i] * q[i];
            for (std::size_t i = 0; i < dim; ++i) q[i] -= d * p[i];
        }
        double norm = 0.0;
        for (double v : q) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& v : q) v /= norm;
        basis.push_back(std::move(q));
    }
    return basis;
}

/// Noise that is centred, uncorrelated with `signal` in-sample, and scaled
/// so the sample R^2 of signal against signal + noise equals `r2` exactly.
inline std::vector<double> exact_moment_noise(const std::vector<double>& signal, double r2, Rng& rng) {
    const std::size_t n = signal.size();
    std::vector<double> e(n, 0.0);
    if (r2 >= 1.0) return e;
    if (!(r2 > 0.0)) fail(ErrorKind::domain, "planted r2 must be in (0, 1]");
    for (double& v : e) v = rng.normal();
    const double me = mean_of(e);
    const double ms = mean_of(signal);
    double cross = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e[i] -= me;
        cross += e[i] * (signal[i] - ms);
        ss += (signal[i] - ms) * (signal[i] - ms);
    }
    if (ss <= 0.0) fail(ErrorKind::degenerate, "planted signal has zero variance");
    for (std::size_t i = 0; i < n; ++i) e[i] -= cross / ss * (signal[i] - ms);
    const double ve = population_variance(e);
    const double scale = std::sqrt((ss / static_cast<double>(n)) * (1.0 - r2) / r2 / ve);
    for (double& v : e) v *= scale;
    return e;
}

} // namespace detail

/// Build a dump of one occurrence per word whose layers are independent
/// low-rank Gaussian clouds, plus norms in which each planted feature is a
/// linear function of its layer's vectors. Other features are pure noise.
inline SyntheticData generate_synthetic_dump(const SyntheticSpec& spec) {
    if (spec.n_words < 2 || spec.dim < 1 || spec.n_layers < 1)
        fail(ErrorKind::domain, "synthetic dump needs >= 2 words, dim >= 1, n_layers >= 1");
    const auto& names = binder_feature_names();
    for (const auto& p : spec.planted) {
        if (std::find(names.begin(), names.end(), p.feature) == names.end())
            fail(ErrorKind::lookup, "unknown planted feature '" + p.feature + "'");
        if (p.layer >= spec.n_layers) fail(ErrorKind::index, "planted layer outside the dump");
    }
    const std::size_t n = spec.n_words;

    std::vector<Matrix> layer_x;
    std::vector<std::vector<std::vector<double>>> bases;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        Rng rng(derive_seed(spec.seed, {tag_of("layer"), l}));
        bases.push_back(detail::orthonormal_basis(spec.dim, spec.latent_rank, rng));
        Matrix X(n, spec.dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t r = 0; r < spec.latent_rank; ++r) {
                const double z = rng.normal();
                for (std::size_t d = 0; d < spec.dim; ++d) X(i, d) += z * bases[l][r][d];
            }
            if (spec.isotropic_noise > 0.0)
                for (std::size_t d = 0; d < spec.dim; ++d) X(i, d) += spec.isotropic_noise * rng.normal();
            // Stored as f32; keep the design matrix identical to what readers see.
            for (std::size_t d = 0; d < spec.dim; ++d) X(i, d) = static_cast<double>(static_cast<float>(X(i, d)));
        }
        layer_x.push_back(std::move(X));
    }

    SyntheticData out;
    std::vector<EmbeddingRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        EmbeddingRecord rec;
        rec.key = {detail::synthetic_word('w', i), 0, 0, std::nullopt};
        rec.n_layers = spec.n_layers;
        rec.dim = spec.dim;
        rec.tensor.resize(spec.n_layers * spec.dim);
        for (std::size_t l = 0; l < spec.n_layers; ++l)
            for (std::size_t d = 0; d < spec.dim; ++d)
                rec.tensor[l * spec.dim + d] = static_cast<float>(layer_x[l](i, d));
        out.norms.words.push_back(rec.key.word);
        records.push_back(std::move(rec));
    }
    out.dump = EmbeddingDump(DumpManifest{spec.model_id, spec.n_layers, spec.dim, Pooling::mean, n}, std::move(records));

    out.norms.feature_names = names;
    out.norms.values = Matrix(n, names.size());
    for (std::size_t f = 0; f < names.size(); ++f) {
        Rng rng(derive_seed(spec.seed, {tag_of("feature"), tag_of(names[f])}));
        const auto planted = std::find_if(spec.planted.begin(), spec.planted.end(),
                                          [&](const PlantedFeature& p) { return p.feature == names[f]; });
        if (planted == spec.planted.end()) {
            for (std::size_t i = 0; i < n; ++i)
                out.norms.values(i, f) =
                    std::clamp(spec.target_mean + spec.target_sd * rng.normal(), 0.0, kNormMax);
            continue;
        }
        const Matrix& X = layer_x[planted->layer];
        const auto& basis = bases[planted->layer];
        PlantedTruth truth;
        truth.feature = names[f];
        truth.layer = planted->layer;
        truth.weights.assign(spec.dim, 0.0);
        for (const auto& q : basis) {
            const double c = rng.normal();
            for (std::size_t d = 0; d < spec.dim; ++d) truth.weights[d] += c * q[d];
        }
        std::vector<double> signal(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < spec.dim; ++d) signal[i] += truth.weights[d] * X(i, d);
        const double sd = std::sqrt(population_variance(signal));
        if (sd <= 0.0) fail(ErrorKind::degenerate, "planted signal for '" + names[f] + "' is constant");
        const double scale = spec.target_sd * std::sqrt(planted->r2) / sd;
        for (double& w : truth.weights) w *= scale;
        for (double& s : signal) s *= scale;
        const double mu = mean_of(signal);
        truth.intercept = spec.target_mean - mu;
        const auto noise = detail::exact_moment_noise(signal, planted->r2, rng);
        truth.sigma = std::sqrt(population_variance(noise));
        const double var_signal = population_variance(signal);
        truth.theoretical_r2 = var_signal / (var_signal + truth.sigma * truth.sigma);
        for (std::size_t i = 0; i < n; ++i) {
            const double y = truth.intercept + signal[i] + noise[i];
            if (y < 0.0 || y > kNormMax)
                fail(ErrorKind::range, "planted value for '" + names[f] + "' leaves [0, 6]; lower target_sd");
            out.norms.values(i, f) = y;
        }
        out.truth.push_back(std::move(truth));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pairs

struct SyntheticPairSpec {
    std::size_t n_properties = 200; // two objects each
    std::size_t dim = 16;
    std::size_t n_layers = 2;
    std::size_t signal_layer = 1;
    double noise_var = 0.5; // relative to unit shared and unit context variance
    double target_mean = 2.5;
    double target_sd = 0.5;
    std::string model_id = "synthetic-pairs";
    std::uint64_t seed = 0;
};

struct SyntheticPairs {
    EmbeddingDump dump;
    PairNorms pairs;
    double contextual_r2 = 0.0;    // theoretical, contextual vectors
    double mean_of_pairs_r2 = 0.0; // theoretical, averaged vectors
};

/// The property vector in context j is g_p q1 + u_pj q2; each feature is
/// +-g_p +- u_pj + noise. Averaging a property's two contexts halves the
/// variance of the context part, which the regressor can then no longer see.
inline SyntheticPairs generate_synthetic_pairs(const SyntheticPairSpec& spec) {
    if (spec.signal_layer >= spec.n_layers) fail(ErrorKind::index, "signal layer outside the dump");
    if (spec.dim < 2) fail(ErrorKind::domain, "pair fixture needs dim >= 2");
    Rng rng(derive_seed(spec.seed, {tag_of("pairs")}));
    std::vector<std::vector<std::vector<double>>> bases;
    for (std::size_t l = 0; l < spec.n_layers; ++l) bases.push_back(detail::orthonormal_basis(spec.dim, 2, rng));

    std::array<double, 5> sign_g{}, sign_u{};
    for (std::size_t f = 0; f < 5; ++f) {
        sign_g[f] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        sign_u[f] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    const double total = 2.0 + spec.noise_var;
    const double unit = spec.target_sd / std::sqrt(total);

    SyntheticPairs out;
    out.contextual_r2 = 2.0 / total;
    out.mean_of_pairs_r2 = 1.5 / total;
    std::vector<EmbeddingRecord> records;
    for (std::size_t p = 0; p < spec.n_properties; ++p) {
        const std::string property = detail::synthetic_word('p', p);
        const double g = rng.normal();
        for (std::size_t j = 0; j < 2; ++j) {
            const double u = rng.normal();
            PairEntry e;
            e.property = property;
            e.object = detail::synthetic_word(j == 0 ? 'a' : 'b', p);
            for (std::size_t f = 0; f < 5; ++f) {
                const double y = spec.target_mean +
                                 unit * (sign_g[f] * g + sign_u[f] * u + std::sqrt(spec.noise_var) * rng.normal());
                e.scores[f] = std::clamp(y, 0.0, kPairNormMax);
            }
            out.pairs.entries.push_back(e);

            EmbeddingRecord rec;
            rec.key = pair_key(out.pairs, out.pairs.entries.size() - 1);
            rec.n_layers = spec.n_layers;
            rec.dim = spec.dim;
            rec.tensor.resize(spec.n_layers * spec.dim);
            for (std::size_t l = 0; l < spec.n_layers; ++l) {
                const double a = l == spec.signal_layer ? g : rng.normal();
                const double b = l == spec.signal_layer ? u : rng.normal();
                for (std::size_t d = 0; d < spec.dim; ++d)
                    rec.tensor[l * spec.dim + d] = static_cast<float>(a * bases[l][0][d] + b * bases[l][1][d]);
            }
            records.push_back(std::move(rec));
        }
    }
    const std::size_t count = records.size();
    out.dump = EmbeddingDump(DumpManifest{spec.model_id, spec.n_layers, spec.dim, Pooling::mean, count},
                             std::move(records));
    return out;
}

// ---------------------------------------------------------------------------
// WiC

struct SyntheticWiCSpec {
    std::size_t n_items = 400; // per split, half same-sense
    std::size_t dim = 32;
    std::size_t n_layers = 1;
    double jitter = 0.05; // same-sense perturbation relative to a unit vector
    std::string model_id = "synthetic-wic";
    std::uint64_t seed = 0;
};

struct SyntheticWiCSplit {
    WiCDataset dataset;
    EmbeddingDump dump;
};

struct SyntheticWiC {
    SyntheticWiCSplit train;
    SyntheticWiCSplit dev;
};

namespace detail {

inline SyntheticWiCSplit synthetic_wic_split(const SyntheticWiCSpec& spec, const std::string& split) {
    Rng rng(derive_seed(spec.seed, {tag_of("wic"), tag_of(split)}));
    SyntheticWiCSplit out;
    out.dataset.split = split;
    std::vector<EmbeddingRecord> records;
    const double jitter = spec.jitter / std::sqrt(static_cast<double>(spec.dim));
    for (std::size_t i = 0; i < spec.n_items; ++i) {
        WiCItem item;
        item.target = synthetic_word('t', i);
        item.pos = "N";
        item.index1 = 1;
        item.index2 = 2;
        item.sentence1 = "the " + item.target + " stood";
        item.sentence2 = "a small " + item.target + " fell";
        item.gold = i % 2 == 0;
        out.dataset.items.push_back(item);

        for (int side = 1; side <= 2; ++side) {
            EmbeddingRecord rec;
            rec.key = wic_key(out.dataset, i, side);
            rec.n_layers = spec.n_layers;
            rec.dim = spec.dim;
            rec.tensor.resize(spec.n_layers * spec.dim);
            records.push_back(std::move(rec));
        }
        auto& r1 = records[records.size() - 2];
        auto& r2 = records[records.size() - 1];
        for (std::size_t l = 0; l < spec.n_layers; ++l) {
            std::vector<double> a(spec.dim), b(spec.dim);
            for (double& v : a) v = rng.normal();
            const double norm_a = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
            for (double& v : a) v /= norm_a;
            if (item.gold) {
                for (std::size_t d = 0; d < spec.dim; ++d) b[d] = a[d] + jitter * rng.normal();
            } else {
                // A different sense: a random direction orthogonal to a.
                for (double& v : b) v = rng.normal();
                const double proj = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
                for (std::size_t d = 0; d < spec.dim; ++d) b[d] -= proj * a[d];
                const double norm_b = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
                for (double& v : b) v /= norm_b;
                for (std::size_t d = 0; d < spec.dim; ++d) b[d] += jitter * rng.normal();
            }
            for (std::size_t d = 0; d < spec.dim; ++d) {
                r1.layer(l)[d] = static_cast<float>(a[d]);
                r2.layer(l)[d] = static_cast<float>(b[d]);
            }
        }
    }
    const std::size_t count = records.size();
    out.dump = EmbeddingDump(DumpManifest{spec.model_id, spec.n_layers, spec.dim, Pooling::mean, count},
                             std::move(records));
    return out;
}

} // namespace detail

/// Balanced train and dev splits where same-sense target vectors have
/// cosine near 1 and different-sense ones near 0.
inline SyntheticWiC generate_synthetic_wic(const SyntheticWiCSpec& spec) {
    if (spec.n_items < 2 || spec.dim < 2) fail(ErrorKind::domain, "WiC fixture needs >= 2 items and dim >= 2");
    return {detail::synthetic_wic_split(spec, "train"), detail::synthetic_wic_split(spec, "dev")};
}

/// Copy of `ds` with gold labels permuted.
inline WiCDataset shuffle_gold(const WiCDataset& ds, std::uint64_t seed) {
    std::vector<int> gold;
    for (const auto& item : ds.items) gold.push_back(item.gold ? 1 : 0);
    Rng rng(seed);
    rng.shuffle(gold);
    WiCDataset out = ds;
    for (std::size_t i = 0; i < out.items.size(); ++i) out.items[i].gold = gold[i] != 0;
    return out;
}

} // namespace semfeat
