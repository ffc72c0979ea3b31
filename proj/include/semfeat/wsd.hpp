#pragma once

// Word-in-Context evaluation: cosine similarity between the two target-word
// embeddings of each item (raw layer vectors or derived 65-feature vectors),
// a one-input logistic regression fitted on the training split, and
// accuracy / F1 on the dev split. Also per-feature comparisons of one word
// in two contexts.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "corpus.hpp"
#include "embedstore.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "mlp.hpp"
#include "util.hpp"

namespace semfeat {

inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) fail(ErrorKind::shape, "cosine of vectors with different dimensions");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) fail(ErrorKind::degenerate, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Derived feature embeddings

/// One trained regressor per feature, each reading its own best layer.
struct BinderPredictor {
    std::vector<TrainedModel> models; // feature order
    BestLayerMap best_layers;

    std::size_t size() const { return models.size(); }

    /// Models must come from a dump with the same model id and pooling.
    void check_compatible(const DumpManifest& m) const {
        for (const auto& model : models) {
            if (model.model_id != m.model_id || model.pooling != to_string(m.pooling))
                fail(ErrorKind::compatibility, "model for '" + model.feature + "' was trained on " + model.model_id +
                                                   "/" + model.pooling + ", dump is " + m.model_id + "/" +
                                                   std::string(to_string(m.pooling)));
        }
    }
};

struct BinderEmbedding {
    OccurrenceKey key;
    std::vector<std::string> feature_names;
    std::vector<double> values;
    std::vector<std::size_t> source_layers;
};

/// Predict every feature from the record's vector at that feature's best
/// layer. Predictions are left unclipped.
inline BinderEmbedding derive_binder_embedding(const EmbeddingRecord& record, const BinderPredictor& predictor) {
    if (predictor.models.size() != predictor.best_layers.layers.size())
        fail(ErrorKind::shape, "predictor has mismatched model and layer counts");
    BinderEmbedding out;
    out.key = record.key;
    for (std::size_t f = 0; f < predictor.models.size(); ++f) {
        const auto& model = predictor.models[f];
        const std::size_t layer = predictor.best_layers.layers[f];
        if (model.layer != layer)
            fail(ErrorKind::compatibility, "model for '" + model.feature + "' reads layer " +
                                               std::to_string(model.layer) + " but best layer is " +
                                               std::to_string(layer));
        if (layer >= record.n_layers)
            fail(ErrorKind::index, "record " + describe(record.key) + " has no layer " + std::to_string(layer));
        out.feature_names.push_back(model.feature);
        out.values.push_back(predict_one(model, record.layer_as_double(layer)));
        out.source_layers.push_back(layer);
    }
    return out;
}

inline BinderEmbedding derive_binder_embedding(const EmbeddingRecord& record, const BinderPredictor& predictor,
                                               const DumpManifest& manifest) {
    predictor.check_compatible(manifest);
    return derive_binder_embedding(record, predictor);
}

/// Final per-feature models: each retrained on every norms word at that
/// feature's best layer.
inline BinderPredictor train_binder_predictor(const EmbeddingDump& dump, const SemanticNorms& norms,
                                              const BestLayerMap& best_layers, const GridOptions& opt) {
    BinderPredictor out;
    out.best_layers = best_layers;
    out.models.resize(best_layers.feature_names.size());
    std::map<std::size_t, Matrix> designs;
    for (std::size_t layer : best_layers.layers)
        if (!designs.contains(layer)) designs.emplace(layer, design_matrix(dump, norms.words, layer));

    parallel_for(out.models.size(), opt.jobs, [&](std::size_t f) {
        const std::string& feature = best_layers.feature_names[f];
        const std::size_t layer = best_layers.layers[f];
        TrainHyper hyper = opt.hyper;
        hyper.seed = derive_seed(opt.seed, {tag_of("final"), tag_of(feature), layer});
        TrainedModel m = train(designs.at(layer), norms.feature_column(norms.feature_index(feature)), opt.spec, hyper);
        m.feature = feature;
        m.layer = layer;
        m.model_id = dump.manifest().model_id;
        m.pooling = std::string(to_string(dump.manifest().pooling));
        out.models[f] = std::move(m);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Logistic regression on one input

struct LogisticModel {
    double weight = 0.0;
    double bias = 0.0;
    std::vector<double> loss_history; // initial loss, then the loss after each applied step

    double probability(double x) const { return 1.0 / (1.0 + std::exp(-(weight * x + bias))); }
};

inline double log_loss(std::span<const double> x, const std::vector<bool>& labels, double w, double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = w * x[i] + b;
        // log(1 + e^z) - y z, computed stably
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        s += softplus - (labels[i] ? z : 0.0);
    }
    return s / static_cast<double>(x.size());
}

/// Analytic gradient of the mean log-loss with respect to (w, b).
inline std::pair<double, double> log_loss_gradient(std::span<const double> x, const std::vector<bool>& labels,
                                                   double w, double b) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(w * x[i] + b)));
        const double r = p - (labels[i] ? 1.0 : 0.0);
        gw += r * x[i];
        gb += r;
    }
    const double n = static_cast<double>(x.size());
    return {gw / n, gb / n};
}

/// Relative loss change below which logistic_fit treats a step as converged.
inline constexpr double kLogisticTolerance = 1e-12;

/// Full-batch gradient descent from (0, 0). Stops early once a step changes
/// the loss by less than kLogisticTolerance (relative).
inline LogisticModel logistic_fit(std::span<const double> x, const std::vector<bool>& labels, std::size_t epochs = 5000,
                                  double lr = 0.1) {
    if (x.size() != labels.size()) fail(ErrorKind::shape, "inputs and labels differ in length");
    if (x.empty()) fail(ErrorKind::degenerate, "no training data");
    const auto positives = std::count(labels.begin(), labels.end(), true);
    if (positives == 0 || static_cast<std::size_t>(positives) == labels.size())
        fail(ErrorKind::degenerate, "logistic regression needs both classes");
    LogisticModel m;
    double loss = log_loss(x, labels, m.weight, m.bias);
    m.loss_history.push_back(loss);
    for (std::size_t e = 0; e < epochs; ++e) {
        const auto [gw, gb] = log_loss_gradient(x, labels, m.weight, m.bias);
        const double w = m.weight - lr * gw;
        const double b = m.bias - lr * gb;
        const double next = log_loss(x, labels, w, b);
        if (std::abs(loss - next) <= kLogisticTolerance * loss) break;
        m.weight = w;
        m.bias = b;
        m.loss_history.push_back(next);
        loss = next;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Metrics

struct WiCMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Positive class = same sense; predicted positive when prob >= 0.5.
inline WiCMetrics classify_metrics(std::span<const double> probs, const std::vector<bool>& gold) {
    if (probs.size() != gold.size()) fail(ErrorKind::shape, "probabilities and gold labels differ in length");
    if (probs.empty()) fail(ErrorKind::domain, "no predictions");
    WiCMetrics m;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= 0.5;
        if (pred && gold[i]) ++m.tp;
        else if (pred && !gold[i]) ++m.fp;
        else if (!pred && gold[i]) ++m.fn;
        else ++m.tn;
    }
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(probs.size());
    const std::size_t denom = 2 * m.tp + m.fp + m.fn;
    m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(m.tp) / static_cast<double>(denom);
    return m;
}

// ---------------------------------------------------------------------------
// WiC runs

/// Dump key for the target word on one side of WiC item `index`.
inline OccurrenceKey wic_key(const WiCDataset& ds, std::size_t index, int side) {
    return {to_lower(ds.items[index].target), static_cast<std::int64_t>(index), 0,
            std::string(side == 1 ? "wic_s1" : "wic_s2")};
}

/// Items whose index-addressed token differs from the target, compared
/// case-insensitively after stripping surrounding punctuation. Reported for
/// the caller; nothing is re-aligned here.
inline std::vector<std::size_t> wic_target_mismatches(const WiCDataset& ds) {
    auto strip = [](std::string_view t) {
        while (!t.empty() && !detail::is_word_byte(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
        while (!t.empty() && !detail::is_word_byte(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
        return to_lower(t);
    };
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const auto& item = ds.items[i];
        const auto t1 = split_whitespace(item.sentence1);
        const auto t2 = split_whitespace(item.sentence2);
        const std::string target = to_lower(item.target);
        if (strip(t1[item.index1]) != target || strip(t2[item.index2]) != target) out.push_back(i);
    }
    return out;
}

struct RawLayer {
    std::size_t layer = 0;
};

struct BinderKind {
    const BinderPredictor* predictor = nullptr;
};

using EmbeddingKind = std::variant<RawLayer, BinderKind>;

inline std::string kind_name(const EmbeddingKind& kind) {
    if (const auto* raw = std::get_if<RawLayer>(&kind)) return "raw_layer(" + std::to_string(raw->layer) + ")";
    return "binder";
}

struct SimilarityRecord {
    std::size_t item = 0;
    double cosine = 0.0;
    bool gold = false;
};

/// Cosine between the two target embeddings of every item.
inline std::vector<SimilarityRecord> score_items(const EmbeddingDump& dump, const WiCDataset& ds,
                                                 const EmbeddingKind& kind, std::size_t jobs = 1) {
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < ds.items.size(); ++i)
        if (dump.find(wic_key(ds, i, 1)) == nullptr || dump.find(wic_key(ds, i, 2)) == nullptr)
            missing.push_back(std::to_string(i));
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " " + ds.split + " item(s) missing from dump:";
        for (const auto& id : missing) msg += " " + id;
        fail(ErrorKind::lookup, msg);
    }
    if (const auto* b = std::get_if<BinderKind>(&kind)) b->predictor->check_compatible(dump.manifest());

    std::vector<SimilarityRecord> out(ds.items.size());
    parallel_for(ds.items.size(), jobs, [&](std::size_t i) {
        const auto& r1 = dump.at(wic_key(ds, i, 1));
        const auto& r2 = dump.at(wic_key(ds, i, 2));
        double c = 0.0;
        if (const auto* raw = std::get_if<RawLayer>(&kind)) {
            c = cosine(r1.layer_as_double(raw->layer), r2.layer_as_double(raw->layer));
        } else {
            const auto& predictor = *std::get<BinderKind>(kind).predictor;
            c = cosine(derive_binder_embedding(r1, predictor).values, derive_binder_embedding(r2, predictor).values);
        }
        out[i] = {i, c, ds.items[i].gold};
    });
    return out;
}

struct WiCReport {
    std::string kind;
    std::optional<std::size_t> layer;
    WiCMetrics metrics;
    LogisticModel logistic;
    std::size_t n_train = 0;
    std::size_t n_dev = 0;
};

inline WiCReport run_wic(const EmbeddingDump& train_dump, const EmbeddingDump& dev_dump, const WiCDataset& wic_train,
                         const WiCDataset& wic_dev, const EmbeddingKind& kind, std::size_t jobs = 1) {
    const auto train_scores = score_items(train_dump, wic_train, kind, jobs);
    const auto dev_scores = score_items(dev_dump, wic_dev, kind, jobs);

    std::vector<double> x;
    std::vector<bool> labels;
    for (const auto& s : train_scores) {
        x.push_back(s.cosine);
        labels.push_back(s.gold);
    }
    WiCReport report;
    report.kind = kind_name(kind);
    if (const auto* raw = std::get_if<RawLayer>(&kind)) report.layer = raw->layer;
    report.logistic = logistic_fit(x, labels);

    std::vector<double> probs;
    std::vector<bool> gold;
    for (const auto& s : dev_scores) {
        probs.push_back(report.logistic.probability(s.cosine));
        gold.push_back(s.gold);
    }
    report.metrics = classify_metrics(probs, gold);
    report.n_train = train_scores.size();
    report.n_dev = dev_scores.size();
    return report;
}

/// Raw-embedding WiC results for every layer of the dumps.
inline std::vector<WiCReport> raw_layer_sweep(const EmbeddingDump& train_dump, const EmbeddingDump& dev_dump,
                                              const WiCDataset& wic_train, const WiCDataset& wic_dev,
                                              std::size_t jobs = 1) {
    std::vector<WiCReport> out;
    for (std::size_t l = 0; l < train_dump.manifest().n_layers; ++l)
        out.push_back(run_wic(train_dump, dev_dump, wic_train, wic_dev, RawLayer{l}, jobs));
    return out;
}

inline nlohmann::json wic_report_json(const WiCReport& r) {
    nlohmann::json j = {{"kind", r.kind},
                        {"accuracy", r.metrics.accuracy},
                        {"f1", r.metrics.f1},
                        {"weight", r.logistic.weight},
                        {"bias", r.logistic.bias},
                        {"n_train", r.n_train},
                        {"n_dev", r.n_dev}};
    if (r.layer) j["layer"] = *r.layer;
    return j;
}

// ---------------------------------------------------------------------------
// Context comparison

struct ContextRow {
    std::string feature;
    double value_a = 0.0;
    double value_b = 0.0;
    double delta = 0.0; // value_b - value_a
};

/// Per-feature values for one word in two contexts, largest |delta| first
/// (ties keep feature order).
inline std::vector<ContextRow> compare_contexts(const EmbeddingRecord& a, const EmbeddingRecord& b,
                                                const BinderPredictor& predictor) {
    const auto ea = derive_binder_embedding(a, predictor);
    const auto eb = derive_binder_embedding(b, predictor);
    std::vector<ContextRow> rows;
    for (std::size_t f = 0; f < ea.values.size(); ++f)
        rows.push_back({ea.feature_names[f], ea.values[f], eb.values[f], eb.values[f] - ea.values[f]});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ContextRow& x, const ContextRow& y) { return std::abs(x.delta) > std::abs(y.delta); });
    return rows;
}

inline std::vector<ContextRow> compare_contexts(const EmbeddingRecord& a, const EmbeddingRecord& b,
                                                const BinderPredictor& predictor, const DumpManifest& manifest_a,
                                                const DumpManifest& manifest_b) {
    predictor.check_compatible(manifest_a);
    predictor.check_compatible(manifest_b);
    return compare_contexts(a, b, predictor);
}

} // namespace semfeat
