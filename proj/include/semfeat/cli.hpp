#pragma once

// Command-line driver. run_command() is the whole program; tools/semfeat.cpp
// only forwards argv.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "corpus.hpp"
#include "embedstore.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "layerprofile.hpp"
#include "mlp.hpp"
#include "report.hpp"
#include "synthetic.hpp"
#include "util.hpp"
#include "wsd.hpp"

namespace semfeat {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConfigEnv = "SEMFEAT_CONFIG";

struct RunPaths {
    std::string norms, categories, corpus, targets, curated;
    std::string dump, grid, models;
    std::string pairs, pair_dump;
    std::string wic_train_data, wic_train_gold, wic_dev_data, wic_dev_gold;
    std::string wic_train_dump, wic_dev_dump;
    std::string compare_dump;
    std::filesystem::path output = "semfeat_out";
};

struct RunConfig {
    RunPaths paths;
    std::optional<std::uint64_t> seed;
    NetworkSpec spec;
    TrainHyper hyper;
    std::size_t k_folds = 20;
    std::vector<std::size_t> layers; // empty = every layer in the dump
    std::vector<std::string> features;
    std::optional<Pooling> pooling;  // expected dump pooling
    std::size_t cluster_k = 3;       // 0 = choose by knee of the inertia curve
    std::size_t cluster_k_max = 10;
    std::size_t restarts = 10;
    bool wic_binder = false;
    std::size_t sample_n = 250;
    std::size_t sample_max_tokens = 128;
    std::string compare_key_a, compare_key_b;
    Config raw;

    std::uint64_t require_seed() const {
        if (!seed) fail(ErrorKind::schema, "config key 'seed' is required");
        return *seed;
    }
};

inline RunConfig run_config_from(const Config& c) {
    RunConfig rc;
    rc.raw = c;
    auto path = [&](const char* key, std::string& dst) {
        if (auto v = c.get_string(std::string("paths.") + key)) dst = *v;
    };
    auto& p = rc.paths;
    path("norms", p.norms);
    path("categories", p.categories);
    path("corpus", p.corpus);
    path("targets", p.targets);
    path("curated", p.curated);
    path("dump", p.dump);
    path("grid", p.grid);
    path("models", p.models);
    path("pairs", p.pairs);
    path("pair_dump", p.pair_dump);
    path("wic_train_data", p.wic_train_data);
    path("wic_train_gold", p.wic_train_gold);
    path("wic_dev_data", p.wic_dev_data);
    path("wic_dev_gold", p.wic_dev_gold);
    path("wic_train_dump", p.wic_train_dump);
    path("wic_dev_dump", p.wic_dev_dump);
    path("compare_dump", p.compare_dump);
    if (auto v = c.get_string("paths.output")) p.output = *v;

    rc.seed = c.get_int<std::uint64_t>("seed");
    if (auto h = c.get_index_list("train.hidden")) {
        if (h->size() != 3) fail(ErrorKind::schema, "train.hidden must list exactly 3 widths");
        rc.spec.hidden_dims = {(*h)[0], (*h)[1], (*h)[2]};
    }
    if (auto v = c.get_double("train.learning_rate")) rc.hyper.learning_rate = *v;
    if (auto v = c.get_int<std::size_t>("train.epochs")) rc.hyper.epochs = *v;
    if (auto v = c.get_int<std::size_t>("train.batch_size")) rc.hyper.batch_size = *v;
    if (auto v = c.get_int<std::size_t>("train.k_folds")) rc.k_folds = *v;
    if (auto v = c.get_index_list("analysis.layers")) rc.layers = *v;
    if (auto v = c.get_list("analysis.features")) rc.features = *v;
    if (auto v = c.get_string("analysis.pooling")) rc.pooling = parse_pooling(*v);
    if (auto v = c.get_int<std::size_t>("analysis.cluster_k")) rc.cluster_k = *v;
    if (auto v = c.get_int<std::size_t>("analysis.cluster_k_max")) rc.cluster_k_max = *v;
    if (auto v = c.get_int<std::size_t>("analysis.restarts")) rc.restarts = *v;
    if (auto v = c.get_bool("analysis.wic_binder")) rc.wic_binder = *v;
    if (auto v = c.get_int<std::size_t>("sample.n")) rc.sample_n = *v;
    if (auto v = c.get_int<std::size_t>("sample.max_tokens")) rc.sample_max_tokens = *v;
    rc.compare_key_a = c.string_or("compare.key_a", "");
    rc.compare_key_b = c.string_or("compare.key_b", "");
    for (const auto& h : rc.spec.hidden_dims)
        if (h < 1) fail(ErrorKind::schema, "train.hidden widths must be >= 1");
    rc.hyper.validate();
    if (rc.k_folds < 2) fail(ErrorKind::schema, "train.k_folds must be >= 2");
    return rc;
}

/// Occurrence key written as word:sentence_id:occurrence_index[:role].
inline OccurrenceKey parse_key_spec(std::string_view s) {
    const auto parts = split(s, ':');
    if (parts.size() < 3 || parts.size() > 4)
        fail(ErrorKind::schema, "key '" + std::string(s) + "' must be word:sentence_id:occurrence[:role]");
    OccurrenceKey k;
    k.word = std::string(parts[0]);
    if (!parse_int(parts[1], k.sentence_id) || !parse_int(parts[2], k.occurrence_index))
        fail(ErrorKind::schema, "key '" + std::string(s) + "' has non-integer ids");
    if (parts.size() == 4) k.role = std::string(parts[3]);
    return k;
}

namespace detail {

struct CommandContext {
    std::string command;
    RunConfig cfg;
    std::size_t jobs = 1;
    std::ostream* log = &std::cerr;
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<std::string> outputs;

    std::filesystem::path out(const std::string& name) {
        outputs.push_back(name);
        return cfg.paths.output / name;
    }
};

inline void require_paths(const std::vector<std::pair<std::string, std::string>>& needed) {
    std::string missing;
    for (const auto& [key, value] : needed) {
        if (value.empty())
            missing += "\n  paths." + key + " is not set";
        else if (!std::filesystem::exists(value))
            missing += "\n  paths." + key + " = '" + value + "' does not exist";
    }
    if (!missing.empty()) fail(ErrorKind::io, "missing inputs:" + missing);
}

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_run_manifest(const CommandContext& ctx) {
    const std::string canonical = ctx.cfg.raw.canonical();
    nlohmann::json settings = nlohmann::json::object();
    for (const auto& [k, v] : ctx.cfg.raw.values())
        settings[k] = v.is_list ? nlohmann::json(v.items) : nlohmann::json(v.items.front());
    nlohmann::json m = {{"command", ctx.command},
                        {"version", kVersion},
                        {"config_hash", hex64(fnv1a64(canonical))},
                        {"config", settings},
                        {"seeds", ctx.seeds},
                        {"jobs", ctx.jobs},
                        {"outputs", ctx.outputs},
                        {"timestamp", utc_timestamp()}};
    if (ctx.cfg.seed) m["seed"] = *ctx.cfg.seed;
    emit_json(m, ctx.cfg.paths.output / ("run_manifest_" + ctx.command + ".json"));
}

inline void check_pooling(const RunConfig& cfg, const EmbeddingDump& dump, const std::string& name) {
    if (cfg.pooling && *cfg.pooling != dump.manifest().pooling)
        fail(ErrorKind::compatibility, name + " has pooling '" + std::string(to_string(dump.manifest().pooling)) +
                                           "', config expects '" + std::string(to_string(*cfg.pooling)) + "'");
}

inline std::vector<std::size_t> layers_for(const RunConfig& cfg, const DumpManifest& m) {
    if (cfg.layers.empty()) {
        std::vector<std::size_t> all(m.n_layers);
        for (std::size_t l = 0; l < m.n_layers; ++l) all[l] = l;
        return all;
    }
    for (std::size_t l : cfg.layers)
        if (l >= m.n_layers)
            fail(ErrorKind::index, "layer " + std::to_string(l) + " outside dump with " + std::to_string(m.n_layers) + " layers");
    return cfg.layers;
}

inline GridOptions grid_options(const CommandContext& ctx) {
    GridOptions opt;
    opt.spec = ctx.cfg.spec;
    opt.hyper = ctx.cfg.hyper;
    opt.k = ctx.cfg.k_folds;
    opt.seed = ctx.cfg.require_seed();
    opt.jobs = ctx.jobs;
    opt.features = ctx.cfg.features;
    return opt;
}

inline FeatureCategoryMap categories_for(const RunConfig& cfg) {
    if (cfg.paths.categories.empty()) return default_feature_categories();
    return load_feature_categories(cfg.paths.categories);
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_sample(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    if (!p.curated.empty()) {
        require_paths({{"curated", p.curated}});
        const SentenceBank bank = load_curated_sentences(p.curated);
        write_file_atomic(ctx.out("sentence_bank.tsv"), format_sentence_bank(bank));
        return;
    }
    require_paths({{"corpus", p.corpus}});
    std::vector<std::string> targets;
    if (!p.targets.empty()) {
        require_paths({{"targets", p.targets}});
        for (const auto& line : read_lines(p.targets)) {
            const auto w = trim(line);
            if (!w.empty()) targets.push_back(to_lower(w));
        }
    } else {
        require_paths({{"norms", p.norms}});
        targets = load_binder_norms(p.norms).words;
    }
    const std::uint64_t seed = ctx.cfg.require_seed();
    const SentenceBank bank = sample_sentences(p.corpus, targets, ctx.cfg.sample_n, ctx.cfg.sample_max_tokens, seed);
    const auto& prov = bank.provenance;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [w, c] : prov.match_counts) counts[w] = c;
    const nlohmann::json pj = {{"kind", std::string(to_string(prov.kind))},
                               {"requested_n", prov.requested_n},
                               {"max_tokens", prov.max_tokens},
                               {"seed", prov.seed},
                               {"match_counts", counts},
                               {"short_words", prov.short_words},
                               {"warnings", prov.warnings}};
    ctx.seeds["sample"] = seed;
    write_file_atomic(ctx.out("sentence_bank.tsv"), format_sentence_bank(bank));
    emit_json(pj, ctx.out("sentence_bank_provenance.json"));
    for (const auto& w : prov.warnings) *ctx.log << "warning: " << w << "\n";
}

inline void cmd_validate_dump(CommandContext& ctx, const std::vector<std::string>& files) {
    std::vector<std::string> targets = files;
    if (targets.empty() && !ctx.cfg.paths.dump.empty()) targets.push_back(ctx.cfg.paths.dump);
    if (targets.empty()) fail(ErrorKind::usage, "validate-dump needs a dump path");
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& f : targets) {
        try {
            const EmbeddingDump dump = read_dump(f);
            std::set<std::string> words;
            for (const auto& r : dump.records()) words.insert(r.key.word);
            summary.push_back({{"path", f},
                               {"manifest", detail::manifest_provenance(dump.manifest())},
                               {"distinct_words", words.size()}});
        } catch (const Error& e) {
            std::string_view msg = e.what();
            const std::string prefix = std::string(to_string(e.kind())) + " error: ";
            if (msg.starts_with(prefix)) msg.remove_prefix(prefix.size());
            throw Error(e.kind(), f + ": " + std::string(msg));
        }
    }
    emit_json(summary, ctx.out("dump_summary.json"));
}

inline void emit_grid_outputs(CommandContext& ctx, const ScoreGrid& grid, const std::string& stem,
                              const std::string& title) {
    emit_grid_csv(grid, ctx.out(stem + ".csv"));
    emit_grid_json(grid, ctx.out(stem + ".json"));
    emit_svg(grid_layer_plot(grid, title), ctx.out(stem + "_layers.svg"));
    emit_svg(grid_mean_plot(grid, title), ctx.out(stem + "_mean.svg"));
}

inline nlohmann::json best_summary_json(const ScoreGrid& grid) {
    const CombinedBest cb = combined_best(grid);
    const SingleLayerBest sb = best_single_layer(grid);
    nlohmann::json per_feature = nlohmann::json::object();
    for (std::size_t f = 0; f < grid.feature_count(); ++f)
        per_feature[grid.feature_names[f]] = {{"layer", cb.best_layers.layers[f]}, {"r2", cb.best_r2[f]}};
    nlohmann::json j = {{"combined_best_mean", cb.mean},
                        {"best_single_layer", sb.layer},
                        {"best_single_layer_mean", sb.mean},
                        {"per_feature", per_feature}};
    // Per-feature best-layer scores against the single best layer.
    const std::size_t col = grid.column_of(sb.layer);
    std::vector<double> single(grid.feature_count());
    for (std::size_t f = 0; f < grid.feature_count(); ++f) single[f] = grid.mean_r2(f, col);
    const WilcoxonResult w = wilcoxon_signed_rank(cb.best_r2, single);
    j["wilcoxon_combined_vs_single"] = {{"statistic", w.statistic},
                                        {"n_effective", w.n_effective},
                                        {"p_two_sided", w.p_two_sided},
                                        {"method", std::string(to_string(w.method))}};
    return j;
}

inline void cmd_grid(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    require_paths({{"dump", p.dump}, {"norms", p.norms}});
    const EmbeddingDump dump = read_dump(p.dump);
    check_pooling(ctx.cfg, dump, p.dump);
    const SemanticNorms norms = load_binder_norms(p.norms);
    const GridOptions opt = grid_options(ctx);
    const auto layers = layers_for(ctx.cfg, dump.manifest());
    *ctx.log << "grid: " << (opt.features.empty() ? norms.feature_count() : opt.features.size()) << " features x "
             << layers.size() << " layers x " << opt.k << " folds\n";
    const ScoreGrid grid = run_grid(dump, norms, layers, opt);
    ctx.seeds["grid"] = opt.seed;
    ctx.seeds["folds"] = fold_seed(opt.seed);
    emit_grid_outputs(ctx, grid, "grid", "Mean R^2 per layer");
    emit_json(best_summary_json(grid), ctx.out("best_layers.json"));
}

inline ScoreGrid load_grid_json(const std::string& path) {
    try {
        return grid_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, path + ": " + e.what());
    }
}

inline std::string grid_input(const CommandContext& ctx) {
    if (!ctx.cfg.paths.grid.empty()) return ctx.cfg.paths.grid;
    return (ctx.cfg.paths.output / "grid.json").string();
}

inline void cmd_cluster(CommandContext& ctx) {
    const std::string grid_path = grid_input(ctx);
    require_paths({{"grid", grid_path}});
    const ScoreGrid grid = load_grid_json(grid_path);
    const ProfileMatrix profiles = rescale_profiles(grid);
    const std::uint64_t seed = derive_seed(ctx.cfg.require_seed(), {tag_of("cluster")});
    ctx.seeds["cluster"] = seed;

    std::size_t usable = 0;
    for (bool d : profiles.degenerate) usable += d ? 0 : 1;
    const Matrix X = [&] {
        std::vector<std::size_t> rows;
        for (std::size_t f = 0; f < profiles.degenerate.size(); ++f)
            if (!profiles.degenerate[f]) rows.push_back(f);
        return profiles.rescaled.select_rows(rows);
    }();
    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k <= std::min(ctx.cfg.cluster_k_max, usable); ++k) ks.push_back(k);
    const auto curve = inertia_curve(X, ks, seed, ctx.cfg.restarts, ctx.jobs);
    write_file_atomic(ctx.out("inertia.csv"), format_inertia_csv(curve));

    std::size_t k = ctx.cfg.cluster_k;
    nlohmann::json choice = {{"configured_k", k}};
    if (k == 0) {
        k = knee_point(curve);
        choice["knee_k"] = k;
    }
    const ProfileClusters pc = cluster_profiles(profiles, k, seed, ctx.cfg.restarts, ctx.jobs);
    std::optional<double> ari;
    const FeatureCategoryMap cats = categories_for(ctx.cfg);
    bool all_known = true;
    for (const auto& f : pc.features) all_known = all_known && cats.contains(f);
    if (all_known && pc.features.size() >= 2) ari = ari_vs_categories(pc, cats);
    nlohmann::json report = cluster_report_json(pc, profiles.layer_indices, ari);
    report["k_selection"] = choice;
    emit_json(report, ctx.out("cluster.json"));
    write_file_atomic(ctx.out("cluster_profiles.csv"), format_profile_csv(pc, profiles));
    emit_svg(cluster_mean_plot(cluster_summary(pc, grid, profiles), profiles.layer_indices),
             ctx.out("cluster_profiles.svg"));
}

inline void cmd_pairs(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    require_paths({{"pairs", p.pairs}, {"pair_dump", p.pair_dump}});
    const PairNorms pairs = load_property_pairs(p.pairs);
    const EmbeddingDump dump = read_dump(p.pair_dump);
    check_pooling(ctx.cfg, dump, p.pair_dump);
    GridOptions opt = grid_options(ctx);
    opt.features.clear();
    const auto layers = layers_for(ctx.cfg, dump.manifest());
    ctx.seeds["pairs"] = opt.seed;
    ctx.seeds["folds"] = fold_seed(opt.seed);
    nlohmann::json summary = nlohmann::json::object();
    std::vector<double> best_by_mode[2];
    for (PairMode mode : {PairMode::contextual, PairMode::mean_of_pairs}) {
        const PairResult r = run_pair_experiment(dump, pairs, mode, layers, opt);
        const std::string stem = "pairs_" + std::string(to_string(mode));
        emit_grid_outputs(ctx, r.grid, stem, "Pair features, " + std::string(to_string(mode)));
        summary[std::string(to_string(mode))] = best_summary_json(r.grid);
        best_by_mode[mode == PairMode::contextual ? 0 : 1] = r.best.best_r2;
    }
    const WilcoxonResult w = wilcoxon_signed_rank(best_by_mode[0], best_by_mode[1]);
    summary["wilcoxon_contextual_vs_mean_of_pairs"] = {{"statistic", w.statistic},
                                                       {"n_effective", w.n_effective},
                                                       {"p_two_sided", w.p_two_sided},
                                                       {"method", std::string(to_string(w.method))}};
    emit_json(summary, ctx.out("pairs_summary.json"));
}

/// Predictor from saved models, or trained on the full word set at each
/// feature's best grid layer.
inline BinderPredictor obtain_predictor(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    if (!p.models.empty()) {
        require_paths({{"models", p.models}});
        BinderPredictor pred;
        for (const auto& name : binder_feature_names()) {
            const auto file = std::filesystem::path(p.models) / (name + ".smlp");
            if (!std::filesystem::exists(file)) fail(ErrorKind::io, "model file '" + file.string() + "' missing");
            pred.models.push_back(read_model(file));
            pred.best_layers.feature_names.push_back(name);
            pred.best_layers.layers.push_back(pred.models.back().layer);
        }
        return pred;
    }
    const std::string grid_path = grid_input(ctx);
    require_paths({{"dump", p.dump}, {"norms", p.norms}, {"grid", grid_path}});
    const ScoreGrid grid = load_grid_json(grid_path);
    if (grid.feature_names != binder_feature_names())
        fail(ErrorKind::schema, "grid '" + grid_path + "' must cover all 65 features in canonical order");
    const EmbeddingDump dump = read_dump(p.dump);
    const SemanticNorms norms = load_binder_norms(p.norms);
    const GridOptions opt = grid_options(ctx);
    ctx.seeds["final_models"] = opt.seed;
    BinderPredictor pred = train_binder_predictor(dump, norms, combined_best(grid).best_layers, opt);
    for (const auto& m : pred.models) write_model(m, ctx.out("models/" + m.feature + ".smlp"));
    return pred;
}

inline void cmd_wic(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    require_paths({{"wic_train_data", p.wic_train_data},
                   {"wic_train_gold", p.wic_train_gold},
                   {"wic_dev_data", p.wic_dev_data},
                   {"wic_dev_gold", p.wic_dev_gold},
                   {"wic_train_dump", p.wic_train_dump},
                   {"wic_dev_dump", p.wic_dev_dump}});
    const WiCDataset train = load_wic(p.wic_train_data, p.wic_train_gold, "train");
    const WiCDataset dev = load_wic(p.wic_dev_data, p.wic_dev_gold, "dev");
    for (const auto* ds : {&train, &dev}) {
        const auto bad = wic_target_mismatches(*ds);
        if (!bad.empty())
            *ctx.log << "warning: " << bad.size() << " " << ds->split << " item(s) whose indexed token is not the target\n";
    }
    const EmbeddingDump train_dump = read_dump(p.wic_train_dump);
    const EmbeddingDump dev_dump = read_dump(p.wic_dev_dump);
    check_pooling(ctx.cfg, train_dump, p.wic_train_dump);
    check_pooling(ctx.cfg, dev_dump, p.wic_dev_dump);

    std::vector<WiCReport> reports;
    for (std::size_t l : layers_for(ctx.cfg, train_dump.manifest()))
        reports.push_back(run_wic(train_dump, dev_dump, train, dev, RawLayer{l}, ctx.jobs));
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].metrics.accuracy > reports[best].metrics.accuracy) best = i;
    nlohmann::json out = {{"raw_best", wic_report_json(reports[best])}};
    if (ctx.cfg.wic_binder) {
        const BinderPredictor pred = obtain_predictor(ctx);
        const WiCReport r = run_wic(train_dump, dev_dump, train, dev, BinderKind{&pred}, ctx.jobs);
        reports.push_back(r);
        out["binder"] = wic_report_json(r);
    }
    write_file_atomic(ctx.out("wic_sweep.csv"), format_sweep_csv(reports));
    emit_json(out, ctx.out("wic.json"));
}

inline void cmd_compare(CommandContext& ctx) {
    const auto& p = ctx.cfg.paths;
    if (ctx.cfg.compare_key_a.empty() || ctx.cfg.compare_key_b.empty())
        fail(ErrorKind::schema, "compare needs compare.key_a and compare.key_b");
    const std::string dump_path = p.compare_dump.empty() ? p.dump : p.compare_dump;
    require_paths({{"compare_dump", dump_path}});
    const EmbeddingDump dump = read_dump(dump_path);
    const BinderPredictor pred = obtain_predictor(ctx);
    const OccurrenceKey ka = parse_key_spec(ctx.cfg.compare_key_a);
    const OccurrenceKey kb = parse_key_spec(ctx.cfg.compare_key_b);
    const auto rows = compare_contexts(dump.at(ka), dump.at(kb), pred, dump.manifest(), dump.manifest());
    write_file_atomic(ctx.out("context_compare.csv"), format_context_csv(rows));
    emit_svg(context_plot(rows, describe(ka), describe(kb)), ctx.out("context_compare.svg"));
}

inline void cmd_report(CommandContext& ctx) {
    const std::string grid_path = grid_input(ctx);
    require_paths({{"grid", grid_path}});
    const ScoreGrid grid = load_grid_json(grid_path);
    emit_grid_csv(grid, ctx.out("report_grid.csv"));
    emit_svg(grid_layer_plot(grid, "Mean R^2 per layer"), ctx.out("report_grid_layers.svg"));
    emit_svg(grid_mean_plot(grid, "Mean R^2 per layer"), ctx.out("report_grid_mean.svg"));
    emit_json(best_summary_json(grid), ctx.out("report_best_layers.json"));
}

/// Planted-signal fixture files for trying the pipeline without an extractor.
inline void cmd_synth(CommandContext& ctx) {
    const Config& c = ctx.cfg.raw;
    const std::uint64_t seed = ctx.cfg.require_seed();
    SyntheticSpec spec;
    spec.seed = derive_seed(seed, {tag_of("synth")});
    if (auto v = c.get_int<std::size_t>("synth.n_words")) spec.n_words = *v;
    if (auto v = c.get_int<std::size_t>("synth.dim")) spec.dim = *v;
    if (auto v = c.get_int<std::size_t>("synth.n_layers")) spec.n_layers = *v;
    if (auto v = c.get_int<std::size_t>("synth.latent_rank")) spec.latent_rank = *v;
    const std::size_t layer = c.get_int<std::size_t>("synth.signal_layer").value_or(std::min<std::size_t>(2, spec.n_layers - 1));
    const double r2 = c.get_double("synth.r2").value_or(0.7);
    for (const auto& f : c.get_list("synth.features").value_or(std::vector<std::string>{"Vision"}))
        spec.planted.push_back({f, layer, r2});
    ctx.seeds["synth"] = spec.seed;
    const SyntheticData data = generate_synthetic_dump(spec);
    write_dump(data.dump, ctx.out("synthetic_dump.semb"));
    write_binder_norms(data.norms, ctx.out("synthetic_norms.csv"));
    nlohmann::json truth = nlohmann::json::array();
    for (const auto& t : data.truth)
        truth.push_back({{"feature", t.feature},
                         {"layer", t.layer},
                         {"intercept", t.intercept},
                         {"sigma", t.sigma},
                         {"theoretical_r2", t.theoretical_r2},
                         {"weights", t.weights}});
    emit_json(truth, ctx.out("synthetic_truth.json"));
}

} // namespace detail

inline std::string usage_text() {
    return "usage: semfeat <command> [--config FILE] [--set key=value]... [--jobs N] [--out DIR]\n"
           "commands: sample | validate-dump | grid | cluster | pairs | wic | compare | report | synth\n"
           "config defaults to $" +
           std::string(kConfigEnv) + " when --config is absent\n";
}

/// Run one subcommand. Returns 0 on success, 1 on validation or data
/// errors, 2 on usage errors.
inline int run_command(const std::vector<std::string>& argv, std::ostream& err = std::cerr) {
    CLI::App app{"semantic feature probing pipeline", "semfeat"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    std::vector<std::string> sets;
    std::size_t jobs = 0;
    std::string out_dir;
    std::vector<std::string> files;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"sample", "sample or load sentence banks"},
        {"validate-dump", "check SEMB dump files"},
        {"grid", "cross-validated feature x layer R^2 grid"},
        {"cluster", "cluster rescaled layer profiles"},
        {"pairs", "property/object pair experiment"},
        {"wic", "word-in-context evaluation"},
        {"compare", "per-feature comparison of two contexts"},
        {"report", "re-render tables and plots from a grid"},
        {"synth", "write a planted-signal fixture"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "config file");
        sub->add_option("--set", sets, "override a config value, key=value");
        sub->add_option("--jobs", jobs, "worker threads (default: available parallelism)");
        sub->add_option("--out", out_dir, "output directory");
        if (name == "validate-dump") sub->add_option("files", files, "dump files");
    }

    if (!argv.empty() && !argv.front().starts_with("-") &&
        std::none_of(commands.begin(), commands.end(), [&](const auto& c) { return c.first == argv.front(); })) {
        err << "error: unknown subcommand '" << argv.front() << "'\n" << usage_text();
        return 2;
    }
    try {
        std::vector<std::string> args(argv.rbegin(), argv.rend());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << usage_text();
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        detail::CommandContext ctx;
        ctx.command = command;
        ctx.log = &err;
        ctx.jobs = jobs == 0 ? default_jobs() : jobs;
        if (config_path.empty())
            if (const char* env = std::getenv(kConfigEnv)) config_path = env;
        Config config;
        if (!config_path.empty()) {
            if (!std::filesystem::exists(config_path)) fail(ErrorKind::usage, "config file '" + config_path + "' not found");
            config = Config::load(config_path);
        } else if (command != "validate-dump") {
            fail(ErrorKind::usage, "no config: pass --config or set " + std::string(kConfigEnv));
        }
        for (const auto& s : sets) config.set(s);
        ctx.cfg = run_config_from(config);
        if (!out_dir.empty()) ctx.cfg.paths.output = out_dir;

        if (command == "sample") detail::cmd_sample(ctx);
        else if (command == "validate-dump") detail::cmd_validate_dump(ctx, files);
        else if (command == "grid") detail::cmd_grid(ctx);
        else if (command == "cluster") detail::cmd_cluster(ctx);
        else if (command == "pairs") detail::cmd_pairs(ctx);
        else if (command == "wic") detail::cmd_wic(ctx);
        else if (command == "compare") detail::cmd_compare(ctx);
        else if (command == "report") detail::cmd_report(ctx);
        else detail::cmd_synth(ctx);

        detail::write_run_manifest(ctx);
        return 0;
    } catch (const Error& e) {
        err << e.what() << "\n";
        if (e.kind() == ErrorKind::usage) {
            err << usage_text();
            return 2;
        }
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace semfeat
