#pragma once

// Layer-profile analysis: per-feature R^2 curves rescaled to [0, 1],
// k-means clustering of those curves, elbow selection of k, and agreement
// with a reference feature grouping via the Adjusted Rand Index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "util.hpp"

namespace semfeat {

struct ProfileMatrix {
    std::vector<std::string> feature_names;
    std::vector<std::size_t> layer_indices;
    Matrix rescaled;              // features x layers
    std::vector<bool> degenerate; // constant rows, left all zero
};

/// Min-max rescale each feature's row of mean R^2 across layers.
inline ProfileMatrix rescale_profiles(const ScoreGrid& grid) {
    if (grid.layer_count() < 2) fail(ErrorKind::domain, "rescaling needs at least 2 layers");
    ProfileMatrix p;
    p.feature_names = grid.feature_names;
    p.layer_indices = grid.layer_indices;
    p.rescaled = Matrix(grid.feature_count(), grid.layer_count());
    p.degenerate.assign(grid.feature_count(), false);
    for (std::size_t f = 0; f < grid.feature_count(); ++f) {
        const auto row = grid.mean_r2.row(f);
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        if (*hi == *lo) {
            p.degenerate[f] = true;
            continue;
        }
        const double range = *hi - *lo;
        for (std::size_t l = 0; l < row.size(); ++l) p.rescaled(f, l) = (row[l] - *lo) / range;
        // Pin the extremes exactly; (max - min) / range can round below 1.
        p.rescaled(f, static_cast<std::size_t>(lo - row.begin())) = 0.0;
        p.rescaled(f, static_cast<std::size_t>(hi - row.begin())) = 1.0;
    }
    return p;
}

// ---------------------------------------------------------------------------
// k-means

struct Clustering {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;
    Matrix centroids; // k x dims
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::size_t restarts = 0;
    std::size_t winning_restart = 0;
    std::size_t iterations = 0;
    std::vector<double> inertia_history; // winning run, one entry per Lloyd iteration
};

inline constexpr std::size_t kLloydMaxIterations = 300;

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline std::size_t nearest(std::span<const double> x, const Matrix& centroids) {
    std::size_t best = 0;
    double best_d = squared_distance(x, centroids.row(0));
    for (std::size_t c = 1; c < centroids.rows(); ++c) {
        const double d = squared_distance(x, centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

inline double inertia_of(const Matrix& X, const std::vector<std::size_t>& assign, const Matrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) s += squared_distance(X.row(i), centroids.row(assign[i]));
    return s;
}

inline Matrix kmeanspp_init(const Matrix& X, std::size_t k, Rng& rng) {
    Matrix centroids(k, X.cols());
    const std::size_t first = rng.below(X.rows());
    std::copy(X.row(first).begin(), X.row(first).end(), centroids.row(0).begin());
    std::vector<double> d2(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) d2[i] = squared_distance(X.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.below(X.rows());
        } else {
            double target = rng.uniform() * total;
            pick = X.rows() - 1;
            for (std::size_t i = 0; i < X.rows(); ++i) {
                target -= d2[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        std::copy(X.row(pick).begin(), X.row(pick).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < X.rows(); ++i) d2[i] = std::min(d2[i], squared_distance(X.row(i), centroids.row(c)));
    }
    return centroids;
}

inline void recompute_centroids(const Matrix& X, std::vector<std::size_t>& assign, Matrix& centroids) {
    const std::size_t k = centroids.rows();
    auto means = [&] {
        std::vector<std::size_t> counts(k, 0);
        Matrix sums(k, X.cols());
        for (std::size_t i = 0; i < X.rows(); ++i) {
            ++counts[assign[i]];
            for (std::size_t d = 0; d < X.cols(); ++d) sums(assign[i], d) += X(i, d);
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t d = 0; d < X.cols(); ++d) centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
        return counts;
    };
    auto counts = means();
    // Empty clusters seize the point farthest from its own centroid, taken
    // from a cluster that can spare one.
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        std::size_t far = X.rows();
        double far_d = -1.0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            if (counts[assign[i]] < 2) continue;
            const double d = squared_distance(X.row(i), centroids.row(assign[i]));
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == X.rows()) fail(ErrorKind::domain, "cannot repair empty cluster");
        --counts[assign[far]];
        assign[far] = c;
        counts = means();
    }
}

struct LloydRun {
    std::vector<std::size_t> assignment;
    Matrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> history;
};

inline LloydRun lloyd(const Matrix& X, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    LloydRun run;
    run.centroids = kmeanspp_init(X, k, rng);
    run.assignment.resize(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) run.assignment[i] = nearest(X.row(i), run.centroids);
    for (std::size_t it = 0; it < kLloydMaxIterations; ++it) {
        recompute_centroids(X, run.assignment, run.centroids);
        run.history.push_back(inertia_of(X, run.assignment, run.centroids));
        run.iterations = it + 1;
        std::vector<std::size_t> next(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) next[i] = nearest(X.row(i), run.centroids);
        if (next == run.assignment) break;
        run.assignment = std::move(next);
        if (it + 1 == kLloydMaxIterations) {
            recompute_centroids(X, run.assignment, run.centroids);
            run.history.push_back(inertia_of(X, run.assignment, run.centroids));
        }
    }
    run.inertia = inertia_of(X, run.assignment, run.centroids);
    return run;
}

} // namespace detail

/// k-means++ seeding and Lloyd iterations, best of `restarts` runs by
/// inertia (ties go to the earlier restart).
inline Clustering kmeans(const Matrix& X, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                         std::size_t jobs = 1) {
    if (k < 1) fail(ErrorKind::domain, "k must be at least 1");
    if (k > X.rows()) fail(ErrorKind::domain, "k = " + std::to_string(k) + " exceeds " + std::to_string(X.rows()) + " rows");
    if (restarts < 1) restarts = 1;
    std::vector<detail::LloydRun> runs(restarts);
    parallel_for(restarts, jobs, [&](std::size_t r) { runs[r] = detail::lloyd(X, k, derive_seed(seed, {r})); });

    std::size_t best = 0;
    for (std::size_t r = 1; r < restarts; ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;

    Clustering c;
    c.k = k;
    c.assignment = runs[best].assignment;
    c.centroids = runs[best].centroids;
    c.inertia = runs[best].inertia;
    c.seed = seed;
    c.restarts = restarts;
    c.winning_restart = best;
    c.iterations = runs[best].iterations;
    c.inertia_history = runs[best].history;
    return c;
}

struct CurvePoint {
    std::size_t k = 0;
    double inertia = 0.0;
};

inline std::vector<CurvePoint> inertia_curve(const Matrix& X, const std::vector<std::size_t>& ks, std::uint64_t seed,
                                             std::size_t restarts = 10, std::size_t jobs = 1) {
    std::vector<CurvePoint> out;
    for (std::size_t k : ks) {
        if (k > X.rows()) fail(ErrorKind::domain, "k = " + std::to_string(k) + " exceeds row count");
        out.push_back({k, kmeans(X, k, seed, restarts, jobs).inertia});
    }
    return out;
}

/// Elbow by largest discrete second difference; ties go to the smaller k.
inline std::size_t knee_point(const std::vector<CurvePoint>& curve) {
    if (curve.size() < 3) fail(ErrorKind::domain, "knee detection needs at least 3 points");
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].k != curve[i - 1].k + 1) fail(ErrorKind::domain, "curve k values must be consecutive");
    std::size_t best = 1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double v = curve[i - 1].inertia - 2.0 * curve[i].inertia + curve[i + 1].inertia;
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return curve[best].k;
}

// ---------------------------------------------------------------------------
// Adjusted Rand Index

template <typename Label>
double adjusted_rand_index(const std::vector<Label>& a, const std::vector<Label>& b) {
    if (a.size() != b.size()) fail(ErrorKind::shape, "label lists differ in length");
    if (a.size() < 2) fail(ErrorKind::domain, "ARI needs at least 2 items");
    std::map<Label, std::size_t> ids_a, ids_b;
    for (const auto& l : a) ids_a.emplace(l, ids_a.size());
    for (const auto& l : b) ids_b.emplace(l, ids_b.size());
    std::vector<double> table(ids_a.size() * ids_b.size(), 0.0);
    std::vector<double> rows(ids_a.size(), 0.0), cols(ids_b.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t r = ids_a[a[i]];
        const std::size_t c = ids_b[b[i]];
        table[r * ids_b.size() + c] += 1.0;
        rows[r] += 1.0;
        cols[c] += 1.0;
    }
    auto pairs = [](double n) { return n * (n - 1.0) / 2.0; };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (double n : table) index += pairs(n);
    for (double n : rows) sum_a += pairs(n);
    for (double n : cols) sum_b += pairs(n);
    const double expected = sum_a * sum_b / pairs(static_cast<double>(a.size()));
    const double max_index = (sum_a + sum_b) / 2.0;
    if (max_index == expected) {
        // Both partitions all-singletons or both one cluster.
        return ids_a.size() == ids_b.size() ? 1.0 : 0.0;
    }
    return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Clustering feature profiles

struct ProfileClusters {
    Clustering clustering;
    std::vector<std::string> features;      // clustered (non-degenerate) features, clustering row order
    std::vector<std::size_t> profile_rows;  // their rows in the ProfileMatrix
    std::vector<std::string> excluded;      // degenerate features
};

inline ProfileClusters cluster_profiles(const ProfileMatrix& profiles, std::size_t k, std::uint64_t seed,
                                        std::size_t restarts = 10, std::size_t jobs = 1) {
    ProfileClusters out;
    for (std::size_t f = 0; f < profiles.feature_names.size(); ++f) {
        if (profiles.degenerate[f]) {
            out.excluded.push_back(profiles.feature_names[f]);
        } else {
            out.features.push_back(profiles.feature_names[f]);
            out.profile_rows.push_back(f);
        }
    }
    const Matrix X = profiles.rescaled.select_rows(out.profile_rows);
    out.clustering = kmeans(X, k, seed, restarts, jobs);
    return out;
}

/// ARI between cluster memberships and the reference categories of the
/// clustered features.
inline double ari_vs_categories(const ProfileClusters& pc, const FeatureCategoryMap& categories) {
    std::vector<std::string> cluster_labels, category_labels;
    for (std::size_t i = 0; i < pc.features.size(); ++i) {
        auto it = categories.find(pc.features[i]);
        if (it == categories.end()) fail(ErrorKind::lookup, "feature '" + pc.features[i] + "' has no category");
        category_labels.push_back(it->second);
        cluster_labels.push_back(std::to_string(pc.clustering.assignment[i]));
    }
    return adjusted_rand_index(cluster_labels, category_labels);
}

struct ClusterSummary {
    std::size_t cluster = 0;
    std::vector<std::string> members;
    std::vector<double> mean_rescaled;
    std::vector<double> mean_raw;
};

inline std::vector<ClusterSummary> cluster_summary(const ProfileClusters& pc, const ScoreGrid& grid,
                                                   const ProfileMatrix& profiles) {
    const std::size_t layers = grid.layer_count();
    std::vector<ClusterSummary> out(pc.clustering.k);
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c].cluster = c;
        out[c].mean_rescaled.assign(layers, 0.0);
        out[c].mean_raw.assign(layers, 0.0);
    }
    for (std::size_t i = 0; i < pc.features.size(); ++i) {
        auto& s = out[pc.clustering.assignment[i]];
        s.members.push_back(pc.features[i]);
        const std::size_t prow = pc.profile_rows[i];
        const std::size_t grow = grid.row_of(pc.features[i]);
        for (std::size_t l = 0; l < layers; ++l) {
            s.mean_rescaled[l] += profiles.rescaled(prow, l);
            s.mean_raw[l] += grid.mean_r2(grow, l);
        }
    }
    for (auto& s : out) {
        if (s.members.empty()) continue;
        const double n = static_cast<double>(s.members.size());
        for (double& v : s.mean_rescaled) v /= n;
        for (double& v : s.mean_raw) v /= n;
    }
    return out;
}

} // namespace semfeat
