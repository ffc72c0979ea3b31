#pragma once

// CSV, JSON and SVG emitters for grids, cluster profiles, WiC results and
// context comparisons. All output is a deterministic function of the input.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "evalharness.hpp"
#include "layerprofile.hpp"
#include "util.hpp"
#include "wsd.hpp"

namespace semfeat {

inline void emit_json(const nlohmann::json& j, const std::filesystem::path& path) {
    write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Grid CSV

inline std::string format_grid_csv(const ScoreGrid& grid) {
    if (grid.layer_count() == 0) fail(ErrorKind::domain, "grid has no layers");
    std::string out = "feature";
    for (std::size_t l : grid.layer_indices) out += "," + std::to_string(l);
    out += "\n";
    for (std::size_t f = 0; f < grid.feature_count(); ++f) {
        out += grid.feature_names[f];
        for (std::size_t l = 0; l < grid.layer_count(); ++l) out += "," + format_number(grid.mean_r2(f, l));
        out += "\n";
    }
    return out;
}

inline void emit_grid_csv(const ScoreGrid& grid, const std::filesystem::path& path) {
    write_file_atomic(path, format_grid_csv(grid));
}

inline void emit_grid_json(const ScoreGrid& grid, const std::filesystem::path& path) {
    emit_json(grid_to_json(grid), path);
}

/// Mean-R^2 grid from CSV. Per-fold detail is not part of the CSV, so the
/// result has k = 0.
inline ScoreGrid parse_grid_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    for (auto line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) fail(ErrorKind::schema, "empty grid CSV");
    const auto header = split(lines[0], ',');
    if (header.size() < 2 || header[0] != "feature") fail(ErrorKind::schema, "grid CSV header must start with 'feature'");
    ScoreGrid g;
    for (std::size_t c = 1; c < header.size(); ++c) {
        std::size_t layer = 0;
        if (!parse_int(header[c], layer)) fail(ErrorKind::schema, "bad layer column '" + std::string(header[c]) + "'");
        g.layer_indices.push_back(layer);
    }
    g.mean_r2 = Matrix(lines.size() - 1, g.layer_indices.size());
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r], ',');
        if (cells.size() != header.size())
            fail(ErrorKind::schema, "line " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) + " cells");
        g.feature_names.emplace_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c)
            if (!parse_double(cells[c], g.mean_r2(r - 1, c - 1)))
                fail(ErrorKind::schema, "line " + std::to_string(r + 1) + ": bad number '" + std::string(cells[c]) + "'");
    }
    return g;
}

inline ScoreGrid read_grid_csv(const std::filesystem::path& path) { return parse_grid_csv(read_file(path)); }

// ---------------------------------------------------------------------------
// SVG plots

enum class PlotKind { line, grouped_bar };

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
    PlotKind kind = PlotKind::line;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<std::string> x_ticks; // grouped_bar category labels, optional
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Fixed two-decimal coordinate text; keeps files small and stable.
inline std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static constexpr const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

} // namespace detail

inline void validate_plot(const PlotSpec& plot) {
    if (plot.series.empty()) fail(ErrorKind::domain, "plot has no series");
    for (const auto& s : plot.series) {
        if (s.points.empty()) fail(ErrorKind::domain, "series '" + s.name + "' has no points");
        for (const auto& [x, y] : s.points)
            if (!std::isfinite(x) || !std::isfinite(y)) fail(ErrorKind::domain, "series '" + s.name + "' has a non-finite point");
    }
    if (plot.kind == PlotKind::line) {
        auto xs = [](const PlotSeries& s) {
            std::vector<double> v;
            for (const auto& p : s.points) v.push_back(p.first);
            return v;
        };
        const auto first = xs(plot.series[0]);
        for (const auto& s : plot.series)
            if (xs(s) != first) fail(ErrorKind::domain, "line series must share the x domain");
    }
}

inline std::string render_svg(const PlotSpec& plot) {
    validate_plot(plot);
    constexpr double width = 720.0, height = 440.0;
    constexpr double left = 70.0, right = 170.0, top = 40.0, bottom = 60.0;
    const double pw = width - left - right;
    const double ph = height - top - bottom;

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = 0.0, y_hi = 0.0;
    for (const auto& s : plot.series)
        for (const auto& [x, y] : s.points) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (plot.kind == PlotKind::line) {
        y_lo = std::numeric_limits<double>::infinity();
        y_hi = -y_lo;
        for (const auto& s : plot.series)
            for (const auto& p : s.points) {
                y_lo = std::min(y_lo, p.second);
                y_hi = std::max(y_hi, p.second);
            }
    }
    if (y_hi == y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    if (x_hi == x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }

    // Bars occupy unit-wide slots centred on each x value.
    const bool bars = plot.kind == PlotKind::grouped_bar;
    const double slot_lo = bars ? x_lo - 0.5 : x_lo;
    const double slot_hi = bars ? x_hi + 0.5 : x_hi;
    auto px = [&](double x) { return left + (x - slot_lo) / (slot_hi - slot_lo) * pw; };
    auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + detail::coord(width) + "\" height=\"" +
           detail::coord(height) + "\" viewBox=\"0 0 " + detail::coord(width) + " " + detail::coord(height) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::coord(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           detail::xml_escape(plot.title) + "</text>\n";

    // Axes and ticks.
    svg += "<g stroke=\"black\" stroke-width=\"1\">\n";
    svg += "<line x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(top + ph) + "\" x2=\"" +
           detail::coord(left + pw) + "\" y2=\"" + detail::coord(top + ph) + "\"/>\n";
    svg += "<line x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(top) + "\" x2=\"" + detail::coord(left) +
           "\" y2=\"" + detail::coord(top + ph) + "\"/>\n";
    svg += "</g>\n<g font-size=\"11\">\n";
    constexpr int y_ticks = 5;
    for (int t = 0; t <= y_ticks; ++t) {
        const double v = y_lo + (y_hi - y_lo) * t / y_ticks;
        svg += "<text x=\"" + detail::coord(left - 6) + "\" y=\"" + detail::coord(py(v) + 4) +
               "\" text-anchor=\"end\">" + detail::tick_label(v) + "</text>\n";
    }
    std::vector<double> xs;
    for (const auto& s : plot.series)
        for (const auto& p : s.points) xs.push_back(p.first);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::string label =
            bars && i < plot.x_ticks.size() ? detail::xml_escape(plot.x_ticks[i]) : detail::tick_label(xs[i]);
        svg += "<text x=\"" + detail::coord(px(xs[i])) + "\" y=\"" + detail::coord(top + ph + 16) +
               "\" text-anchor=\"middle\">" + label + "</text>\n";
    }
    svg += "</g>\n";
    svg += "<text x=\"" + detail::coord(left + pw / 2) + "\" y=\"" + detail::coord(height - 16) +
           "\" text-anchor=\"middle\" font-size=\"13\">" + detail::xml_escape(plot.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::coord(top + ph / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
           detail::coord(top + ph / 2) + ")\">" + detail::xml_escape(plot.y_label) + "</text>\n";

    // Data.
    const std::size_t n_series = plot.series.size();
    for (std::size_t s = 0; s < n_series; ++s) {
        const auto& series = plot.series[s];
        const char* color = detail::palette(s);
        if (!bars) {
            std::string pts;
            for (const auto& [x, y] : series.points) {
                if (!pts.empty()) pts += ' ';
                pts += detail::coord(px(x)) + "," + detail::coord(py(y));
            }
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
                   "\"><title>" + detail::xml_escape(series.name) + "</title></polyline>\n";
        } else {
            const double slot = pw / (slot_hi - slot_lo);
            const double bar_w = slot * 0.8 / static_cast<double>(n_series);
            svg += "<g fill=\"" + std::string(color) + "\">\n";
            for (const auto& [x, y] : series.points) {
                const double x0 = px(x) - slot * 0.4 + bar_w * static_cast<double>(s);
                const double y0 = py(std::max(y, 0.0));
                const double y1 = py(std::min(y, 0.0));
                svg += "<rect x=\"" + detail::coord(x0) + "\" y=\"" + detail::coord(y0) + "\" width=\"" +
                       detail::coord(bar_w) + "\" height=\"" + detail::coord(y1 - y0) + "\"/>\n";
            }
            svg += "</g>\n";
        }
    }

    // Legend, capped so a 65-series plot stays readable.
    constexpr std::size_t legend_max = 20;
    svg += "<g font-size=\"11\">\n";
    for (std::size_t s = 0; s < std::min(n_series, legend_max); ++s) {
        const double y = top + 14.0 * static_cast<double>(s);
        svg += "<rect x=\"" + detail::coord(left + pw + 12) + "\" y=\"" + detail::coord(y) +
               "\" width=\"10\" height=\"10\" fill=\"" + detail::palette(s) + "\"/>\n";
        svg += "<text x=\"" + detail::coord(left + pw + 26) + "\" y=\"" + detail::coord(y + 9) + "\">" +
               detail::xml_escape(plot.series[s].name) + "</text>\n";
    }
    if (n_series > legend_max)
        svg += "<text x=\"" + detail::coord(left + pw + 12) + "\" y=\"" +
               detail::coord(top + 14.0 * static_cast<double>(legend_max) + 9) + "\">+" +
               std::to_string(n_series - legend_max) + " more</text>\n";
    svg += "</g>\n</svg>\n";
    return svg;
}

inline void emit_svg(const PlotSpec& plot, const std::filesystem::path& path) {
    write_file_atomic(path, render_svg(plot));
}

/// One line per feature across the grid's layers.
inline PlotSpec grid_layer_plot(const ScoreGrid& grid, std::string title) {
    PlotSpec p;
    p.kind = PlotKind::line;
    p.title = std::move(title);
    p.x_label = "layer";
    p.y_label = "mean R^2";
    for (std::size_t f = 0; f < grid.feature_count(); ++f) {
        PlotSeries s{grid.feature_names[f], {}};
        for (std::size_t l = 0; l < grid.layer_count(); ++l)
            s.points.emplace_back(static_cast<double>(grid.layer_indices[l]), grid.mean_r2(f, l));
        p.series.push_back(std::move(s));
    }
    return p;
}

/// Column means of the grid as a single line.
inline PlotSpec grid_mean_plot(const ScoreGrid& grid, std::string title) {
    PlotSpec p;
    p.title = std::move(title);
    p.x_label = "layer";
    p.y_label = "mean R^2 over features";
    PlotSeries s{"mean", {}};
    const auto means = grid.column_means();
    for (std::size_t l = 0; l < grid.layer_count(); ++l)
        s.points.emplace_back(static_cast<double>(grid.layer_indices[l]), means[l]);
    p.series.push_back(std::move(s));
    return p;
}

// ---------------------------------------------------------------------------
// Clusters

inline nlohmann::json cluster_report_json(const ProfileClusters& pc, const std::vector<std::size_t>& layer_indices,
                                          std::optional<double> ari) {
    const auto& c = pc.clustering;
    nlohmann::json assignments = nlohmann::json::object();
    for (std::size_t i = 0; i < pc.features.size(); ++i) assignments[pc.features[i]] = c.assignment[i];
    nlohmann::json centroids = nlohmann::json::array();
    for (std::size_t k = 0; k < c.k; ++k)
        centroids.push_back(std::vector<double>(c.centroids.row(k).begin(), c.centroids.row(k).end()));
    nlohmann::json j = {{"k", c.k},
                        {"layer_indices", layer_indices},
                        {"assignments", assignments},
                        {"centroids", centroids},
                        {"inertia", c.inertia},
                        {"inertia_history", c.inertia_history},
                        {"seed", c.seed},
                        {"restarts", c.restarts},
                        {"excluded_degenerate", pc.excluded}};
    j["ari_vs_categories"] = ari ? nlohmann::json(*ari) : nlohmann::json(nullptr);
    return j;
}

/// feature,cluster,<layer>... with rescaled profile values.
inline std::string format_profile_csv(const ProfileClusters& pc, const ProfileMatrix& profiles) {
    std::string out = "feature,cluster";
    for (std::size_t l : profiles.layer_indices) out += "," + std::to_string(l);
    out += "\n";
    for (std::size_t i = 0; i < pc.features.size(); ++i) {
        out += pc.features[i] + "," + std::to_string(pc.clustering.assignment[i]);
        for (double v : profiles.rescaled.row(pc.profile_rows[i])) out += "," + format_number(v);
        out += "\n";
    }
    return out;
}

inline std::string format_inertia_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "k,inertia\n";
    for (const auto& p : curve) out += std::to_string(p.k) + "," + format_number(p.inertia) + "\n";
    return out;
}

inline PlotSpec cluster_mean_plot(const std::vector<ClusterSummary>& summary, const std::vector<std::size_t>& layers) {
    PlotSpec p;
    p.title = "Cluster mean layer profiles";
    p.x_label = "layer";
    p.y_label = "rescaled R^2";
    for (const auto& s : summary) {
        PlotSeries series{"cluster " + std::to_string(s.cluster) + " (" + std::to_string(s.members.size()) + ")", {}};
        for (std::size_t l = 0; l < layers.size(); ++l)
            series.points.emplace_back(static_cast<double>(layers[l]), s.mean_rescaled[l]);
        p.series.push_back(std::move(series));
    }
    return p;
}

// ---------------------------------------------------------------------------
// WiC and context comparison

inline std::string format_sweep_csv(const std::vector<WiCReport>& reports) {
    std::string out = "kind,layer,accuracy,f1,weight,bias,n_train,n_dev\n";
    for (const auto& r : reports) {
        out += r.kind + "," + (r.layer ? std::to_string(*r.layer) : std::string()) + "," +
               format_number(r.metrics.accuracy) + "," + format_number(r.metrics.f1) + "," +
               format_number(r.logistic.weight) + "," + format_number(r.logistic.bias) + "," +
               std::to_string(r.n_train) + "," + std::to_string(r.n_dev) + "\n";
    }
    return out;
}

inline std::string format_context_csv(const std::vector<ContextRow>& rows) {
    std::string out = "feature,value_a,value_b,delta\n";
    for (const auto& r : rows)
        out += r.feature + "," + format_number(r.value_a) + "," + format_number(r.value_b) + "," + format_number(r.delta) + "\n";
    return out;
}

/// Grouped bars of the two contexts' values for the `top` largest |delta|.
inline PlotSpec context_plot(const std::vector<ContextRow>& rows, std::string label_a, std::string label_b,
                             std::size_t top = 15) {
    PlotSpec p;
    p.kind = PlotKind::grouped_bar;
    p.title = "Feature values in two contexts";
    p.x_label = "feature";
    p.y_label = "predicted value";
    PlotSeries a{std::move(label_a), {}}, b{std::move(label_b), {}};
    for (std::size_t i = 0; i < std::min(top, rows.size()); ++i) {
        a.points.emplace_back(static_cast<double>(i), rows[i].value_a);
        b.points.emplace_back(static_cast<double>(i), rows[i].value_b);
        p.x_ticks.push_back(rows[i].feature);
    }
    p.series = {std::move(a), std::move(b)};
    return p;
}

} // namespace semfeat
