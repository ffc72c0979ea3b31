#include "support.hpp"

#include <semfeat/report.hpp>

using namespace semfeat;
using namespace semfeat::testing;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

ScoreGrid random_grid(Rng& rng, std::size_t features, std::size_t layers) {
    ScoreGrid g;
    for (std::size_t f = 0; f < features; ++f)
        g.feature_names.push_back(f < 65 ? binder_feature_names()[f] : "x" + std::to_string(f));
    for (std::size_t l = 0; l < layers; ++l) g.layer_indices.push_back(l);
    g.mean_r2 = Matrix(features, layers);
    for (double& v : g.mean_r2.data()) v = rng.uniform(-0.2, 0.9);
    return g;
}

} // namespace

TEST(GridCsv, TwoByTwoHasThreeLines) {
    Rng rng(1);
    const auto csv = format_grid_csv(random_grid(rng, 2, 2));
    EXPECT_EQ(count_of(csv, "\n"), 3u);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,0,1");
}

TEST(GridCsv, RoundTripWithinTolerance) {
    TempDir dir("csv");
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_grid(rng, 1 + rng.below(65), 2 + rng.below(20));
        emit_grid_csv(g, dir / "g.csv");
        const auto back = read_grid_csv(dir / "g.csv");
        EXPECT_EQ(back.feature_names, g.feature_names);
        EXPECT_EQ(back.layer_indices, g.layer_indices);
        for (std::size_t i = 0; i < g.mean_r2.data().size(); ++i)
            EXPECT_NEAR(back.mean_r2.data()[i], g.mean_r2.data()[i], 1e-9);
    }
}

TEST(GridCsv, BadInputRejected) {
    EXPECT_TRUE(throws_kind([] { parse_grid_csv(""); }, ErrorKind::schema));
    EXPECT_TRUE(throws_kind([] { parse_grid_csv("feature,0\nVision,abc\n"); }, ErrorKind::schema, "line 2"));
}

TEST(Svg, OneSeriesOnePolyline) {
    PlotSpec p;
    p.series.push_back({"only", {{0, 0.1}, {1, 0.4}}});
    const auto svg = render_svg(p);
    EXPECT_EQ(count_of(svg, "<polyline"), 1u);
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_EQ(count_of(svg, "<svg "), 1u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, DeterministicFiles) {
    TempDir dir("svg");
    Rng rng(3);
    const auto p = grid_layer_plot(random_grid(rng, 5, 4), "t");
    emit_svg(p, dir / "a.svg");
    emit_svg(p, dir / "b.svg");
    EXPECT_EQ(read_file(dir / "a.svg"), read_file(dir / "b.svg"));
}

TEST(Svg, AtMostOnePolylinePerFeature) {
    Rng rng(4);
    const auto svg = render_svg(grid_layer_plot(random_grid(rng, 65, 13), "all"));
    EXPECT_EQ(count_of(svg, "<polyline"), 65u);
}

TEST(Svg, InvalidSpecsRejected) {
    PlotSpec empty;
    EXPECT_TRUE(throws_kind([&] { render_svg(empty); }, ErrorKind::domain));
    PlotSpec nopoints;
    nopoints.series.push_back({"s", {}});
    EXPECT_TRUE(throws_kind([&] { render_svg(nopoints); }, ErrorKind::domain));
    PlotSpec mismatched;
    mismatched.series.push_back({"a", {{0, 1}, {1, 2}}});
    mismatched.series.push_back({"b", {{0, 1}, {2, 2}}});
    EXPECT_TRUE(throws_kind([&] { render_svg(mismatched); }, ErrorKind::domain));
}

TEST(Svg, TextIsEscaped) {
    PlotSpec p;
    p.title = "R^2 <by> layer & \"feature\"";
    p.series.push_back({"a<b", {{0, 1}}});
    const auto svg = render_svg(p);
    EXPECT_EQ(svg.find("<by>"), std::string::npos);
    EXPECT_NE(svg.find("&lt;by&gt;"), std::string::npos);
}

TEST(Svg, GroupedBarsDrawRects) {
    PlotSpec p;
    p.kind = PlotKind::grouped_bar;
    p.series.push_back({"a", {{0, 1}, {1, 2}}});
    p.series.push_back({"b", {{0, -1}, {1, 3}}});
    EXPECT_GE(count_of(render_svg(p), "<rect"), 4u);
}

TEST(Tables, ContextCsvHeader) {
    const auto csv = format_context_csv({{"Vision", 1.0, 1.5, 0.5}});
    EXPECT_EQ(csv, "feature,value_a,value_b,delta\nVision,1,1.5,0.5\n");
}

TEST(Tables, InertiaCsv) {
    EXPECT_EQ(format_inertia_csv({{1, 4.0}, {2, 0.5}}), "k,inertia\n1,4\n2,0.5\n");
}

TEST(Json, EmitIsStable) {
    TempDir dir("json");
    emit_json({{"b", 1}, {"a", {1.5, 2}}}, dir / "x.json");
    EXPECT_EQ(read_file(dir / "x.json"), "{\n  \"a\": [\n    1.5,\n    2\n  ],\n  \"b\": 1\n}\n");
}
