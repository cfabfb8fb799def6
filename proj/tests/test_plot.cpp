#include <doctest.h>

#include <string>

#include "ftlab/errors.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/plot/plot.hpp"

using namespace ftlab;
using namespace ftlab::plot;

namespace {

io::CsvTable table_of(const std::string& text) { return io::parse_csv(text); }

// last "x,y" pair of the polyline whose data-series attribute matches
std::string last_point_of(const std::string& svg, const std::string& series) {
    const std::string tag = "data-series=\"" + series + "\"";
    auto at = svg.find(tag);
    REQUIRE(at != std::string::npos);
    auto p0 = svg.find("points=\"", at);
    REQUIRE(p0 != std::string::npos);
    p0 += 8;
    auto p1 = svg.find('"', p0);
    const std::string pts = svg.substr(p0, p1 - p0);
    auto last_sp = pts.find_last_of(' ');
    return last_sp == std::string::npos ? pts : pts.substr(last_sp + 1);
}

}  // namespace

TEST_CASE("plot kind names round-trip") {
    for (auto kind : {PlotKind::loglog_degree, PlotKind::loss_curves, PlotKind::coverage,
                      PlotKind::burstiness, PlotKind::feature_growth}) {
        CHECK(kind_from_name(kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(kind_from_name("histogram"), ConfigError);
}

TEST_CASE("identical tables give identical bytes") {
    auto t = table_of("step,loss_all\n1,6.9\n2,6.1\n3,5.2\n");
    CHECK(emit_plot(t, PlotKind::loss_curves) == emit_plot(t, PlotKind::loss_curves));
}

TEST_CASE("empty table renders an axes-only frame") {
    io::CsvTable t;
    auto svg = emit_plot(t, PlotKind::loss_curves);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") == std::string::npos);
    CHECK(svg.find("loss (nats)") != std::string::npos);

    // headers but no rows is also axes-only, not an error
    auto t2 = table_of("step,loss_all\n");
    CHECK(emit_plot(t2, PlotKind::loss_curves).find("<polyline") == std::string::npos);
}

TEST_CASE("schema mismatch is a domain error") {
    auto t = table_of("a,b\n1,2\n");
    CHECK_THROWS_AS(emit_plot(t, PlotKind::loss_curves), DomainError);
    CHECK_THROWS_AS(emit_plot(t, PlotKind::loglog_degree), DomainError);
    CHECK_THROWS_AS(emit_plot(t, PlotKind::coverage), DomainError);
    CHECK_THROWS_AS(emit_plot(t, PlotKind::burstiness), DomainError);
    CHECK_THROWS_AS(emit_plot(t, PlotKind::feature_growth), DomainError);

    auto bad = table_of("step,loss_all\n1,not-a-number\n");
    CHECK_THROWS_AS(emit_plot(bad, PlotKind::loss_curves), DomainError);
}

TEST_CASE("log-log degree plot drops non-positive values and uses decade ticks") {
    auto t = table_of("rank,degree\n1,1000\n2,300\n3,0\n4,30\n10,1\n");
    auto svg = emit_plot(t, PlotKind::loglog_degree);
    const auto pts_at = svg.find("points=\"");
    REQUIRE(pts_at != std::string::npos);
    auto end = svg.find('"', pts_at + 8);
    const std::string pts = svg.substr(pts_at + 8, end - pts_at - 8);
    // 5 rows, one with degree 0 dropped
    CHECK(std::count(pts.begin(), pts.end(), ',') == 4);
    CHECK(svg.find(">1000<") != std::string::npos);  // decade tick label

    auto sc = plot_scales(t, PlotKind::loglog_degree);
    CHECK(sc.x.log);
    CHECK(sc.y.log);
    CHECK(sc.x.lo == 1.0);
    CHECK(sc.x.hi == 10.0);
    CHECK(sc.y.lo == 1.0);
    CHECK(sc.y.hi == 1000.0);
}

TEST_CASE("loss curves place the top series where the csv says") {
    // FC ends highest; the plotted final point must match a recomputation
    // from the csv through the published scales
    const std::string csv =
        "step,lr,loss_all,loss_FF,loss_FC,loss_CF,loss_CC\n"
        "1,0.001,6.9,6.9,6.9,6.9,6.9\n"
        "100,0.001,4.0,1.0,6.0,0.8,4.5\n"
        "200,0.001,3.0,0.6,4.2,0.3,2.9\n";
    auto t = table_of(csv);
    auto svg = emit_plot(t, PlotKind::loss_curves);
    auto sc = plot_scales(t, PlotKind::loss_curves);

    char want[64];
    std::snprintf(want, sizeof want, "%.2f,%.2f", sc.x.to_px(200.0), sc.y.to_px(4.2));
    CHECK(last_point_of(svg, "loss_FC") == want);

    // highest loss means smallest y pixel among the final points
    const double fc_y = sc.y.to_px(4.2);
    for (const auto& [name, v] :
         {std::pair<std::string, double>{"loss_FF", 0.6}, {"loss_CF", 0.3}, {"loss_CC", 2.9},
          {"loss_all", 3.0}}) {
        auto pt = last_point_of(svg, name);
        const double y = std::stod(pt.substr(pt.find(',') + 1));
        CHECK(fc_y < y);
        (void)v;
    }
}

TEST_CASE("coverage and feature growth render single series") {
    auto cov = table_of("k,token,covered,fraction\n1,the,120,0.3\n2,of,200,0.5\n3,a,280,0.7\n");
    auto svg = emit_plot(cov, PlotKind::coverage);
    CHECK(svg.find("data-series=\"fraction\"") != std::string::npos);
    CHECK(svg.find("coverage fraction") != std::string::npos);

    auto fg = table_of("checkpoint_step,unique_features\n1000,2100\n5000,3400\n20000,5100\n");
    auto fsvg = emit_plot(fg, PlotKind::feature_growth);
    CHECK(fsvg.find("<circle") != std::string::npos);
    auto sc = plot_scales(fg, PlotKind::feature_growth);
    CHECK(!sc.x.log);
    CHECK(sc.x.lo == 0.0);
    CHECK(sc.x.hi == 20000.0);
}

TEST_CASE("burstiness groups series per token") {
    auto t = table_of(
        "token,bin,count\nthe,0,50\nthe,1,40\nthe,2,30\nzuzik,0,90\nzuzik,1,5\nzuzik,2,1\n");
    auto svg = emit_plot(t, PlotKind::burstiness);
    CHECK(svg.find("data-series=\"the\"") != std::string::npos);
    CHECK(svg.find("data-series=\"zuzik\"") != std::string::npos);
    // two series get a legend
    CHECK(svg.find("<rect x=") != std::string::npos);
}
