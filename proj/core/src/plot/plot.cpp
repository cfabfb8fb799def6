#include "ftlab/plot/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>

#include "ftlab/errors.hpp"

namespace ftlab::plot {

namespace {

// fixed canvas; all geometry below is derived from these
constexpr double kWidth = 860, kHeight = 520;
constexpr double kLeft = 70, kRight = 836, kTop = 42, kBottom = 462;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
constexpr int kPaletteSize = 8;

std::string fmt2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

double parse_num(const std::string& cell, const std::string& col) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw DomainError("non-numeric value '" + cell + "' in column " + col);
    return v;
}

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct PlotData {
    std::string x_label, y_label;
    bool log_log{false};
    bool markers{false};
    std::vector<Series> series;
};

int need_column(const io::CsvTable& t, const std::string& name, PlotKind kind) {
    const int c = t.column(name);
    if (c < 0)
        throw DomainError(std::string(kind_name(kind)) + " plot needs a '" + name + "' column");
    return c;
}

PlotData extract(const io::CsvTable& t, PlotKind kind) {
    PlotData d;
    const bool empty = t.rows.empty();
    switch (kind) {
        case PlotKind::loglog_degree: {
            d.x_label = "rank";
            d.y_label = "degree";
            d.log_log = true;
            if (empty) break;
            const int rank = need_column(t, "rank", kind);
            std::vector<int> cols;
            for (int c = 0; c < static_cast<int>(t.header.size()); ++c)
                if (c != rank && t.header[c] != "token") cols.push_back(c);
            if (cols.empty()) throw DomainError("loglog_degree plot needs a value column");
            for (int c : cols) {
                Series s;
                s.name = t.header[c];
                for (const auto& r : t.rows) {
                    const double x = parse_num(r[rank], "rank");
                    const double y = parse_num(r[c], t.header[c]);
                    if (x > 0 && y > 0) s.points.push_back({x, y});
                }
                d.series.push_back(std::move(s));
            }
            break;
        }
        case PlotKind::loss_curves: {
            d.x_label = "step";
            d.y_label = "loss (nats)";
            if (empty) break;
            const int step = need_column(t, "step", kind);
            std::vector<int> cols;
            for (int c = 0; c < static_cast<int>(t.header.size()); ++c)
                if (t.header[c].rfind("loss", 0) == 0) cols.push_back(c);
            if (cols.empty()) throw DomainError("loss_curves plot needs loss columns");
            for (int c : cols) {
                Series s;
                s.name = t.header[c];
                for (const auto& r : t.rows)
                    s.points.push_back({parse_num(r[step], "step"), parse_num(r[c], t.header[c])});
                d.series.push_back(std::move(s));
            }
            break;
        }
        case PlotKind::coverage: {
            d.x_label = "k";
            d.y_label = "coverage fraction";
            if (empty) break;
            const int k = need_column(t, "k", kind);
            const int f = need_column(t, "fraction", kind);
            Series s;
            s.name = "fraction";
            for (const auto& r : t.rows)
                s.points.push_back({parse_num(r[k], "k"), parse_num(r[f], "fraction")});
            d.series.push_back(std::move(s));
            break;
        }
        case PlotKind::burstiness: {
            d.x_label = "interval bin";
            d.y_label = "count";
            if (empty) break;
            const int tok = need_column(t, "token", kind);
            const int bin = need_column(t, "bin", kind);
            const int cnt = need_column(t, "count", kind);
            std::vector<std::string> order;
            std::map<std::string, Series> by_token;
            for (const auto& r : t.rows) {
                auto& s = by_token[r[tok]];
                if (s.name.empty()) {
                    s.name = r[tok];
                    order.push_back(r[tok]);
                }
                s.points.push_back({parse_num(r[bin], "bin"), parse_num(r[cnt], "count")});
            }
            for (const auto& name : order) d.series.push_back(std::move(by_token[name]));
            break;
        }
        case PlotKind::feature_growth: {
            d.x_label = "checkpoint step";
            d.y_label = "unique features";
            d.markers = true;
            if (empty) break;
            const int step = need_column(t, "checkpoint_step", kind);
            const int uf = need_column(t, "unique_features", kind);
            Series s;
            s.name = "unique_features";
            for (const auto& r : t.rows)
                s.points.push_back(
                    {parse_num(r[step], "checkpoint_step"), parse_num(r[uf], "unique_features")});
            d.series.push_back(std::move(s));
            break;
        }
    }
    return d;
}

AxisScale make_scale(const std::vector<double>& vals, bool log, bool pad_hi, double px0,
                     double px1) {
    AxisScale s;
    s.log = log;
    s.px0 = px0;
    s.px1 = px1;
    if (log) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (double v : vals)
            if (v > 0) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (!(hi > 0)) {
            s.lo = 1;
            s.hi = 100;
            return s;
        }
        s.lo = std::pow(10.0, std::floor(std::log10(lo)));
        s.hi = std::pow(10.0, std::ceil(std::log10(hi)));
        if (s.hi <= s.lo) s.hi = s.lo * 10;
        return s;
    }
    double lo = 0, hi = 0;
    for (double v : vals) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (pad_hi) hi += 0.05 * (hi - lo);
    if (hi <= lo) hi = lo + 1;
    s.lo = lo;
    s.hi = hi;
    return s;
}

std::vector<double> ticks_of(const AxisScale& s) {
    std::vector<double> out;
    if (s.log) {
        for (double v = s.lo; v <= s.hi * 1.0000001; v *= 10) out.push_back(v);
        return out;
    }
    const double span = s.hi - s.lo;
    const double raw = span / 4;
    const double base = std::pow(10.0, std::floor(std::log10(raw)));
    const double m = raw / base;
    const double step = (m <= 1 ? 1 : m <= 2 ? 2 : m <= 5 ? 5 : 10) * base;
    double v = std::ceil(s.lo / step) * step;
    for (; v <= s.hi + span * 1e-9; v += step) out.push_back(v == 0 ? 0 : v);  // kill -0
    return out;
}

std::string tick_label(double v) {
    if (v != 0 && (std::fabs(v) >= 1e5 || std::fabs(v) < 1e-3)) {
        const int e = static_cast<int>(std::floor(std::log10(std::fabs(v)) + 1e-9));
        const double m = v / std::pow(10.0, e);
        char buf[48];
        if (std::fabs(m - 1.0) < 1e-9)
            std::snprintf(buf, sizeof buf, "1e%d", e);
        else
            std::snprintf(buf, sizeof buf, "%.3ge%d", m, e);
        return buf;
    }
    return io::fmt_g(v);
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

}  // namespace

PlotKind kind_from_name(std::string_view name) {
    if (name == "loglog_degree") return PlotKind::loglog_degree;
    if (name == "loss_curves") return PlotKind::loss_curves;
    if (name == "coverage") return PlotKind::coverage;
    if (name == "burstiness") return PlotKind::burstiness;
    if (name == "feature_growth") return PlotKind::feature_growth;
    throw ConfigError("unknown plot kind '" + std::string(name) + "'");
}

std::string_view kind_name(PlotKind kind) {
    switch (kind) {
        case PlotKind::loglog_degree: return "loglog_degree";
        case PlotKind::loss_curves: return "loss_curves";
        case PlotKind::coverage: return "coverage";
        case PlotKind::burstiness: return "burstiness";
        case PlotKind::feature_growth: return "feature_growth";
    }
    throw ConfigError("unknown plot kind");
}

double AxisScale::to_px(double v) const {
    double t;
    if (log) {
        t = (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    } else {
        t = (v - lo) / (hi - lo);
    }
    return px0 + t * (px1 - px0);
}

Scales plot_scales(const io::CsvTable& table, PlotKind kind) {
    const PlotData d = extract(table, kind);
    std::vector<double> xs, ys;
    for (const auto& s : d.series)
        for (const auto& [x, y] : s.points) {
            xs.push_back(x);
            ys.push_back(y);
        }
    Scales sc;
    sc.x = make_scale(xs, d.log_log, false, kLeft, kRight);
    sc.y = make_scale(ys, d.log_log, true, kBottom, kTop);
    return sc;
}

std::string emit_plot(const io::CsvTable& table, PlotKind kind) {
    const PlotData d = extract(table, kind);
    const Scales sc = plot_scales(table, kind);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"520\" "
           "viewBox=\"0 0 860 520\" font-family=\"Helvetica,Arial,sans-serif\" "
           "font-size=\"12\">\n";
    svg += "<rect width=\"860\" height=\"520\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"430\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
           std::string(kind_name(kind)) + "</text>\n";

    // gridlines and ticks
    for (double tv : ticks_of(sc.x)) {
        const std::string px = fmt2(sc.x.to_px(tv));
        svg += "<line x1=\"" + px + "\" y1=\"" + fmt2(kTop) + "\" x2=\"" + px + "\" y2=\"" +
               fmt2(kBottom) + "\" stroke=\"#e5e5e5\"/>\n";
        svg += "<text x=\"" + px + "\" y=\"" + fmt2(kBottom + 18) +
               "\" text-anchor=\"middle\">" + tick_label(tv) + "</text>\n";
    }
    for (double tv : ticks_of(sc.y)) {
        const std::string py = fmt2(sc.y.to_px(tv));
        svg += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + py + "\" x2=\"" + fmt2(kRight) +
               "\" y2=\"" + py + "\" stroke=\"#e5e5e5\"/>\n";
        svg += "<text x=\"" + fmt2(kLeft - 8) + "\" y=\"" + py +
               "\" text-anchor=\"end\" dominant-baseline=\"middle\">" + tick_label(tv) +
               "</text>\n";
    }

    // axes over the grid
    svg += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(kBottom) + "\" x2=\"" + fmt2(kRight) +
           "\" y2=\"" + fmt2(kBottom) + "\" stroke=\"#333333\"/>\n";
    svg += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(kTop) + "\" x2=\"" + fmt2(kLeft) +
           "\" y2=\"" + fmt2(kBottom) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + fmt2((kLeft + kRight) / 2) + "\" y=\"" + fmt2(kHeight - 14) +
           "\" text-anchor=\"middle\">" + xml_escape(d.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + fmt2((kTop + kBottom) / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           fmt2((kTop + kBottom) / 2) + ")\">" + xml_escape(d.y_label) + "</text>\n";

    int color = 0;
    for (const auto& s : d.series) {
        if (s.points.empty()) {
            ++color;
            continue;
        }
        const char* stroke = kPalette[color % kPaletteSize];
        std::string pts;
        for (const auto& [x, y] : s.points) {
            if (!pts.empty()) pts += ' ';
            pts += fmt2(sc.x.to_px(x)) + "," + fmt2(sc.y.to_px(y));
        }
        svg += "<polyline data-series=\"" + xml_escape(s.name) + "\" fill=\"none\" stroke=\"" +
               stroke + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (d.markers) {
            for (const auto& [x, y] : s.points)
                svg += "<circle cx=\"" + fmt2(sc.x.to_px(x)) + "\" cy=\"" + fmt2(sc.y.to_px(y)) +
                       "\" r=\"3\" fill=\"" + stroke + "\"/>\n";
        }
        ++color;
    }

    if (d.series.size() > 1) {
        double ly = kTop + 12;
        for (std::size_t i = 0; i < d.series.size(); ++i) {
            const char* stroke = kPalette[i % kPaletteSize];
            svg += "<rect x=\"" + fmt2(kRight - 150) + "\" y=\"" + fmt2(ly - 9) +
                   "\" width=\"18\" height=\"4\" fill=\"" + stroke + "\"/>\n";
            svg += "<text x=\"" + fmt2(kRight - 126) + "\" y=\"" + fmt2(ly - 2) + "\">" +
                   xml_escape(d.series[i].name) + "</text>\n";
            ly += 16;
        }
    }

    svg += "</svg>\n";
    return svg;
}

}  // namespace ftlab::plot
