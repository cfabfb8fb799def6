#pragma once

#include <string>
#include <string_view>

#include "ftlab/io/csv.hpp"

namespace ftlab::plot {

enum class PlotKind { loglog_degree, loss_curves, coverage, burstiness, feature_growth };

// name <-> kind; kind_from_name throws ConfigError on unknown names
PlotKind kind_from_name(std::string_view name);
std::string_view kind_name(PlotKind kind);

// Maps data values to pixel coordinates; log axes interpolate in log10.
struct AxisScale {
    double lo{0.0}, hi{1.0};
    double px0{0.0}, px1{1.0};  // pixel positions of lo and hi
    bool log{false};

    double to_px(double v) const;
};

struct Scales {
    AxisScale x, y;
};

// The exact transforms emit_plot uses for a table, exposed so readers can
// recompute any plotted point from the CSV it came from.
Scales plot_scales(const io::CsvTable& table, PlotKind kind);

// Renders the table to a standalone SVG document. Deterministic: the same
// table and kind give identical bytes. A table with no data rows renders
// an axes-only frame. A table whose header does not match the kind's
// schema is a DomainError. Degree/Zipf style kinds use log-log axes and
// drop non-positive values.
std::string emit_plot(const io::CsvTable& table, PlotKind kind);

}  // namespace ftlab::plot
