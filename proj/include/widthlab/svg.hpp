// Self-contained SVG line charts (no external renderer, fonts, or scripts):
// multi-series polylines with optional log2 axes, dashed theory-slope guide
// lines, a legend, and XML-escaped labels.
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace widthlab {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y) in data space
};

// Straight reference line of the given slope through (x0, y0), drawn in the
// chart's plotting space (so on log2 axes it depicts a power law).
struct SvgGuideLine {
  std::string label;
  double slope = 0.0;
  double x0 = 1.0;
  double y0 = 1.0;
};

struct SvgChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  bool log2_y = false;
  std::vector<SvgSeries> series;
  std::vector<SvgGuideLine> guides;
};

// Renders the chart; needs at least one series with one plottable point.
// On a log2 axis, nonpositive coordinates are dropped point-by-point.
std::string render_line_chart(const SvgChartSpec& spec);

// render_line_chart + write; throws std::runtime_error on I/O failure.
void write_svg(const std::filesystem::path& path, const SvgChartSpec& spec);

// Escapes &, <, >, and quotes for use in SVG text and attributes.
std::string xml_escape(const std::string& text);

}  // namespace widthlab
