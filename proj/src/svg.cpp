#include "widthlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace widthlab {

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = kWidth - 170.0;
constexpr double kTop = 42.0;
constexpr double kBottom = kHeight - 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
constexpr int kPaletteSize = 8;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_text(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void grow(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
};

// Tick positions for one axis in plotting space.
std::vector<double> make_ticks(double lo, double hi, bool log2_axis) {
  std::vector<double> ticks;
  if (log2_axis) {
    const int first = static_cast<int>(std::ceil(lo - 1e-9));
    const int last = static_cast<int>(std::floor(hi + 1e-9));
    const int step = std::max(1, (last - first + 6) / 7);
    for (int e = first; e <= last; e += step) ticks.push_back(static_cast<double>(e));
    return ticks;
  }
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  if (raw / mag > 5.0) {
    step = 10.0 * mag;
  } else if (raw / mag > 2.0) {
    step = 5.0 * mag;
  } else if (raw / mag > 1.0) {
    step = 2.0 * mag;
  }
  const double first = std::ceil(lo / step) * step;
  for (double t = first; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  return ticks;
}

std::string tick_label(double t, bool log2_axis) {
  if (log2_axis) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "2^%d", static_cast<int>(std::lround(t)));
    return buf;
  }
  return tick_text(t);
}

}  // namespace

std::string render_line_chart(const SvgChartSpec& spec) {
  if (spec.series.empty()) {
    throw std::invalid_argument("render_line_chart: need at least one series");
  }

  // Transform to plotting space, dropping points a log axis cannot show.
  struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<PlotSeries> plotted;
  Range rx, ry;
  for (const SvgSeries& s : spec.series) {
    PlotSeries ps;
    ps.label = s.label;
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if ((spec.log2_x && x <= 0.0) || (spec.log2_y && y <= 0.0)) continue;
      const double px = spec.log2_x ? std::log2(x) : x;
      const double py = spec.log2_y ? std::log2(y) : y;
      ps.pts.emplace_back(px, py);
      rx.grow(px);
      ry.grow(py);
    }
    plotted.push_back(std::move(ps));
  }
  if (!rx.valid() || !ry.valid()) {
    throw std::invalid_argument("render_line_chart: no plottable points");
  }
  if (rx.hi - rx.lo < 1e-12) {
    rx.lo -= 1.0;
    rx.hi += 1.0;
  }
  if (ry.hi - ry.lo < 1e-12) {
    ry.lo -= 1.0;
    ry.hi += 1.0;
  }
  const double pad_x = 0.05 * (rx.hi - rx.lo);
  const double pad_y = 0.08 * (ry.hi - ry.lo);
  rx.lo -= pad_x;
  rx.hi += pad_x;
  ry.lo -= pad_y;
  ry.hi += pad_y;

  const auto sx = [&](double px) { return kLeft + (px - rx.lo) / (rx.hi - rx.lo) * (kRight - kLeft); };
  const auto sy = [&](double py) { return kBottom - (py - ry.lo) / (ry.hi - ry.lo) * (kBottom - kTop); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num((kLeft + kRight) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
         "fill=\"#111111\">"
      << xml_escape(spec.title) << "</text>\n";

  // Grid and tick labels.
  for (double t : make_ticks(rx.lo, rx.hi, spec.log2_x)) {
    const double X = sx(t);
    svg << "<line x1=\"" << num(X) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(X) << "\" y2=\""
        << num(kBottom) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(X) << "\" y=\"" << num(kBottom + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\" fill=\"#333333\">"
        << xml_escape(tick_label(t, spec.log2_x)) << "</text>\n";
  }
  for (double t : make_ticks(ry.lo, ry.hi, spec.log2_y)) {
    const double Y = sy(t);
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(Y) << "\" x2=\"" << num(kRight) << "\" y2=\""
        << num(Y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(Y + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"#333333\">"
        << xml_escape(tick_label(t, spec.log2_y)) << "</text>\n";
  }

  // Axes frame and labels.
  svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kRight - kLeft)
      << "\" height=\"" << num(kBottom - kTop)
      << "\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1.2\"/>\n";
  svg << "<text x=\"" << num((kLeft + kRight) / 2) << "\" y=\"" << num(kHeight - 14)
      << "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#111111\">" << xml_escape(spec.x_label)
      << "</text>\n";
  svg << "<text x=\"20\" y=\"" << num((kTop + kBottom) / 2)
      << "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#111111\" transform=\"rotate(-90 20 "
      << num((kTop + kBottom) / 2) << ")\">" << xml_escape(spec.y_label) << "</text>\n";

  // Theory guide lines, clipped to the frame by construction (drawn across
  // the x-range at their own y; may leave the frame if the slope is steep,
  // so clamp endpoints into the y-range).
  for (const SvgGuideLine& g : spec.guides) {
    const double gx0 = spec.log2_x ? std::log2(g.x0) : g.x0;
    const double gy0 = spec.log2_y ? std::log2(g.y0) : g.y0;
    double xa = rx.lo, xb = rx.hi;
    double ya = gy0 + g.slope * (xa - gx0);
    double yb = gy0 + g.slope * (xb - gx0);
    const auto clamp_end = [&](double& xe, double& ye) {
      if (ye < ry.lo && g.slope != 0.0) {
        xe = gx0 + (ry.lo - gy0) / g.slope;
        ye = ry.lo;
      } else if (ye > ry.hi && g.slope != 0.0) {
        xe = gx0 + (ry.hi - gy0) / g.slope;
        ye = ry.hi;
      }
    };
    clamp_end(xa, ya);
    clamp_end(xb, yb);
    svg << "<line x1=\"" << num(sx(xa)) << "\" y1=\"" << num(sy(ya)) << "\" x2=\"" << num(sx(xb))
        << "\" y2=\"" << num(sy(yb))
        << "\" stroke=\"#888888\" stroke-width=\"1.4\" stroke-dasharray=\"6 4\"/>\n";
    if (!g.label.empty()) {
      svg << "<text x=\"" << num(sx(xb) - 4) << "\" y=\"" << num(sy(yb) - 6)
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"#666666\">" << xml_escape(g.label)
          << "</text>\n";
    }
  }

  // Data series.
  for (std::size_t s = 0; s < plotted.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    if (plotted[s].pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (const auto& [px, py] : plotted[s].pts) svg << num(sx(px)) << "," << num(sy(py)) << " ";
      svg << "\"/>\n";
    }
    for (const auto& [px, py] : plotted[s].pts) {
      svg << "<circle cx=\"" << num(sx(px)) << "\" cy=\"" << num(sy(py)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
  }

  // Legend.
  const double lx = kRight + 14.0;
  double ly = kTop + 8.0;
  for (std::size_t s = 0; s < plotted.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 22) << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\" "
        << "fill=\"#111111\">" << xml_escape(plotted[s].label) << "</text>\n";
    ly += 18.0;
  }
  for (const SvgGuideLine& g : spec.guides) {
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 22) << "\" y2=\""
        << num(ly) << "\" stroke=\"#888888\" stroke-width=\"1.4\" stroke-dasharray=\"6 4\"/>\n";
    svg << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\" "
        << "fill=\"#666666\">" << xml_escape(g.label) << "</text>\n";
    ly += 18.0;
  }

  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const std::filesystem::path& path, const SvgChartSpec& spec) {
  const std::string content = render_line_chart(spec);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("svg: cannot open for writing: " + path.string());
  file << content;
  if (!file) throw std::runtime_error("svg: write failed: " + path.string());
}

}  // namespace widthlab
