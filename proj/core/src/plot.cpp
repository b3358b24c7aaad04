#include "rsplab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "rsplab/config.hpp"
#include "rsplab/image.hpp"

namespace rsplab::plot {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

}  // namespace

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, int width, int height) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  std::size_t total_points = 0;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      ++total_points;
    }
  }
  if (total_points == 0) throw config::ConfigError("svg chart: no points to plot");
  if (!(xmax > xmin)) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (!(ymax > ymin)) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double left = 64, right = width - 24, top = 48, bottom = height - 56;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  std::ofstream out(path);
  if (!out) throw img::IoError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\""
      << " font-size=\"15\">" << escape_xml(title) << "</text>\n";

  // Grid, ticks, tick labels.
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / ticks;
    const double fy = ymin + (ymax - ymin) * i / ticks;
    out << "<line x1=\"" << fmt(px(fx)) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(px(fx))
        << "\" y2=\"" << fmt(bottom) << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py(fy)) << "\" x2=\"" << fmt(right)
        << "\" y2=\"" << fmt(py(fy)) << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(bottom + 18)
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << fmt(fx)
        << "</text>\n";
    out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(fy) + 4)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt(fy)
        << "</text>\n";
  }
  out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(right - left)
      << "\" height=\"" << fmt(bottom - top) << "\" fill=\"none\" stroke=\"#404040\""
      << " stroke-width=\"1\"/>\n";
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">"
      << escape_xml(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (top + bottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\""
      << " transform=\"rotate(-90 18 " << (top + bottom) / 2 << ")\">" << escape_xml(y_label)
      << "</text>\n";

  // Series.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    if (s.points.empty()) continue;
    const char* color = kPalette[si % kPaletteSize];
    if (s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) out << fmt(px(x)) << "," << fmt(py(y)) << " ";
      out << "\"/>\n";
    }
    if (s.points.size() <= 60) {
      for (const auto& [x, y] : s.points) {
        out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    }
  }

  // Legend (top-right corner of the plot area).
  double ly = top + 14;
  for (std::size_t si = 0; si < series.size(); ++si) {
    if (series[si].points.empty()) continue;
    const char* color = kPalette[si % kPaletteSize];
    out << "<line x1=\"" << fmt(right - 130) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
        << fmt(right - 110) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(right - 104) << "\" y=\"" << fmt(ly)
        << "\" font-family=\"monospace\" font-size=\"11\">" << escape_xml(series[si].name)
        << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
  if (!out) throw img::IoError("failed writing " + path);
}

}  // namespace rsplab::plot
