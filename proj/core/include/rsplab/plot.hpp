#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rsplab::plot {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Self-contained SVG line chart: axes with ticks, one polyline per series
// (point markers when a series is short), and a legend. Deterministic text
// output for byte-stable artifacts. config::ConfigError when no series has
// points; img::IoError when the file cannot be written.
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, int width = 720, int height = 440);

}  // namespace rsplab::plot
