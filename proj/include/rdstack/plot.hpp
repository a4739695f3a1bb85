#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rdstack::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN breaks the line
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Fixed y range when lo < hi; otherwise fitted to the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
};

/// Static SVG line chart with axes, ticks and a legend.
std::string render_svg(const Chart& chart);
void write_svg(const std::filesystem::path& path, const Chart& chart);

}  // namespace rdstack::plot
