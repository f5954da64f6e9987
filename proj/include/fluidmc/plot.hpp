#pragma once

#include <string>
#include <vector>

namespace fluidmc {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

/// Static SVG line chart with fixed styling; identical input gives identical bytes.
std::string render_line_chart(const std::vector<PlotSeries>& series, const std::string& title,
                              const std::string& x_label = "t", const std::string& y_label = "");

}  // namespace fluidmc
