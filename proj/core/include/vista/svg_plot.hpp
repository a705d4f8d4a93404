#pragma once

#include <string>
#include <vector>

namespace vista {

struct PlotSeries {
  std::string label;
  std::vector<double> y;
};

/// Self-contained SVG line chart. Each series is min-max normalised to [0,1]
/// so metrics on different scales share one axis; the raw range is printed
/// in the legend. x_labels name the ticks.
std::string render_svg(const std::string& title,
                       const std::vector<std::string>& x_labels,
                       const std::vector<PlotSeries>& series);

}  // namespace vista
