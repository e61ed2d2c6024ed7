#pragma once

#include <string>
#include <vector>

namespace ecaml::tools {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::size_t color = 0;
  bool dashed = false;
};

// Line chart with y fixed to [0, 1].
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace ecaml::tools
