#pragma once

#include <string>
#include <vector>

namespace umae::lab {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// A plain line chart: axes with five ticks each, one polyline per series and
/// a legend. Non-finite points are dropped. Output depends only on the input.
std::string render_svg(const LinePlot& plot);

}  // namespace umae::lab
