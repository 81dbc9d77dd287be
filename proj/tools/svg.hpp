#pragma once

#include <string>
#include <vector>

#include "carl/moments.hpp"

namespace carl::svg {

struct Series {
  std::string name;
  std::vector<Maybe> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "tau";
  bool log_y = false;
  int width = 800;
  int height = 500;
};

/// Self-contained SVG line plot of several series against a shared x axis.
/// UNDEFINED points (and non-positive points on a log axis) break the line.
std::string line_plot(const std::vector<double>& x, const std::vector<Series>& series,
                      const PlotOptions& options);

}  // namespace carl::svg
