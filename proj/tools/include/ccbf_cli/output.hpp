#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ccbf/scenarios.hpp"

namespace ccbf::cli {

// Column header, one row per record, %.9g floats.
std::vector<std::string> csv_header(const SimLog& log);
void write_csv(std::ostream& os, const SimLog& log);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<double> hlines;      // dotted reference levels
  std::vector<Circle> circles;     // drawn in data coordinates
  bool equal_aspect = false;
};

// Self-contained SVG, viewBox 0 0 800 500. NaN samples break the polyline.
std::string render_svg(const Plot& plot);

// Per-run figures derived from the log alone.
Plot states_plot(const SimLog& log);
Plot controls_plot(const SimLog& log);
Plot weights_plot(const SimLog& log);
Plot barrier_plot(const SimLog& log);   // H, b_ccbf and every h_i

}  // namespace ccbf::cli
