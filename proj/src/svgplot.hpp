#pragma once

#include <string>
#include <vector>

namespace oculorl::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional shaded band; empty or the same length as y.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Standalone SVG document with axes, ticks, bands, lines and a legend.
std::string render(const Plot& plot);

}  // namespace oculorl::svg
