#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pmap::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "#1f77b4";
  bool points = true;   // markers
  bool line = false;    // polyline through the points
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 480;
  bool equal_aspect = false;
};

/// Renders the series on linear axes with ticks and an optional legend.
std::string render(const PlotSpec& spec, const std::vector<Series>& series);

void write(const std::filesystem::path& path, const PlotSpec& spec,
           const std::vector<Series>& series);

} // namespace pmap::svg
