#pragma once

#include <string>
#include <vector>

namespace gradlab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct FigureSpec {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  bool log_y = true;  // nonpositive values are skipped on a log axis
};

// Writes a self-contained SVG figure plus a plain-text data file
// (<path>.dat) holding the plotted series. Output bytes are deterministic.
void emit_figure(const std::string& svg_path, const FigureSpec& spec,
                 const std::vector<PlotSeries>& series);

}  // namespace gradlab
