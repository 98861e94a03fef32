#include "gradlab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "gradlab/trace_io.hpp"

namespace gradlab {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string tick_label(double v, bool log_axis) {
  char buf[32];
  if (log_axis) {
    std::snprintf(buf, sizeof(buf), "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  }
  return buf;
}

}  // namespace

void emit_figure(const std::string& svg_path, const FigureSpec& spec,
                 const std::vector<PlotSeries>& series) {
  // Data sidecar first: one block per series.
  {
    std::ofstream dat(svg_path + ".dat", std::ios::binary);
    if (!dat) throw std::runtime_error("cannot open for writing: " + svg_path + ".dat");
    dat << "# " << spec.title << "\n";
    for (const auto& s : series) {
      dat << "# series: " << s.label << "\n";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        dat << format_double(s.x[i]) << ' ' << format_double(s.y[i]) << '\n';
      dat << "\n";
    }
  }

  // Collect plottable points (finite; positive when the y-axis is log).
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (spec.log_y && y <= 0.0) continue;
      const double yv = spec.log_y ? std::log10(y) : y;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
      any = true;
    }
  }
  if (!any) {
    xmin = 0.0; xmax = 1.0; ymin = spec.log_y ? -1.0 : 0.0; ymax = spec.log_y ? 0.0 : 1.0;
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double yv) { return kTop + (ymax - yv) / (ymax - ymin) * ph; };

  std::ofstream svg(svg_path, std::ios::binary);
  if (!svg) throw std::runtime_error("cannot open for writing: " + svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">" << spec.title << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Y ticks: decades on a log axis, five even ticks otherwise.
  if (spec.log_y) {
    const int lo = static_cast<int>(std::ceil(ymin - 1e-9));
    const int hi = static_cast<int>(std::floor(ymax + 1e-9));
    for (int e = lo; e <= hi; ++e) {
      const double y = py(e);
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y) << "\" x2=\"" << kLeft + pw
          << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
      svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4)
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
          << tick_label(e, true) << "</text>\n";
    }
  } else {
    for (int k = 0; k <= 4; ++k) {
      const double yv = ymin + (ymax - ymin) * k / 4.0;
      const double y = py(yv);
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y) << "\" x2=\"" << kLeft + pw
          << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
      svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4)
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
          << tick_label(yv, false) << "</text>\n";
    }
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double x = px(xv);
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(xv)
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << spec.x_label
      << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">" << spec.y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (spec.log_y && y <= 0.0) continue;
      if (!first) svg << ' ';
      svg << fmt(px(s.x[i])) << ',' << fmt(py(spec.log_y ? std::log10(y) : y));
      first = false;
    }
    svg << "\"/>\n";
    // Legend entry.
    const double ly = kTop + 14 + 16 * static_cast<double>(si);
    svg << "<line x1=\"" << kLeft + pw - 150 << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
        << kLeft + pw - 130 << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + pw - 125 << "\" y=\"" << fmt(ly)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  if (!svg) throw std::runtime_error("write failed: " + svg_path);
}

}  // namespace gradlab
