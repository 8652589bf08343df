/*
 Copyright 2026 flexmpc contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "flexmpc/common.hpp"

namespace flexmpc {

/// One polyline of a chart. Dashed series render with a dash pattern (used
/// for discarded prediction tails).
struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Renders series as a fixed-size line chart. Pure function of its inputs:
/// identical data yields an identical document.
inline std::string render_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                                     const std::string& x_label, const std::string& y_label) {
  constexpr int W = 860, H = 520;
  constexpr int ML = 70, MR = 170, MT = 40, MB = 50;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                           "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmin < xmax)) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (!(ymin < ymax)) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto py = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };

  std::string doc;
  doc += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) + "\" height=\"" +
         std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " + std::to_string(H) +
         "\">\n";
  doc += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  doc += "<text x=\"" + std::to_string(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" + title + "</text>\n";

  // Axes with five ticks each.
  doc += "<g stroke=\"#333\" stroke-width=\"1\" font-size=\"11\" font-family=\"sans-serif\">\n";
  doc += "<line x1=\"" + std::to_string(ML) + "\" y1=\"" + std::to_string(H - MB) + "\" x2=\"" +
         std::to_string(W - MR) + "\" y2=\"" + std::to_string(H - MB) + "\"/>\n";
  doc += "<line x1=\"" + std::to_string(ML) + "\" y1=\"" + std::to_string(MT) + "\" x2=\"" +
         std::to_string(ML) + "\" y2=\"" + std::to_string(H - MB) + "\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    doc += "<text x=\"" + detail::svg_num(px(xv)) + "\" y=\"" + std::to_string(H - MB + 16) +
           "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#333\">" + detail::svg_num(xv) +
           "</text>\n";
    doc += "<text x=\"" + std::to_string(ML - 6) + "\" y=\"" + detail::svg_num(py(yv) + 4) +
           "\" text-anchor=\"end\" stroke=\"none\" fill=\"#333\">" + detail::svg_num(yv) +
           "</text>\n";
    doc += "<line x1=\"" + detail::svg_num(px(xv)) + "\" y1=\"" + std::to_string(H - MB) +
           "\" x2=\"" + detail::svg_num(px(xv)) + "\" y2=\"" + std::to_string(H - MB + 4) + "\"/>\n";
  }
  doc += "</g>\n";
  doc += "<text x=\"" + std::to_string((W - MR + ML) / 2) + "\" y=\"" + std::to_string(H - 12) +
         "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" + x_label +
         "</text>\n";
  doc += "<text x=\"18\" y=\"" + std::to_string((H - MB + MT) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 "
         "18 " + std::to_string((H - MB + MT) / 2) + ")\">" + y_label + "</text>\n";

  int color = 0;
  int legend_y = MT + 10;
  int legend_color = 0;
  for (const auto& s : series) {
    const char* stroke = palette[color % 8];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      points += detail::svg_num(px(s.x[i]));
      points += ',';
      points += detail::svg_num(py(s.y[i]));
      points += ' ';
    }
    doc += "<polyline fill=\"none\" stroke=\"";
    doc += stroke;
    doc += "\" stroke-width=\"1.6\"";
    if (s.dashed) doc += " stroke-dasharray=\"5,4\" opacity=\"0.55\"";
    doc += " points=\"" + points + "\"/>\n";
    ++color;
  }
  for (const auto& s : series) {
    if (s.name.empty()) {
      ++legend_color;
      continue;
    }
    const char* stroke = palette[legend_color % 8];
    doc += "<line x1=\"" + std::to_string(W - MR + 12) + "\" y1=\"" + std::to_string(legend_y) +
           "\" x2=\"" + std::to_string(W - MR + 34) + "\" y2=\"" + std::to_string(legend_y) +
           "\" stroke=\"";
    doc += stroke;
    doc += "\" stroke-width=\"2\"";
    if (s.dashed) doc += " stroke-dasharray=\"5,4\"";
    doc += "/>\n";
    doc += "<text x=\"" + std::to_string(W - MR + 40) + "\" y=\"" + std::to_string(legend_y + 4) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + s.name + "</text>\n";
    legend_y += 18;
    ++legend_color;
  }
  doc += "</svg>\n";
  return doc;
}

inline void write_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg: cannot open " + path);
  out << render_line_chart(series, title, x_label, y_label);
}

}  // namespace flexmpc
