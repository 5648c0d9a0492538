// Copyright 2026 The ContFormer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "contformer/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace contformer {

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
  const double W = 720, H = 480;
  const double ml = 70, mr = 150, mt = 40, mb = 55;  // margins
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        any = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ostringstream out;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title
      << "</text>\n";

  // axes with 5 ticks per side
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    out << "<line x1=\"" << px(xv) << "\" y1=\"" << H - mb << "\" x2=\""
        << px(xv) << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << std::setprecision(4) << xv << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml
        << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 9 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << std::setprecision(4) << yv << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\" transform=\"rotate(-90 18 " << (mt + H - mb) / 2
      << ")\">" << y_label << "</text>\n";

  double legend_y = mt + 8;
  for (const auto& s : series) {
    if (!s.x.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << px(s.x[i]) << "," << py(s.y[i]) << " ";
      out << "\"/>\n";
    }
    out << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << legend_y << "\" x2=\""
        << W - mr + 34 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - mr + 40 << "\" y=\"" << legend_y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
    legend_y += 20;
  }
  out << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write plot " + path);
  f << out.str();
}

void write_svg_heatmap(const std::string& path, const std::string& title,
                       const std::vector<double>& values, std::int64_t rows,
                       std::int64_t cols,
                       const std::vector<std::string>& col_labels,
                       std::int64_t highlight_row) {
  if (rows <= 0 || cols <= 0 ||
      static_cast<std::int64_t>(values.size()) != rows * cols)
    throw std::invalid_argument("heatmap shape mismatch");
  const double cell = 26, ml = 60, mt = 46, mb = 70, mr = 20;
  const double W = ml + cell * cols + mr;
  const double H = mt + cell * rows + mb;
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1;

  std::ostringstream out;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << title
      << "</text>\n";
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const double t = (values[r * cols + c] - lo) / (hi - lo);
      const int red = static_cast<int>(255 * t);
      const int blue = static_cast<int>(255 * (1 - t));
      out << "<rect x=\"" << ml + c * cell << "\" y=\"" << mt + r * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << "rgb(" << red << ",40," << blue << ")\"/>\n";
    }
    out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + r * cell + cell / 2 + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">q" << r << "</text>\n";
  }
  if (highlight_row >= 0 && highlight_row < rows)
    out << "<rect x=\"" << ml << "\" y=\"" << mt + highlight_row * cell
        << "\" width=\"" << cell * cols << "\" height=\"" << cell
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2.5\"/>\n";
  for (std::int64_t c = 0;
       c < cols && c < static_cast<std::int64_t>(col_labels.size()); ++c) {
    const double cx = ml + c * cell + cell / 2;
    const double cy = mt + rows * cell + 12;
    out << "<text x=\"" << cx << "\" y=\"" << cy
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\""
        << " transform=\"rotate(-55 " << cx << " " << cy << ")\">"
        << col_labels[c] << "</text>\n";
  }
  out << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write heatmap " + path);
  f << out.str();
}

}  // namespace contformer
