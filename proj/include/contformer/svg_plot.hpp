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

#ifndef CONTFORMER_SVG_PLOT_HPP_
#define CONTFORMER_SVG_PLOT_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace contformer {

// Minimal static line-chart renderer for experiment outputs.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
};

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series);

// Colored cell grid for similarity matrices. `values` is row-major with
// `cols` entries per row; `highlight_row` (when >= 0) gets an outline.
void write_svg_heatmap(const std::string& path, const std::string& title,
                       const std::vector<double>& values, std::int64_t rows,
                       std::int64_t cols,
                       const std::vector<std::string>& col_labels,
                       std::int64_t highlight_row);

}  // namespace contformer

#endif  // CONTFORMER_SVG_PLOT_HPP_
