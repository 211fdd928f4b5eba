// Copyright 2026 The cpwloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CPWLOSS_SVGPLOT_HPP_
#define CPWLOSS_SVGPLOT_HPP_

#include <optional>
#include <string>
#include <vector>

namespace cpwloss::io {

// Minimal self-contained SVG 1.1 chart writer: log-log axes, an optional
// secondary (right) log axis, polyline series, an optional shaded band and a
// vertical marker line.
struct SvgSeries {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;  // x, y (> 0 for log axes)
  bool right_axis = false;
};

struct SvgBand {
  std::string color;  // fill
  std::vector<std::pair<double, double>> upper;  // x ascending
  std::vector<std::pair<double, double>> lower;
  bool right_axis = false;
};

struct SvgPlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string y2_label;
  std::vector<SvgSeries> series;
  std::optional<SvgBand> band;
  std::optional<double> vline;  // x position, annotated dashed line
  bool log_x = true;
  bool log_y = true;
};

std::string render_svg(const SvgPlotSpec& spec);

}  // namespace cpwloss::io

#endif  // CPWLOSS_SVGPLOT_HPP_
