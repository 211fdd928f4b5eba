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

#include "cpwloss/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpwloss/csvio.hpp"
#include "cpwloss/error.hpp"

namespace cpwloss::io {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0, kRight = 80.0, kTop = 48.0, kBottom = 64.0;

struct AxisRange {
  double lo = 0.0, hi = 1.0;
  bool log = true;

  double map(double v, double a, double b) const {
    double t;
    if (log) {
      t = (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    } else {
      t = (v - lo) / (hi - lo);
    }
    return a + t * (b - a);
  }
};

AxisRange fit_range(std::vector<double> vals, bool log) {
  AxisRange r;
  r.log = log;
  vals.erase(std::remove_if(vals.begin(), vals.end(),
                            [&](double v) { return log ? !(v > 0.0) : !std::isfinite(v); }),
             vals.end());
  if (vals.empty()) throw config_error("svg plot: no plottable values");
  const double lo = *std::min_element(vals.begin(), vals.end());
  const double hi = *std::max_element(vals.begin(), vals.end());
  if (log) {
    r.lo = std::pow(10.0, std::floor(std::log10(lo)));
    r.hi = std::pow(10.0, std::ceil(std::log10(hi)));
    if (r.lo == r.hi) r.hi *= 10.0;
  } else {
    const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(1.0, std::fabs(hi));
    r.lo = lo - pad;
    r.hi = hi + pad;
  }
  return r;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out.push_back(c);
  }
  return out;
}

std::string tick_label(double v) {
  const double l = std::log10(v);
  const double rounded = std::round(l);
  if (std::fabs(l - rounded) < 1e-9) {
    return "1e" + std::to_string(static_cast<int>(rounded));
  }
  return fmt_sig(v, 3);
}

}  // namespace

std::string render_svg(const SvgPlotSpec& spec) {
  std::vector<double> xs, ys_l, ys_r;
  auto feed = [&](const std::vector<std::pair<double, double>>& pts, bool right) {
    for (const auto& [x, y] : pts) {
      xs.push_back(x);
      (right ? ys_r : ys_l).push_back(y);
    }
  };
  for (const auto& s : spec.series) feed(s.points, s.right_axis);
  if (spec.band) {
    feed(spec.band->upper, spec.band->right_axis);
    feed(spec.band->lower, spec.band->right_axis);
  }
  if (spec.vline) xs.push_back(*spec.vline);
  if (xs.empty() || ys_l.empty()) {
    throw config_error("svg plot: nothing to plot on the left axis");
  }

  const AxisRange rx = fit_range(xs, spec.log_x);
  const AxisRange ry = fit_range(ys_l, spec.log_y);
  const bool has_right = !ys_r.empty();
  const AxisRange ry2 = has_right ? fit_range(ys_r, spec.log_y) : ry;

  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;  // svg y grows downward

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
     << kWidth << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth
     << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">"
     << esc(spec.title) << "</text>\n";

  // Frame.
  os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << (x1 - x0)
     << "\" height=\"" << (y0 - y1)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

  auto decade_ticks = [&](const AxisRange& r) {
    std::vector<double> ticks;
    if (!r.log) return ticks;
    double v = r.lo;
    for (int guard = 0; guard < 64 && v <= r.hi * 1.0000001; ++guard) {
      ticks.push_back(v);
      v *= 10.0;
    }
    return ticks;
  };

  for (double t : decade_ticks(rx)) {
    const double px = rx.map(t, x0, x1);
    os << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px
       << "\" y2=\"" << y0 + 6 << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << px << "\" y1=\"" << y1 << "\" x2=\"" << px
       << "\" y2=\"" << y0 << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << y0 + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(t) << "</text>\n";
  }
  for (double t : decade_ticks(ry)) {
    const double py = ry.map(t, y0, y1);
    os << "<line x1=\"" << x0 - 6 << "\" y1=\"" << py << "\" x2=\"" << x0
       << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1
       << "\" y2=\"" << py << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    os << "<text x=\"" << x0 - 10 << "\" y=\"" << py + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << tick_label(t) << "</text>\n";
  }
  if (has_right) {
    for (double t : decade_ticks(ry2)) {
      const double py = ry2.map(t, y0, y1);
      os << "<line x1=\"" << x1 << "\" y1=\"" << py << "\" x2=\"" << x1 + 6
         << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << x1 + 10 << "\" y=\"" << py + 4
         << "\" text-anchor=\"start\" font-family=\"sans-serif\" "
            "font-size=\"11\">"
         << tick_label(t) << "</text>\n";
    }
  }

  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 16
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << esc(spec.x_label) << "</text>\n";
  os << "<text x=\"20\" y=\"" << (y0 + y1) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        "transform=\"rotate(-90 20 "
     << (y0 + y1) / 2 << ")\">" << esc(spec.y_label) << "</text>\n";
  if (has_right && !spec.y2_label.empty()) {
    os << "<text x=\"" << kWidth - 20 << "\" y=\"" << (y0 + y1) / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\" transform=\"rotate(90 "
       << kWidth - 20 << ' ' << (y0 + y1) / 2 << ")\">" << esc(spec.y2_label)
       << "</text>\n";
  }

  auto path_of = [&](const std::vector<std::pair<double, double>>& pts,
                     const AxisRange& yr) {
    std::ostringstream p;
    bool first = true;
    for (const auto& [x, y] : pts) {
      if (spec.log_x && !(x > 0.0)) continue;
      if (spec.log_y && !(y > 0.0)) continue;
      p << (first ? 'M' : 'L') << fmt_sig(rx.map(x, x0, x1), 8) << ' '
        << fmt_sig(yr.map(y, y0, y1), 8);
      first = false;
    }
    return p.str();
  };

  if (spec.band) {
    const AxisRange& yr = spec.band->right_axis ? ry2 : ry;
    std::vector<std::pair<double, double>> loop = spec.band->upper;
    for (auto it = spec.band->lower.rbegin(); it != spec.band->lower.rend(); ++it) {
      loop.push_back(*it);
    }
    os << "<path d=\"" << path_of(loop, yr) << " Z\" fill=\"" << spec.band->color
       << "\" fill-opacity=\"0.35\" stroke=\"none\"/>\n";
  }

  for (const auto& s : spec.series) {
    const AxisRange& yr = s.right_axis ? ry2 : ry;
    os << "<path d=\"" << path_of(s.points, yr) << "\" fill=\"none\" stroke=\""
       << s.color << "\" stroke-width=\"1.8\"/>\n";
  }

  if (spec.vline) {
    const double px = rx.map(*spec.vline, x0, x1);
    os << "<line x1=\"" << px << "\" y1=\"" << y1 << "\" x2=\"" << px
       << "\" y2=\"" << y0
       << "\" stroke=\"#3366cc\" stroke-width=\"1.2\" "
          "stroke-dasharray=\"6 4\"/>\n";
  }

  double ly = y1 + 16;
  for (const auto& s : spec.series) {
    os << "<line x1=\"" << x0 + 12 << "\" y1=\"" << ly << "\" x2=\"" << x0 + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << s.color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << x0 + 46 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(s.name)
       << (s.right_axis ? " (right)" : "") << "</text>\n";
    ly += 16;
  }

  os << "</svg>\n";
  return os.str();
}

}  // namespace cpwloss::io
