#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "frontcast/errors.hpp"

namespace frontcast {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = false;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// A "nice" tick step of roughly (hi-lo)/5.
inline double nice_step(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  if (raw <= 0.0) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double step = 10.0;
  if (frac <= 1.5) step = 1.0;
  else if (frac <= 3.0) step = 2.0;
  else if (frac <= 7.0) step = 5.0;
  return step * mag;
}

}  // namespace detail

/// Writes a minimal multi-series line plot. Enough for observed-vs-predicted
/// panels, mode traces and SD profiles; not a charting library.
inline void write_line_svg(const std::string& path, const std::string& title,
                           const std::vector<PlotSeries>& series, int width = 880,
                           int height = 420) {
  if (series.empty()) throw ConfigError("plot: no series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("plot: x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmin > xmax) throw ConfigError("plot: empty series");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymax = ymin + 1.0;
    ymin -= 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double ml = 64, mr = 16, mt = 36, mb = 40;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' font-family='sans-serif' font-size='12'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";

  const double xstep = detail::nice_step(xmin, xmax);
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9; t += xstep) {
    out << "<line x1='" << detail::svg_num(sx(t)) << "' y1='" << detail::svg_num(mt) << "' x2='"
        << detail::svg_num(sx(t)) << "' y2='" << detail::svg_num(mt + ph)
        << "' stroke='#eeeeee'/>\n";
    out << "<text x='" << detail::svg_num(sx(t)) << "' y='" << detail::svg_num(mt + ph + 16)
        << "' text-anchor='middle'>" << detail::tick_label(t) << "</text>\n";
  }
  const double ystep = detail::nice_step(ymin, ymax);
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9; t += ystep) {
    out << "<line x1='" << detail::svg_num(ml) << "' y1='" << detail::svg_num(sy(t)) << "' x2='"
        << detail::svg_num(ml + pw) << "' y2='" << detail::svg_num(sy(t))
        << "' stroke='#eeeeee'/>\n";
    out << "<text x='" << detail::svg_num(ml - 6) << "' y='" << detail::svg_num(sy(t) + 4)
        << "' text-anchor='end'>" << detail::tick_label(t) << "</text>\n";
  }
  out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
      << "' fill='none' stroke='#444444'/>\n";

  for (const auto& s : series) {
    if (s.x.size() > 1) {
      out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << detail::svg_num(sx(s.x[i])) << ',' << detail::svg_num(sy(s.y[i])) << ' ';
      }
      out << "'/>\n";
    }
    if (s.markers || s.x.size() == 1) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << "<circle cx='" << detail::svg_num(sx(s.x[i])) << "' cy='"
            << detail::svg_num(sy(s.y[i])) << "' r='2.5' fill='" << s.color << "'/>\n";
      }
    }
  }

  double lx = ml + 10, ly = mt + 14;
  for (const auto& s : series) {
    out << "<line x1='" << lx << "' y1='" << ly - 4 << "' x2='" << lx + 18 << "' y2='" << ly - 4
        << "' stroke='" << s.color << "' stroke-width='2'/>\n";
    out << "<text x='" << lx + 24 << "' y='" << ly << "'>" << s.name << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace frontcast
