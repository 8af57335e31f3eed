#pragma once

// Minimal standalone SVG charts: line plots (learning curves, ROC) and grouped bars.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace fcntag::eval::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Axes {
  std::string title, x_label, y_label;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
};

namespace detail {

inline constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % 10];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

struct Frame {
  Axes axes;
  double px(double x) const {
    return kLeft + (x - axes.x_min) / (axes.x_max - axes.x_min) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - axes.y_min) / (axes.y_max - axes.y_min) * (kHeight - kTop - kBottom);
  }
};

inline std::string open(const Frame& f, bool x_ticks = true) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(f.axes.title) + "</text>\n";
  const double x0 = f.px(f.axes.x_min), x1 = f.px(f.axes.x_max), y0 = f.py(f.axes.y_min), y1 = f.py(f.axes.y_max);
  s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" + num(y0 - y1) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double yv = f.axes.y_min + (f.axes.y_max - f.axes.y_min) * i / 5.0;
    s += "<line x1=\"" + num(x0) + "\" x2=\"" + num(x1) + "\" y1=\"" + num(f.py(yv)) + "\" y2=\"" + num(f.py(yv)) +
         "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + tick_label(yv) +
         "</text>\n";
    if (x_ticks) {
      double xv = f.axes.x_min + (f.axes.x_max - f.axes.x_min) * i / 5.0;
      s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + tick_label(xv) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
       escape(f.axes.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num((y0 + y1) / 2) + ")\">" + escape(f.axes.y_label) + "</text>\n";
  return s;
}

inline std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    double y = kTop + 14 + 18.0 * double(i);
    s += "<rect x=\"" + num(kWidth - kRight + 14) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
         color(i) + "\"/>\n";
    s += "<text x=\"" + num(kWidth - kRight + 32) + "\" y=\"" + num(y + 1) + "\">" + escape(names[i]) + "</text>\n";
  }
  return s;
}

}  // namespace detail

/// Line chart; pass `fit_y` to widen the y range around the data.
inline std::string line_chart(Axes axes, const std::vector<Series>& series, bool fit_y = false) {
  if (fit_y) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series)
      for (auto [x, y] : s.points) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    if (lo <= hi) {
      double pad = std::max(0.02, 0.05 * (hi - lo));
      axes.y_min = lo - pad;
      axes.y_max = hi + pad;
    }
  }
  if (axes.x_max <= axes.x_min) axes.x_max = axes.x_min + 1;
  if (axes.y_max <= axes.y_min) axes.y_max = axes.y_min + 1;
  detail::Frame f{axes};
  std::string s = detail::open(f);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].name);
    std::string pts;
    for (auto [x, y] : series[i].points) pts += detail::num(f.px(x)) + "," + detail::num(f.py(y)) + " ";
    s += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(detail::color(i)) + "\" points=\"" + pts +
         "\"/>\n";
  }
  s += detail::legend(names);
  return s + "</svg>\n";
}

/// Grouped bar chart: one group per category, one bar per series.
inline std::string bar_chart(Axes axes, const std::vector<std::string>& categories,
                             const std::vector<std::pair<std::string, std::vector<double>>>& groups) {
  axes.x_min = 0;
  axes.x_max = double(categories.size());
  double hi = 0;
  for (const auto& [name, vals] : groups)
    for (double v : vals) hi = std::max(hi, v);
  axes.y_min = 0;
  axes.y_max = hi > 0 ? hi * 1.1 : 1;
  detail::Frame f{axes};
  std::string s = detail::open(f, false);
  const double slot = f.px(1) - f.px(0);
  const double bar = 0.8 * slot / double(std::max<std::size_t>(groups.size(), 1));
  std::vector<std::string> names;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    names.push_back(groups[g].first);
    for (std::size_t c = 0; c < categories.size() && c < groups[g].second.size(); ++c) {
      double v = groups[g].second[c];
      double x = f.px(double(c)) + 0.1 * slot + bar * double(g);
      s += "<rect x=\"" + detail::num(x) + "\" y=\"" + detail::num(f.py(v)) + "\" width=\"" + detail::num(bar) +
           "\" height=\"" + detail::num(f.py(0) - f.py(v)) + "\" fill=\"" + detail::color(g) + "\"/>\n";
    }
  }
  for (std::size_t c = 0; c < categories.size(); ++c)
    s += "<text x=\"" + detail::num(f.px(c + 0.5)) + "\" y=\"" + detail::num(f.py(0) + 16) +
         "\" text-anchor=\"middle\">" + detail::escape(categories[c]) + "</text>\n";
  s += detail::legend(names);
  return s + "</svg>\n";
}

}  // namespace fcntag::eval::svg
