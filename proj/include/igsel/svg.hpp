#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "igsel/csv.hpp"

namespace igsel::svg {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string num(double v) { return format_fixed(v, 2); }

/// Cartesian plot area with linear axes; callers add marks in data units.
class Plot {
public:
  Plot(double width, double height, double x_min, double x_max, double y_min, double y_max)
      : width_(width), height_(height), x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
    if (!(x_max_ > x_min_)) x_max_ = x_min_ + 1.0;
    if (!(y_max_ > y_min_)) y_max_ = y_min_ + 1.0;
  }

  double px(double x) const { return left_ + (x - x_min_) / (x_max_ - x_min_) * (width_ - left_ - right_); }
  double py(double y) const { return height_ - bottom_ - (y - y_min_) / (y_max_ - y_min_) * (height_ - top_ - bottom_); }

  void title(const std::string& t) { title_ = t; }
  void labels(const std::string& x, const std::string& y) {
    x_label_ = x;
    y_label_ = y;
  }

  void circle(double x, double y, double r, const std::string& fill, double opacity = 1.0) {
    body_ << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"" << num(r) << "\" fill=\"" << fill
          << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
  }

  void line(double x0, double y0, double x1, double y1, const std::string& stroke, double w = 1.0,
            const std::string& dash = "") {
    body_ << "<line x1=\"" << num(px(x0)) << "\" y1=\"" << num(py(y0)) << "\" x2=\"" << num(px(x1)) << "\" y2=\""
          << num(py(y1)) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w) << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << "/>\n";
  }

  /// Vertical bar from y=0 to y, centred on x with the given data-unit width.
  void bar(double x, double bar_width, double y, const std::string& fill, double opacity = 1.0) {
    const double x0 = px(x - bar_width / 2), x1 = px(x + bar_width / 2);
    const double ya = py(std::max(0.0, y)), yb = py(std::min(0.0, y));
    body_ << "<rect x=\"" << num(x0) << "\" y=\"" << num(ya) << "\" width=\"" << num(std::max(0.0, x1 - x0))
          << "\" height=\"" << num(std::max(0.0, yb - ya)) << "\" fill=\"" << fill << "\" fill-opacity=\"" << num(opacity)
          << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", double size = 10) {
    body_ << "<text x=\"" << num(px(x)) << "\" y=\"" << num(py(y)) << "\" font-size=\"" << num(size)
          << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries) { legend_ = entries; }

  /// Replaces the numeric x ticks with labelled categories.
  void x_categories(const std::vector<std::pair<double, std::string>>& ticks) { x_categories_ = ticks; }

  std::string render(int x_ticks = 5, int y_ticks = 5) const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double ax0 = left_, ax1 = width_ - right_, ay0 = height_ - bottom_, ay1 = top_;
    out << "<line x1=\"" << num(ax0) << "\" y1=\"" << num(ay0) << "\" x2=\"" << num(ax1) << "\" y2=\"" << num(ay0)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(ax0) << "\" y1=\"" << num(ay0) << "\" x2=\"" << num(ax0) << "\" y2=\"" << num(ay1)
        << "\" stroke=\"black\"/>\n";
    if (x_categories_.empty()) {
      for (double v : nice_ticks(x_min_, x_max_, x_ticks)) {
        out << "<text x=\"" << num(px(v)) << "\" y=\"" << num(ay0 + 14) << "\" font-size=\"9\" text-anchor=\"middle\">"
            << tick(v) << "</text>\n";
      }
    } else {
      for (const auto& [v, label] : x_categories_) {
        out << "<text x=\"" << num(px(v)) << "\" y=\"" << num(ay0 + 14) << "\" font-size=\"9\" text-anchor=\"middle\">"
            << escape(label) << "</text>\n";
      }
    }
    for (double v : nice_ticks(y_min_, y_max_, y_ticks)) {
      out << "<text x=\"" << num(ax0 - 4) << "\" y=\"" << num(py(v) + 3) << "\" font-size=\"9\" text-anchor=\"end\">"
          << tick(v) << "</text>\n";
      out << "<line x1=\"" << num(ax0) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(ax1) << "\" y2=\"" << num(py(v))
          << "\" stroke=\"#e5e5e5\"/>\n";
    }
    out << body_.str();
    if (!title_.empty()) {
      out << "<text x=\"" << num(width_ / 2) << "\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">" << escape(title_)
          << "</text>\n";
    }
    out << "<text x=\"" << num((ax0 + ax1) / 2) << "\" y=\"" << num(height_ - 8)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(x_label_) << "</text>\n";
    out << "<text x=\"14\" y=\"" << num((ay0 + ay1) / 2) << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << num((ay0 + ay1) / 2) << ")\">" << escape(y_label_) << "</text>\n";
    for (std::size_t i = 0; i < legend_.size(); ++i) {
      const double y = top_ + 6 + 14.0 * static_cast<double>(i);
      out << "<rect x=\"" << num(ax1 - 120) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
          << legend_[i].second << "\"/>\n";
      out << "<text x=\"" << num(ax1 - 106) << "\" y=\"" << num(y + 9) << "\" font-size=\"10\">" << escape(legend_[i].first)
          << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
  }

  /// Round-numbered ticks inside [lo, hi], roughly n of them.
  static std::vector<double> nice_ticks(double lo, double hi, int n) {
    const double raw = (hi - lo) / std::max(1, n);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
      step = f * mag;
      if (step >= raw) break;
    }
    std::vector<double> out;
    for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }

private:
  static std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }

  double width_, height_, x_min_, x_max_, y_min_, y_max_;
  double left_ = 60, right_ = 20, top_ = 30, bottom_ = 40;
  std::string title_, x_label_, y_label_;
  std::vector<std::pair<std::string, std::string>> legend_;
  std::vector<std::pair<double, std::string>> x_categories_;
  std::ostringstream body_;
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors;
}

}  // namespace igsel::svg
