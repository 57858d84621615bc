#pragma once

// Minimal static SVG charts. Output depends only on the inputs: fixed canvas,
// fixed palette, fixed number formatting, no timestamps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "logitreg/errors.hpp"
#include "logitreg/io.hpp"
#include "logitreg/trainer.hpp"

namespace logitreg::svg {

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  enum class Style { line, markers, bars };
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  Style style = Style::line;
  std::vector<int> groups;  // markers only: color index per point
};

struct Axis {
  std::string label;
  bool log = false;
  std::optional<double> lo, hi;
};

class Chart {
 public:
  Chart(std::string title, Axis x, Axis y) : title_(std::move(title)), x_(std::move(x)), y_(std::move(y)) {}

  Chart& add(Series s) {
    if (s.x.size() != s.y.size()) throw ContractError("series '" + s.name + "' has mismatched lengths");
    series_.push_back(std::move(s));
    return *this;
  }
  Chart& hline(double y, std::string label) {
    hlines_.emplace_back(y, std::move(label));
    return *this;
  }

  std::string render() const {
    if (series_.empty()) throw ContractError("chart has no series");
    auto [x0, x1] = range(x_, true);
    auto [y0, y1] = range(y_, false);
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
           "\" viewBox=\"0 0 " + fmt(kW) + " " + fmt(kH) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += text(kW / 2, 22, title_, "middle", 15);
    out += "<rect x=\"" + fmt(kL) + "\" y=\"" + fmt(kT) + "\" width=\"" + fmt(kW - kL - kR) + "\" height=\"" +
           fmt(kH - kT - kB) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    auto px = [&](double v) { return kL + (tx(v, x_) - x0) / (x1 - x0) * (kW - kL - kR); };
    auto py = [&](double v) { return kH - kB - (tx(v, y_) - y0) / (y1 - y0) * (kH - kT - kB); };
    for (int i = 0; i <= 5; ++i) {
      const double fx = x0 + (x1 - x0) * i / 5.0, fy = y0 + (y1 - y0) * i / 5.0;
      const double sx = kL + (kW - kL - kR) * i / 5.0, sy = kH - kB - (kH - kT - kB) * i / 5.0;
      out += line(sx, kH - kB, sx, kH - kB + 5, "#333");
      out += text(sx, kH - kB + 18, tick(untx(fx, x_)), "middle", 11);
      out += line(kL - 5, sy, kL, sy, "#333");
      out += text(kL - 8, sy + 4, tick(untx(fy, y_)), "end", 11);
    }
    out += text(kW / 2, kH - 12, x_.label, "middle", 13);
    out += "<text x=\"16\" y=\"" + fmt(kH / 2) + "\" text-anchor=\"middle\" font-size=\"13\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 16 " + fmt(kH / 2) + ")\">" + escape(y_.label) +
           "</text>\n";
    for (const auto& [v, label] : hlines_) {
      out += "<line x1=\"" + fmt(kL) + "\" y1=\"" + fmt(py(v)) + "\" x2=\"" + fmt(kW - kR) + "\" y2=\"" +
             fmt(py(v)) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
      out += text(kW - kR - 4, py(v) - 4, label, "end", 10);
    }
    out += "<defs><clipPath id=\"plot\"><rect x=\"" + fmt(kL) + "\" y=\"" + fmt(kT) + "\" width=\"" +
           fmt(kW - kL - kR) + "\" height=\"" + fmt(kH - kT - kB) + "\"/></clipPath></defs>\n";
    out += "<g clip-path=\"url(#plot)\">\n";
    for (std::size_t s = 0; s < series_.size(); ++s) {
      const Series& se = series_[s];
      const char* color = kPalette[s % kPalette.size()];
      if (se.style == Series::Style::line) {
        std::string pts;
        for (std::size_t i = 0; i < se.x.size(); ++i) {
          if (!finite_on(se.x[i], x_) || !finite_on(se.y[i], y_)) continue;
          if (!pts.empty()) pts += ' ';
          pts += fmt(px(se.x[i])) + "," + fmt(py(se.y[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
               pts + "\"/>\n";
      } else if (se.style == Series::Style::markers) {
        for (std::size_t i = 0; i < se.x.size(); ++i) {
          if (!finite_on(se.x[i], x_) || !finite_on(se.y[i], y_)) continue;
          const char* c = se.groups.empty() ? color : kPalette[static_cast<std::size_t>(se.groups[i]) % kPalette.size()];
          out += "<circle cx=\"" + fmt(px(se.x[i])) + "\" cy=\"" + fmt(py(se.y[i])) + "\" r=\"2.5\" fill=\"" +
                 std::string(c) + "\" fill-opacity=\"0.7\"/>\n";
        }
      } else {
        const double base = py(y_.log ? untx(y0, y_) : std::max(0.0, untx(y0, y_)));
        const double w = se.x.size() > 1 ? std::abs(px(se.x[1]) - px(se.x[0])) : 10.0;
        for (std::size_t i = 0; i < se.x.size(); ++i) {
          if (!finite_on(se.x[i], x_) || !finite_on(se.y[i], y_)) continue;
          const double top = py(se.y[i]);
          out += "<rect x=\"" + fmt(px(se.x[i]) - w / 2) + "\" y=\"" + fmt(std::min(top, base)) + "\" width=\"" +
                 fmt(w) + "\" height=\"" + fmt(std::abs(base - top)) + "\" fill=\"" + std::string(color) +
                 "\" fill-opacity=\"0.6\"/>\n";
        }
      }
    }
    out += "</g>\n";
    for (std::size_t s = 0; s < series_.size(); ++s) {
      const double ly = kT + 16 + 16 * static_cast<double>(s);
      out += "<rect x=\"" + fmt(kW - kR - 150) + "\" y=\"" + fmt(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
             std::string(kPalette[s % kPalette.size()]) + "\"/>\n";
      out += text(kW - kR - 135, ly, series_[s].name, "start", 11);
    }
    out += "</svg>\n";
    return out;
  }

  void write(const std::filesystem::path& path) const { detail::write_text(path, render()); }

 private:
  static constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 36, kB = 50;

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  static std::string tick(double v) {
    char buf[32];
    if (v != 0.0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-2))
      std::snprintf(buf, sizeof buf, "%.1e", v);
    else
      std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
      }
    }
    return o;
  }
  static std::string text(double x, double y, const std::string& s, const char* anchor, int size) {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
           std::to_string(size) + "\" font-family=\"sans-serif\">" + escape(s) + "</text>\n";
  }
  static std::string line(double x1, double y1, double x2, double y2, const char* color) {
    return "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
           "\" stroke=\"" + color + "\"/>\n";
  }
  static double tx(double v, const Axis& a) { return a.log ? std::log10(v) : v; }
  static double untx(double v, const Axis& a) { return a.log ? std::pow(10.0, v) : v; }
  static bool finite_on(double v, const Axis& a) { return std::isfinite(v) && (!a.log || v > 0.0); }

  std::pair<double, double> range(const Axis& a, bool is_x) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series_)
      for (double v : is_x ? s.x : s.y)
        if (finite_on(v, a)) {
          lo = std::min(lo, tx(v, a));
          hi = std::max(hi, tx(v, a));
        }
    if (!is_x)
      for (const auto& h : hlines_)
        if (finite_on(h.first, a)) {
          lo = std::min(lo, tx(h.first, a));
          hi = std::max(hi, tx(h.first, a));
        }
    if (a.lo) lo = tx(*a.lo, a);
    if (a.hi) hi = tx(*a.hi, a);
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else if (!a.lo && !a.hi) {
      const double pad = 0.04 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
    return {lo, hi};
  }

  std::string title_;
  Axis x_, y_;
  std::vector<Series> series_;
  std::vector<std::pair<double, std::string>> hlines_;
};

/// Accuracy curves of a training trace; the 0.99 level is marked.
inline Chart accuracy_chart(const TrainTrace& trace, const std::string& title) {
  if (trace.rows.empty()) throw ContractError("empty trace");
  Series tr{"train accuracy", {}, {}, Series::Style::line, {}}, te{"test accuracy", {}, {}, Series::Style::line, {}};
  for (const auto& r : trace.rows) {
    tr.x.push_back(static_cast<double>(r.epoch));
    tr.y.push_back(r.train_acc);
    te.x.push_back(static_cast<double>(r.epoch));
    te.y.push_back(r.test_acc);
  }
  Chart c(title, {"epoch", false, {}, {}}, {"accuracy", false, 0.0, 1.02});
  c.add(std::move(tr)).add(std::move(te)).hline(0.99, "0.99");
  return c;
}

inline Chart loss_chart(const TrainTrace& trace, const std::string& title) {
  if (trace.rows.empty()) throw ContractError("empty trace");
  Series tr{"train loss", {}, {}, Series::Style::line, {}}, te{"test loss", {}, {}, Series::Style::line, {}};
  for (const auto& r : trace.rows) {
    tr.x.push_back(static_cast<double>(r.epoch));
    tr.y.push_back(r.train_loss);
    te.x.push_back(static_cast<double>(r.epoch));
    te.y.push_back(r.test_loss);
  }
  Chart c(title, {"epoch", false, {}, {}}, {"loss", false, {}, {}});
  c.add(std::move(tr)).add(std::move(te));
  return c;
}

/// Histogram of values with `bins` equal-width bins.
inline Chart histogram_chart(const std::vector<double>& values, int bins, const std::string& title,
                             const std::string& xlabel) {
  if (values.empty() || bins < 1) throw ContractError("histogram needs values and bins >= 1");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx > *mn ? *mx : *mn + 1.0;
  Series s{"count", {}, {}, Series::Style::bars, {}};
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    counts[std::min(b, counts.size() - 1)] += 1.0;
  }
  for (int b = 0; b < bins; ++b) {
    s.x.push_back(lo + (b + 0.5) * (hi - lo) / bins);
    s.y.push_back(counts[static_cast<std::size_t>(b)]);
  }
  Chart c(title, {xlabel, false, {}, {}}, {"count", false, 0.0, {}});
  c.add(std::move(s));
  return c;
}

}  // namespace logitreg::svg
