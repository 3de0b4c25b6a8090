#pragma once

// Minimal standalone SVG plots: lines, shaded bands, markers and box-style
// quantile summaries on linear or log10 axes. Data points are embedded in the
// markup; nothing external is referenced.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace cespectra::cli {

/// Shortest round-trip decimal; "nan" / "inf" / "-inf" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

inline std::string xml_escape(const std::string& s) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return colors[i % 7];
}

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool line = true;
  bool markers = true;
  std::size_t color = 0;
};

struct Band {
  std::string label;
  std::vector<double> x, lo, hi;
  std::size_t color = 0;
};

/// Quantile summary at a categorical or numeric position.
struct QuantileBox {
  std::string label;
  double x = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  std::vector<double> points;  // raw values drawn as a strip
  std::size_t color = 0;
};

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel, double width = 640, double height = 420)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), w_(width), h_(height) {}

  SvgPlot& log_x(bool on = true) { logx_ = on; return *this; }
  SvgPlot& log_y(bool on = true) { logy_ = on; return *this; }
  SvgPlot& add(Series s) { series_.push_back(std::move(s)); return *this; }
  SvgPlot& add(Band b) { bands_.push_back(std::move(b)); return *this; }
  SvgPlot& add(QuantileBox b) { boxes_.push_back(std::move(b)); return *this; }
  /// Category names placed under integer x positions 0, 1, ...
  SvgPlot& categories(std::vector<std::string> c) { cats_ = std::move(c); return *this; }

  std::string render() const {
    compute_range();
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
      << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w_ / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title_)
      << "</text>\n";
    axes(o);
    for (const auto& b : bands_) band(o, b);
    for (const auto& b : boxes_) box(o, b);
    for (const auto& s : series_) series(o, s);
    legend(o);
    o << "</svg>\n";
    return o.str();
  }

 private:
  static constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 50;

  double tx(double v) const { return logx_ ? std::log10(v) : v; }
  double ty(double v) const { return logy_ ? std::log10(v) : v; }
  bool usable_x(double v) const { return std::isfinite(v) && (!logx_ || v > 0); }
  bool usable_y(double v) const { return std::isfinite(v) && (!logy_ || v > 0); }
  double px(double v) const { return kLeft + (tx(v) - x0_) / (x1_ - x0_) * (w_ - kLeft - kRight); }
  double py(double v) const { return h_ - kBottom - (ty(v) - y0_) / (y1_ - y0_) * (h_ - kTop - kBottom); }

  void compute_range() const {
    double xa = std::numeric_limits<double>::infinity(), xb = -xa, ya = xa, yb = -xa;
    auto fx = [&](double v) { if (usable_x(v)) { xa = std::min(xa, tx(v)); xb = std::max(xb, tx(v)); } };
    auto fy = [&](double v) { if (usable_y(v)) { ya = std::min(ya, ty(v)); yb = std::max(yb, ty(v)); } };
    for (const auto& s : series_) {
      for (double v : s.x) fx(v);
      for (double v : s.y) fy(v);
    }
    for (const auto& b : bands_) {
      for (double v : b.x) fx(v);
      for (double v : b.lo) fy(v);
      for (double v : b.hi) fy(v);
    }
    for (const auto& b : boxes_) {
      fx(b.x);
      for (double v : {b.q05, b.q95}) fy(v);
      for (double v : b.points) fy(v);
    }
    if (!cats_.empty()) {
      xa = std::min(xa, -0.5);
      xb = std::max(xb, static_cast<double>(cats_.size()) - 0.5);
    }
    if (!std::isfinite(xa)) { xa = 0; xb = 1; }
    if (!std::isfinite(ya)) { ya = 0; yb = 1; }
    if (xb - xa < 1e-12) { xa -= 0.5; xb += 0.5; }
    if (yb - ya < 1e-12) { ya -= 0.5; yb += 0.5; }
    const double pad = 0.05 * (yb - ya);
    x0_ = xa; x1_ = xb; y0_ = ya - pad; y1_ = yb + pad;
    if (cats_.empty()) {
      const double xpad = 0.03 * (xb - xa);
      x0_ -= xpad;
      x1_ += xpad;
    }
  }

  static std::string tick_label(double v, bool log) {
    std::ostringstream s;
    if (log) {
      s << "1e" << static_cast<int>(std::lround(v));
    } else {
      s.precision(3);
      s << v;
    }
    return s.str();
  }

  void axes(std::ostringstream& o) const {
    const double L = kLeft, R = w_ - kRight, T = kTop, B = h_ - kBottom;
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << R - L << "\" height=\"" << B - T
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    auto ticks = [](double a, double b, bool log) {
      std::vector<double> t;
      if (log) {
        for (double e = std::ceil(a); e <= std::floor(b); e += 1.0) t.push_back(e);
        if (t.size() < 2) t = {a, b};
        return t;
      }
      const double raw = (b - a) / 5.0;
      const double mag = std::pow(10.0, std::floor(std::log10(raw)));
      double step = mag;
      for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) { step = m * mag; break; }
      for (double v = std::ceil(a / step) * step; v <= b + 1e-12 * std::abs(b); v += step) t.push_back(v);
      return t;
    };
    if (cats_.empty()) {
      for (double t : ticks(x0_, x1_, logx_)) {
        const double x = L + (t - x0_) / (x1_ - x0_) * (R - L);
        o << "<line x1=\"" << x << "\" y1=\"" << B << "\" x2=\"" << x << "\" y2=\"" << B + 4 << "\" stroke=\"#444\"/>"
          << "<text x=\"" << x << "\" y=\"" << B + 16 << "\" text-anchor=\"middle\">" << tick_label(t, logx_)
          << "</text>\n";
      }
    } else {
      for (std::size_t i = 0; i < cats_.size(); ++i) {
        const double x = L + (static_cast<double>(i) - x0_) / (x1_ - x0_) * (R - L);
        o << "<text x=\"" << x << "\" y=\"" << B + 16 << "\" text-anchor=\"middle\">" << xml_escape(cats_[i])
          << "</text>\n";
      }
    }
    for (double t : ticks(y0_, y1_, logy_)) {
      const double y = B - (t - y0_) / (y1_ - y0_) * (B - T);
      o << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y << "\" stroke=\"#444\"/>"
        << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << tick_label(t, logy_)
        << "</text>\n";
    }
    o << "<text x=\"" << (L + R) / 2 << "\" y=\"" << h_ - 12 << "\" text-anchor=\"middle\">" << xml_escape(xlabel_)
      << "</text>\n";
    o << "<text transform=\"translate(16," << (T + B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(ylabel_) << "</text>\n";
  }

  void band(std::ostringstream& o, const Band& b) const {
    std::ostringstream top, bottom;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < b.x.size(); ++i)
      if (usable_x(b.x[i]) && usable_y(b.lo[i]) && usable_y(b.hi[i])) idx.push_back(i);
    if (idx.empty()) return;
    o << "<polygon fill=\"" << palette(b.color) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i : idx) o << px(b.x[i]) << ',' << py(b.hi[i]) << ' ';
    for (auto it = idx.rbegin(); it != idx.rend(); ++it) o << px(b.x[*it]) << ',' << py(b.lo[*it]) << ' ';
    o << "\"/>\n";
  }

  void box(std::ostringstream& o, const QuantileBox& b) const {
    const char* c = palette(b.color);
    const double x = px(b.x);
    const double hw = 0.18 * (w_ - kLeft - kRight) / std::max<double>(1.0, x1_ - x0_);
    if (usable_y(b.q05) && usable_y(b.q95))
      o << "<line x1=\"" << x << "\" y1=\"" << py(b.q05) << "\" x2=\"" << x << "\" y2=\"" << py(b.q95)
        << "\" stroke=\"" << c << "\"/>\n";
    if (usable_y(b.q25) && usable_y(b.q75))
      o << "<rect x=\"" << x - hw << "\" y=\"" << py(b.q75) << "\" width=\"" << 2 * hw << "\" height=\""
        << std::max(0.5, py(b.q25) - py(b.q75)) << "\" fill=\"" << c << "\" fill-opacity=\"0.25\" stroke=\"" << c
        << "\"/>\n";
    if (usable_y(b.q50))
      o << "<line x1=\"" << x - hw << "\" y1=\"" << py(b.q50) << "\" x2=\"" << x + hw << "\" y2=\"" << py(b.q50)
        << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < b.points.size(); ++i) {
      if (!usable_y(b.points[i])) continue;
      // Deterministic strip jitter.
      const double j = (static_cast<double>((i * 7919) % 101) / 100.0 - 0.5) * 1.4 * hw;
      o << "<circle cx=\"" << x + j << "\" cy=\"" << py(b.points[i]) << "\" r=\"1.5\" fill=\"" << c
        << "\" fill-opacity=\"0.5\"/>\n";
    }
  }

  void series(std::ostringstream& o, const Series& s) const {
    const char* c = palette(s.color);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable_x(s.x[i]) && usable_y(s.y[i])) idx.push_back(i);
    if (s.line && idx.size() > 1) {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i : idx) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      o << "\"/>\n";
    }
    if (s.markers)
      for (std::size_t i : idx)
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2.5\" fill=\"" << c << "\"/>\n";
  }

  void legend(std::ostringstream& o) const {
    double y = kTop + 10;
    const double x = w_ - kRight + 10;
    auto entry = [&](const std::string& label, std::size_t color) {
      if (label.empty()) return;
      o << "<rect x=\"" << x << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << palette(color)
        << "\"/><text x=\"" << x + 14 << "\" y=\"" << y + 1 << "\">" << xml_escape(label) << "</text>\n";
      y += 16;
    };
    for (const auto& s : series_) entry(s.label, s.color);
    for (const auto& b : bands_) entry(b.label, b.color);
    for (const auto& b : boxes_) entry(b.label, b.color);
  }

  std::string title_, xlabel_, ylabel_;
  double w_, h_;
  bool logx_ = false, logy_ = false;
  std::vector<Series> series_;
  std::vector<Band> bands_;
  std::vector<QuantileBox> boxes_;
  std::vector<std::string> cats_;
  mutable double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
};

/// Linear-interpolation quantile of unsorted finite values; NaN when empty.
inline double quantile(std::vector<double> xs, double q) {
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double v) { return std::isnan(v); }), xs.end());
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  if (i + 1 >= xs.size()) return xs.back();
  if (f == 0.0) return xs[i];
  return xs[i] * (1.0 - f) + xs[i + 1] * f;
}

inline QuantileBox make_box(std::string label, double x, const std::vector<double>& values, std::size_t color) {
  QuantileBox b;
  b.label = std::move(label);
  b.x = x;
  b.q05 = quantile(values, 0.05);
  b.q25 = quantile(values, 0.25);
  b.q50 = quantile(values, 0.5);
  b.q75 = quantile(values, 0.75);
  b.q95 = quantile(values, 0.95);
  b.points = values;
  b.color = color;
  return b;
}

}  // namespace cespectra::cli
