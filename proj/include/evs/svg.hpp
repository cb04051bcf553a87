#pragma once
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fit.hpp"
#include "scurve.hpp"

namespace evs::svg {

struct PlotOptions {
  int width = 800;
  int height = 500;
  std::string title = "event response probability";
  std::vector<std::string> labels;  // per-curve legend labels; default from metadata
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline const char* palette(size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
                                 "#bcbd22", "#7f7f7f"};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// One probability-vs-log-contrast chart: a polyline + point markers per curve,
// optional dashed vertical markers at each estimate's nct_50 and theta_100,
// and a legend.  Output bytes depend only on the inputs.
inline void emit_plots(const std::string& path, const std::vector<SCurve>& curves,
                       const std::vector<ThresholdEstimate>& estimates = {},
                       const PlotOptions& opt = {}) {
  if (curves.empty()) throw std::invalid_argument("emit_plots: need at least one curve");

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      x_min = std::min(x_min, p.log_contrast);
      x_max = std::max(x_max, p.log_contrast);
    }
  for (const auto& e : estimates) {
    if (std::isfinite(e.nct_50)) {
      x_min = std::min(x_min, e.nct_50);
      x_max = std::max(x_max, e.nct_50);
    }
    if (std::isfinite(e.theta_100)) {
      x_min = std::min(x_min, e.theta_100);
      x_max = std::max(x_max, e.theta_100);
    }
  }
  if (!(x_max > x_min)) {
    x_min -= 0.05;
    x_max += 0.05;
  }
  const double x_pad = 0.04 * (x_max - x_min);
  x_min -= x_pad;
  x_max += x_pad;

  const double ml = 62, mr = 170, mt = 42, mb = 48;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto X = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  auto Y = [&](double p) { return mt + (1.0 - p) * ph; };

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
    << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << ' '
    << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  f << "<rect width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" fill=\"#ffffff\"/>\n";
  f << "<text x=\"" << detail::num(ml) << "\" y=\"24\" font-size=\"15\">"
    << detail::escape(opt.title) << "</text>\n";

  // axes + grid
  f << "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double p = 0.25 * i;
    f << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(Y(p))
      << "\" x2=\"" << detail::num(ml + pw) << "\" y2=\"" << detail::num(Y(p))
      << "\"/>\n";
  }
  f << "</g>\n";
  f << "<g stroke=\"#333333\" stroke-width=\"1\">\n";
  f << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(mt) << "\" x2=\""
    << detail::num(ml) << "\" y2=\"" << detail::num(mt + ph) << "\"/>\n";
  f << "<line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(mt + ph)
    << "\" x2=\"" << detail::num(ml + pw) << "\" y2=\"" << detail::num(mt + ph)
    << "\"/>\n";
  f << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double p = 0.25 * i;
    f << "<text x=\"" << detail::num(ml - 8) << "\" y=\"" << detail::num(Y(p) + 4)
      << "\" text-anchor=\"end\">" << detail::tick_label(p) << "</text>\n";
  }
  for (int i = 0; i <= 6; ++i) {
    const double x = x_min + (x_max - x_min) * i / 6.0;
    f << "<line x1=\"" << detail::num(X(x)) << "\" y1=\"" << detail::num(mt + ph)
      << "\" x2=\"" << detail::num(X(x)) << "\" y2=\"" << detail::num(mt + ph + 5)
      << "\" stroke=\"#333333\"/>\n";
    f << "<text x=\"" << detail::num(X(x)) << "\" y=\"" << detail::num(mt + ph + 20)
      << "\" text-anchor=\"middle\">" << detail::tick_label(x) << "</text>\n";
  }
  f << "<text x=\"" << detail::num(ml + pw / 2) << "\" y=\""
    << detail::num(opt.height - 8.0)
    << "\" text-anchor=\"middle\">log contrast ln(1+c)</text>\n";
  f << "<text x=\"16\" y=\"" << detail::num(mt + ph / 2)
    << "\" transform=\"rotate(-90 16 " << detail::num(mt + ph / 2)
    << ")\" text-anchor=\"middle\">response probability</text>\n";

  // estimate markers first so curves draw on top
  for (size_t i = 0; i < estimates.size(); ++i) {
    const char* color = detail::palette(i);
    const auto& e = estimates[i];
    if (std::isfinite(e.nct_50))
      f << "<line x1=\"" << detail::num(X(e.nct_50)) << "\" y1=\"" << detail::num(mt)
        << "\" x2=\"" << detail::num(X(e.nct_50)) << "\" y2=\"" << detail::num(mt + ph)
        << "\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
    if (std::isfinite(e.theta_100))
      f << "<line x1=\"" << detail::num(X(e.theta_100)) << "\" y1=\"" << detail::num(mt)
        << "\" x2=\"" << detail::num(X(e.theta_100)) << "\" y2=\""
        << detail::num(mt + ph) << "\" stroke=\"" << color
        << "\" stroke-dasharray=\"2 4\"/>\n";
  }

  for (size_t i = 0; i < curves.size(); ++i) {
    const char* color = detail::palette(i);
    const auto& c = curves[i];
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < c.points.size(); ++k) {
      if (k) f << ' ';
      f << detail::num(X(c.points[k].log_contrast)) << ','
        << detail::num(Y(c.points[k].probability));
    }
    f << "\"/>\n";
    for (const auto& p : c.points)
      f << "<circle cx=\"" << detail::num(X(p.log_contrast)) << "\" cy=\""
        << detail::num(Y(p.probability)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }

  // legend
  const double lx = ml + pw + 14;
  double ly = mt + 6;
  for (size_t i = 0; i < curves.size(); ++i) {
    std::string label;
    if (i < opt.labels.size() && !opt.labels[i].empty()) {
      label = opt.labels[i];
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g lx", curves[i].baseline_lux);
      label = std::string(buf) + ' ' + curves[i].stimulus + ' ' +
              (curves[i].polarity == Polarity::on ? "ON" : "OFF");
    }
    f << "<line x1=\"" << detail::num(lx) << "\" y1=\"" << detail::num(ly) << "\" x2=\""
      << detail::num(lx + 22) << "\" y2=\"" << detail::num(ly) << "\" stroke=\""
      << detail::palette(i) << "\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << detail::num(lx + 28) << "\" y=\"" << detail::num(ly + 4)
      << "\">" << detail::escape(label) << "</text>\n";
    ly += 18;
  }
  if (!estimates.empty()) {
    f << "<text x=\"" << detail::num(lx) << "\" y=\"" << detail::num(ly + 8)
      << "\" fill=\"#555555\">dashed: nct_50</text>\n";
    f << "<text x=\"" << detail::num(lx) << "\" y=\"" << detail::num(ly + 24)
      << "\" fill=\"#555555\">dotted: theta_100</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace evs::svg
