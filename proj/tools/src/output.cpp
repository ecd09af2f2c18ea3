#include "ccbf_cli/output.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ccbf::cli {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Pixel coordinates: two decimals keeps files small and stable.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr std::array<const char*, 10> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 75.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) { lo = 0.0; hi = 1.0; }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(1e-3, 0.05 * std::abs(hi));
      lo -= pad;
      hi += pad;
    } else {
      const double pad = 0.04 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }
  double span() const { return hi - lo; }
};

std::vector<double> column(const SimLog& log, auto get) {
  std::vector<double> out;
  out.reserve(log.records.size());
  for (const auto& r : log.records) out.push_back(get(r));
  return out;
}

std::vector<double> times(const SimLog& log) {
  return column(log, [](const SimRecord& r) { return r.t; });
}

std::string run_title(const SimLog& log, const std::string& what) {
  return what + ": " + log.scenario_id + " / " + log.controller_id + " (" + log.outcome_label() + ")";
}

}  // namespace

std::vector<std::string> csv_header(const SimLog& log) {
  std::vector<std::string> cols{"t"};
  if (log.records.empty()) return cols;
  const auto& r = log.records.front();
  for (Eigen::Index i = 0; i < r.x.size(); ++i) cols.push_back("x_" + std::to_string(i));
  for (Eigen::Index i = 0; i < r.u.size(); ++i) cols.push_back("u_" + std::to_string(i));
  for (Eigen::Index i = 0; i < r.w.size(); ++i) cols.push_back("w_" + std::to_string(i));
  cols.push_back("H");
  cols.push_back("b_ccbf");
  for (Eigen::Index i = 0; i < r.h.size(); ++i) cols.push_back("h_" + std::to_string(i));
  for (const char* c : {"feasible", "eta_mu_margin", "eta_nu_margin", "min_eig_phi"}) cols.push_back(c);
  return cols;
}

void write_csv(std::ostream& os, const SimLog& log) {
  const auto cols = csv_header(log);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : log.records) {
    os << num(r.t);
    for (const Vector* v : {&r.x, &r.u, &r.w}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << num((*v)[i]);
    }
    os << ',' << num(r.H) << ',' << num(r.b_ccbf);
    for (Eigen::Index i = 0; i < r.h.size(); ++i) os << ',' << num(r.h[i]);
    os << ',' << (r.feasible ? 1 : 0) << ',' << num(r.eta_mu_margin) << ','
       << num(r.eta_nu_margin) << ',' << num(r.min_eig) << '\n';
  }
}

std::string render_svg(const Plot& plot) {
  Range xr;
  Range yr;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        xr.add(s.x[i]);
        yr.add(s.y[i]);
      }
    }
  }
  for (double h : plot.hlines) yr.add(h);
  for (const auto& c : plot.circles) {
    xr.add(c.cx - c.r);
    xr.add(c.cx + c.r);
    yr.add(c.cy - c.r);
    yr.add(c.cy + c.r);
  }
  xr.finish();
  yr.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  if (plot.equal_aspect) {
    const double scale = std::max(xr.span() / pw, yr.span() / ph);
    const double xc = 0.5 * (xr.lo + xr.hi);
    const double yc = 0.5 * (yr.lo + yr.hi);
    xr.lo = xc - 0.5 * scale * pw;
    xr.hi = xc + 0.5 * scale * pw;
    yr.lo = yc - 0.5 * scale * ph;
    yr.hi = yc + 0.5 * scale * ph;
  }
  auto sx = [&](double v) { return kLeft + (v - xr.lo) / xr.span() * pw; };
  auto sy = [&](double v) { return kTop + (yr.hi - v) / yr.span() * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" height=\"500\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  os << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(plot.title) << "</text>\n";

  // grid and ticks
  os << "<g stroke=\"#e0e0e0\" stroke-width=\"1\">\n";
  const double xs = nice_step(xr.span(), 8);
  const double ys = nice_step(yr.span(), 6);
  std::ostringstream labels;
  for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + 1e-9 * xs; v += xs) {
    const double p = sx(v);
    os << "<line x1=\"" << px(p) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(p) << "\" y2=\""
       << px(kTop + ph) << "\"/>\n";
    labels << "<text x=\"" << px(p) << "\" y=\"" << px(kTop + ph + 16)
           << "\" text-anchor=\"middle\">" << num(std::abs(v) < 1e-12 * xs ? 0.0 : v) << "</text>\n";
  }
  for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + 1e-9 * ys; v += ys) {
    const double p = sy(v);
    os << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(p) << "\" x2=\"" << px(kLeft + pw)
       << "\" y2=\"" << px(p) << "\"/>\n";
    labels << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(p + 4) << "\" text-anchor=\"end\">"
           << num(std::abs(v) < 1e-12 * ys ? 0.0 : v) << "</text>\n";
  }
  os << "</g>\n" << labels.str();
  os << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(pw)
     << "\" height=\"" << px(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"" << px(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << px(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << px(kTop + ph / 2) << ")\">" << escape(plot.y_label) << "</text>\n";

  os << "<defs><clipPath id=\"area\"><rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop)
     << "\" width=\"" << px(pw) << "\" height=\"" << px(ph) << "\"/></clipPath></defs>\n";
  os << "<g clip-path=\"url(#area)\">\n";
  for (const auto& c : plot.circles) {
    os << "<ellipse cx=\"" << px(sx(c.cx)) << "\" cy=\"" << px(sy(c.cy)) << "\" rx=\""
       << px(c.r / xr.span() * pw) << "\" ry=\"" << px(c.r / yr.span() * ph)
       << "\" fill=\"#cccccc\" fill-opacity=\"0.6\" stroke=\"#555555\"/>\n";
  }
  for (double h : plot.hlines) {
    os << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(sy(h)) << "\" x2=\"" << px(kLeft + pw)
       << "\" y2=\"" << px(sy(h)) << "\" stroke=\"black\" stroke-dasharray=\"2 3\"/>\n";
  }
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % kPalette.size()];
    std::string pts;
    auto flush = [&] {
      if (pts.empty()) return;
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += px(sx(s.x[i])) + "," + px(sy(s.y[i]));
    }
    flush();
  }
  os << "</g>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(k);
    const double x = kLeft + pw + 12;
    os << "<line x1=\"" << px(x) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x + 22) << "\" y2=\""
       << px(y) << "\" stroke=\"" << kPalette[k % kPalette.size()] << "\" stroke-width=\"2\""
       << (plot.series[k].dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    os << "<text x=\"" << px(x + 28) << "\" y=\"" << px(y + 4) << "\">"
       << escape(plot.series[k].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

Plot states_plot(const SimLog& log) {
  Plot p{run_title(log, "states"), "t [s]", "x", {}, {}, {}, false};
  if (log.records.empty()) return p;
  const auto t = times(log);
  for (Eigen::Index i = 0; i < log.records.front().x.size(); ++i) {
    p.series.push_back({"x_" + std::to_string(i), t,
                        column(log, [i](const SimRecord& r) { return r.x[i]; })});
  }
  return p;
}

Plot controls_plot(const SimLog& log) {
  Plot p{run_title(log, "controls"), "t [s]", "u", {}, {}, {}, false};
  if (log.records.empty()) return p;
  const auto t = times(log);
  for (Eigen::Index i = 0; i < log.records.front().u.size(); ++i) {
    p.series.push_back({"u_" + std::to_string(i), t,
                        column(log, [i](const SimRecord& r) { return r.u[i]; })});
  }
  return p;
}

Plot weights_plot(const SimLog& log) {
  Plot p{run_title(log, "weights"), "t [s]", "w", {}, {}, {}, false};
  if (log.records.empty()) return p;
  const auto t = times(log);
  for (Eigen::Index i = 0; i < log.records.front().w.size(); ++i) {
    p.series.push_back({"w_" + std::to_string(i), t,
                        column(log, [i](const SimRecord& r) { return r.w[i]; })});
  }
  return p;
}

Plot barrier_plot(const SimLog& log) {
  Plot p{run_title(log, "barriers"), "t [s]", "value", {}, {0.0}, {}, false};
  if (log.records.empty()) return p;
  const auto t = times(log);
  p.series.push_back({"H", t, column(log, [](const SimRecord& r) { return r.H; })});
  p.series.push_back({"b_ccbf", t, column(log, [](const SimRecord& r) { return r.b_ccbf; }), true});
  for (Eigen::Index i = 0; i < log.records.front().h.size(); ++i) {
    p.series.push_back({"h_" + std::to_string(i), t,
                        column(log, [i](const SimRecord& r) { return r.h[i]; })});
  }
  return p;
}

}  // namespace ccbf::cli
