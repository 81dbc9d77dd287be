#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace carl::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};
constexpr double kMargin = 60.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string line_plot(const std::vector<double>& x, const std::vector<Series>& series,
                      const PlotOptions& options) {
  auto transform_y = [&](const Maybe& v) -> Maybe {
    if (!v || !std::isfinite(*v)) return std::nullopt;
    if (options.log_y) {
      if (*v <= 0.0) return std::nullopt;
      return std::log10(*v);
    }
    return *v;
  };

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (double v : x) {
    x_min = std::min(x_min, v);
    x_max = std::max(x_max, v);
  }
  for (const auto& s : series) {
    for (const auto& v : s.y) {
      if (const Maybe t = transform_y(v)) {
        y_min = std::min(y_min, *t);
        y_max = std::max(y_max, *t);
      }
    }
  }
  if (!(x_max > x_min)) {
    x_min = x.empty() ? 0.0 : x.front() - 0.5;
    x_max = x_min + 1.0;
  }
  if (!std::isfinite(y_min)) {
    y_min = 0.0;
    y_max = 1.0;
  } else if (!(y_max > y_min)) {
    y_min -= 0.5;
    y_max += 0.5;
  }

  const double w = options.width, h = options.height;
  const double pw = w - 2 * kMargin, ph = h - 2 * kMargin;
  auto px = [&](double v) { return kMargin + (v - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double v) { return h - kMargin - (v - y_min) / (y_max - y_min) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
     << options.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << fixed(kMargin) << "\" y=\"" << fixed(kMargin) << "\" width=\"" << fixed(pw)
     << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!options.title.empty()) {
    os << "<text x=\"" << fixed(w / 2) << "\" y=\"" << fixed(kMargin / 2)
       << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(options.title) << "</text>\n";
  }

  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    const double yv = y_min + (y_max - y_min) * k / 4.0;
    os << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(h - kMargin + 18)
       << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << fixed(kMargin - 6) << "\" y=\"" << fixed(py(yv) + 4) << "\" text-anchor=\"end\">"
       << (options.log_y ? "1e" + tick(yv) : tick(yv)) << "</text>\n";
  }
  os << "<text x=\"" << fixed(w / 2) << "\" y=\"" << fixed(h - 12) << "\" text-anchor=\"middle\">"
     << escape(options.x_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) {
      const Maybe t = transform_y(series[s].y[i]);
      if (!t) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L" : " M") + fixed(px(x[i])) + " " + fixed(py(*t));
      pen_down = true;
    }
    if (!path.empty()) {
      os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kMargin + 16.0 * (static_cast<double>(s) + 1);
    os << "<text x=\"" << fixed(w - kMargin - 6) << "\" y=\"" << fixed(ly) << "\" text-anchor=\"end\" fill=\""
       << color << "\">" << escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace carl::svg
