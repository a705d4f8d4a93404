#include "vista/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vista {
namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string render_svg(const std::string& title,
                       const std::vector<std::string>& x_labels,
                       const std::vector<PlotSeries>& series) {
  const double width = 720, height = 420;
  const double left = 60, right = 250, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  const std::size_t n = x_labels.size();
  auto x_at = [&](std::size_t i) {
    return left + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1));
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw
     << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
     << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < n; ++i) {
    os << "<text x=\"" << x_at(i) << "\" y=\"" << top + ph + 18
       << "\" text-anchor=\"middle\">" << escape(x_labels[i]) << "</text>\n";
  }
  os << "<text x=\"" << left - 8 << "\" y=\"" << top + 4
     << "\" text-anchor=\"end\">max</text>\n";
  os << "<text x=\"" << left - 8 << "\" y=\"" << top + ph
     << "\" text-anchor=\"end\">min</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* colour = kPalette[s % std::size(kPalette)];
    double lo = 0, hi = 0;
    bool any = false;
    for (double v : ser.y) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::string points;
    for (std::size_t i = 0; i < std::min(n, ser.y.size()); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      const double u = hi > lo ? (ser.y[i] - lo) / span : 0.5;
      points += num(x_at(i)) + "," + num(top + ph * (1.0 - u)) + " ";
    }
    os << "<polyline fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(s);
    os << "<rect x=\"" << left + pw + 16 << "\" y=\"" << ly - 9
       << "\" width=\"12\" height=\"3\" fill=\"" << colour << "\"/>\n";
    os << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly << "\">"
       << escape(ser.label) << " [" << num(lo) << ", " << num(hi) << "]</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace vista
