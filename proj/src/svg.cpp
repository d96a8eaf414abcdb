#include "pmap/svg.hpp"

#include "pmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pmap::svg {

namespace {

std::string escape(const std::string& s) {
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

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= target) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

} // namespace

std::string render(const PlotSpec& spec, const std::vector<Series>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DimensionMismatch("svg series x/y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  auto widen = [](double& lo, double& hi) {
    if (hi - lo <= 0) {
      const double pad = std::max(1.0, std::abs(lo)) * 0.5;
      lo -= pad;
      hi += pad;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  };
  widen(xmin, xmax);
  widen(ymin, ymax);

  const double left = 70, right = 20, top = 40, bottom = 55;
  double pw = spec.width - left - right;
  double ph = spec.height - top - bottom;
  if (spec.equal_aspect) {
    const double sx = pw / (xmax - xmin), sy = ph / (ymax - ymin);
    if (sx > sy) {
      const double extra = (pw / sy - (xmax - xmin)) / 2;
      xmin -= extra;
      xmax += extra;
    } else {
      const double extra = (ph / sx - (ymax - ymin)) / 2;
      ymin -= extra;
      ymax += extra;
    }
  }
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << spec.width << R"(" height=")"
    << spec.height << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  o << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  o << R"(<text x=")" << spec.width / 2 << R"(" y="22" text-anchor="middle" font-size="14">)"
    << escape(spec.title) << "</text>\n";

  o << R"(<g stroke="#ccc" stroke-width="0.5">)" << '\n';
  const auto xt = nice_ticks(xmin, xmax);
  const auto yt = nice_ticks(ymin, ymax);
  for (double t : xt)
    o << R"(<line x1=")" << px(t) << R"(" y1=")" << top << R"(" x2=")" << px(t) << R"(" y2=")"
      << top + ph << R"("/>)" << '\n';
  for (double t : yt)
    o << R"(<line x1=")" << left << R"(" y1=")" << py(t) << R"(" x2=")" << left + pw << R"(" y2=")"
      << py(t) << R"("/>)" << '\n';
  o << "</g>\n";
  o << R"(<rect x=")" << left << R"(" y=")" << top << R"(" width=")" << pw << R"(" height=")" << ph
    << R"(" fill="none" stroke="black"/>)" << '\n';
  for (double t : xt)
    o << R"(<text x=")" << px(t) << R"(" y=")" << top + ph + 16 << R"(" text-anchor="middle">)"
      << fmt(t) << "</text>\n";
  for (double t : yt)
    o << R"(<text x=")" << left - 6 << R"(" y=")" << py(t) + 4 << R"(" text-anchor="end">)"
      << fmt(t) << "</text>\n";
  o << R"(<text x=")" << left + pw / 2 << R"(" y=")" << spec.height - 12
    << R"(" text-anchor="middle">)" << escape(spec.x_label) << "</text>\n";
  o << R"(<text x="16" y=")" << top + ph / 2 << R"(" text-anchor="middle" transform="rotate(-90 16 )"
    << top + ph / 2 << ")\">" << escape(spec.y_label) << "</text>\n";

  for (const auto& s : series) {
    if (s.line && s.x.size() > 1) {
      o << R"(<polyline fill="none" stroke=")" << s.color << R"(" stroke-width="1.5" points=")";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      o << R"("/>)" << '\n';
    }
    if (s.points) {
      const double radius = s.x.size() > 2000 ? 1.2 : 2.5;
      o << R"(<g fill=")" << s.color << R"(" fill-opacity="0.6">)" << '\n';
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << R"(<circle cx=")" << px(s.x[i]) << R"(" cy=")" << py(s.y[i]) << R"(" r=")" << radius
          << R"("/>)" << '\n';
      }
      o << "</g>\n";
    }
  }
  if (series.size() > 1) {
    double ly = top + 16;
    for (const auto& s : series) {
      o << R"(<rect x=")" << left + 10 << R"(" y=")" << ly - 9 << R"(" width="10" height="10" fill=")"
        << s.color << R"("/>)" << '\n';
      o << R"(<text x=")" << left + 26 << R"(" y=")" << ly << R"(">)" << escape(s.label)
        << "</text>\n";
      ly += 16;
    }
  }
  o << "</svg>\n";
  return o.str();
}

void write(const std::filesystem::path& path, const PlotSpec& spec,
           const std::vector<Series>& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << render(spec, series);
  if (!out) throw IoError("write failed for " + path.string());
}

} // namespace pmap::svg
