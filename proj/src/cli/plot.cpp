#include "gfm/cli/plot.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gfm/common/error.hpp"

namespace gfm::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

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

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range padded(double lo, double hi) {
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c",
                                              "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::size_t Csv::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ArgumentError("csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> Csv::numbers(std::size_t col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& cell = col < rows[r].size() ? rows[r][col] : std::string();
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
      throw ParseError("csv row " + std::to_string(r + 2) + ", column '" +
                       (col < header.size() ? header[col] : std::to_string(col)) +
                       "': not a number: '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      csv.header = split(line);
      first = false;
    } else {
      csv.rows.push_back(split(line));
    }
  }
  if (csv.header.empty()) throw EmptyInputError("csv has no header row");
  return csv;
}

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string render_svg(std::span<const Series> series, const ChartSpec& spec) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  std::size_t points = 0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "' has unequal x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      ++points;
    }
  }
  if (points == 0) throw EmptyInputError("nothing to plot: no finite points");

  constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 50;
  const Range xr = padded(xmin, xmax), yr = padded(ymin, ymax);
  auto px = [&](double x) { return kL + (x - xr.lo) / (xr.hi - xr.lo) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - yr.lo) / (yr.hi - yr.lo) * (kH - kT - kB); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(spec.title) << "</text>\n";
  os << "<line class=\"axis\" x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR
     << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<line class=\"axis\" x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\""
     << kH - kB << "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    os << "<text x=\"" << fmt("%.2f", px(xv)) << "\" y=\"" << kH - kB + 16
       << "\" text-anchor=\"middle\">" << fmt("%.3g", xv) << "</text>\n";
    os << "<text x=\"" << kL - 6 << "\" y=\"" << fmt("%.2f", py(yv) + 4)
       << "\" text-anchor=\"end\">" << fmt("%.3g", yv) << "</text>\n";
  }
  os << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (kT + kH - kB) / 2 << ")\">" << escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % kPalette.size()];
    std::string d;
    std::ostringstream marks;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const auto xs = fmt("%.2f", px(s.x[i])), ys = fmt("%.2f", py(s.y[i]));
      d += (d.empty() ? "M" : " L") + xs + ' ' + ys;
      marks << "<circle class=\"point\" cx=\"" << xs << "\" cy=\"" << ys << "\" r=\"3\" fill=\""
            << color << "\"/>\n";
    }
    if (d.empty()) continue;
    os << "<path class=\"series\" data-name=\"" << escape(s.name) << "\" d=\"" << d
       << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n"
       << marks.str();
    os << "<text x=\"" << kW - kR - 4 << "\" y=\"" << kT + 14 * (k + 1) << "\" text-anchor=\"end\" fill=\""
       << color << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace gfm::cli
