#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gfm::cli {

// Comma-separated table with a header row; no quoting.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // ArgumentError if absent
  std::vector<double> numbers(std::size_t col) const;  // ParseError names row and column
};

Csv parse_csv(const std::string& text);
Csv read_csv(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
};

// Static line chart. Each series becomes one <path class="series"> with one
// M/L command per point plus a <circle class="point"> marker per point.
std::string render_svg(std::span<const Series> series, const ChartSpec& spec);

}  // namespace gfm::cli
