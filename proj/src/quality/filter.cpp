#include "gfm/quality/filter.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <json.hpp>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"

namespace gfm::quality {

void FilterPolicy::validate() const {
  if (window_x < 1 || window_y < 1) throw ArgumentError("filter window must be at least 1x1");
  if (!(bad_fraction_threshold >= 0.0 && bad_fraction_threshold <= 1.0)) {
    throw ArgumentError("bad fraction threshold must lie in [0, 1]");
  }
  if (timesteps_required < 1) throw ArgumentError("timesteps_required must be >= 1");
  for (auto code : bad_codes) {
    if (!raster::is_quality_code(code)) {
      throw ArgumentError("bad code " + std::to_string(code) + " is not a quality code");
    }
  }
}

bool FilterPolicy::is_bad(std::uint8_t code) const {
  return std::find(bad_codes.begin(), bad_codes.end(), code) != bad_codes.end();
}

std::vector<WindowScore> scan_windows(const raster::QualityMask& mask, const FilterPolicy& policy) {
  policy.validate();
  std::array<bool, 256> bad{};
  for (auto code : policy.bad_codes) bad[code] = true;
  std::vector<WindowScore> out;
  const double area = static_cast<double>(policy.window_x) * policy.window_y;
  for (std::uint32_t y = 0; std::size_t{y} + policy.window_y <= mask.height; y += policy.window_y) {
    for (std::uint32_t x = 0; std::size_t{x} + policy.window_x <= mask.width; x += policy.window_x) {
      std::size_t count = 0;
      for (std::uint32_t yy = y; yy < y + policy.window_y; ++yy) {
        const auto* row = mask.codes.data() + std::size_t{yy} * mask.width;
        for (std::uint32_t xx = x; xx < x + policy.window_x; ++xx) count += bad[row[xx]];
      }
      out.push_back({x, y, static_cast<double>(count) / area});
    }
  }
  return out;
}

void sort_entries(std::vector<ChipIndexEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ChipIndexEntry& a, const ChipIndexEntry& b) {
    return std::tie(a.tile_code, a.y, a.x, a.timestamps) <
           std::tie(b.tile_code, b.y, b.x, b.timestamps);
  });
}

std::vector<ChipIndexEntry> filter_tile(std::span<const raster::QualityMask> masks,
                                        const FilterPolicy& policy) {
  policy.validate();
  if (masks.size() < policy.timesteps_required) {
    throw ArgumentError("need at least " + std::to_string(policy.timesteps_required) +
                        " timesteps, got " + std::to_string(masks.size()));
  }
  std::vector<const raster::QualityMask*> ordered;
  for (const auto& m : masks) {
    if (m.height != masks[0].height || m.width != masks[0].width) {
      throw ShapeError("quality masks of one tile differ in dims");
    }
    ordered.push_back(&m);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](auto* a, auto* b) { return a->timestamp < b->timestamp; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->timestamp == ordered[i - 1]->timestamp) {
      throw ArgumentError("duplicate timestamp " + ordered[i]->timestamp);
    }
  }
  std::vector<std::vector<WindowScore>> scores;
  for (auto* m : ordered) scores.push_back(scan_windows(*m, policy));

  std::vector<ChipIndexEntry> out;
  const std::size_t run = policy.timesteps_required;
  const std::size_t windows = scores.empty() ? 0 : scores[0].size();
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t start = 0; start + run <= ordered.size(); ++start) {
      bool ok = true;
      for (std::size_t k = start; k < start + run && ok; ++k) {
        ok = scores[k][w].bad_fraction <= policy.bad_fraction_threshold;
      }
      if (!ok) continue;
      ChipIndexEntry e;
      e.tile_code = ordered[0]->origin.tile.tile_code;
      for (std::size_t k = start; k < start + run; ++k) e.timestamps.push_back(ordered[k]->timestamp);
      e.x = scores[0][w].x;
      e.y = scores[0][w].y;
      e.window_x = policy.window_x;
      e.window_y = policy.window_y;
      out.push_back(std::move(e));
    }
  }
  sort_entries(out);
  return out;
}

std::string format_index_line(const ChipIndexEntry& e) {
  nlohmann::ordered_json j;
  j["tile"] = e.tile_code;
  j["timestamps"] = e.timestamps;
  j["x"] = e.x;
  j["y"] = e.y;
  j["window"] = {e.window_x, e.window_y};
  return j.dump();
}

ChipIndexEntry parse_index_line(const std::string& line, std::size_t line_no) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("index line " + std::to_string(line_no) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  try {
    ChipIndexEntry e;
    e.tile_code = j.at("tile").get<std::string>();
    e.timestamps = j.at("timestamps").get<std::vector<std::string>>();
    e.x = j.at("x").get<std::uint32_t>();
    e.y = j.at("y").get<std::uint32_t>();
    const auto& win = j.at("window");
    if (!win.is_array() || win.size() != 2) throw fail("window must be [X, Y]");
    e.window_x = win[0].get<std::uint32_t>();
    e.window_y = win[1].get<std::uint32_t>();
    if (e.tile_code.empty()) throw fail("empty tile");
    if (e.timestamps.empty()) throw fail("empty timestamps");
    for (std::size_t i = 1; i < e.timestamps.size(); ++i) {
      if (!(e.timestamps[i - 1] < e.timestamps[i])) throw fail("timestamps not increasing");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw fail(ex.what());
  }
}

void write_index(std::span<const ChipIndexEntry> entries, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : entries) {
    text += format_index_line(e);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<ChipIndexEntry> read_index(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<ChipIndexEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_index_line(line, line_no));
  }
  return out;
}

}  // namespace gfm::quality
