#include "gfm/store/baseline.hpp"

#include <cstring>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"

namespace fs = std::filesystem;

namespace gfm::store {

namespace {

fs::path band_file(const fs::path& dir, std::size_t sample, std::size_t t, std::size_t c) {
  return dir / ("s" + std::to_string(sample) + "_t" + std::to_string(t) + "_b" +
                std::to_string(c) + ".raw");
}

}  // namespace

PerBandFileStore::PerBandFileStore(fs::path dir, StoreManifest manifest)
    : dir_(std::move(dir)),
      manifest_(std::move(manifest)),
      opens_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

PerBandFileStore PerBandFileStore::write(const ChunkStore& source, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& m = source.manifest();
  if (m.dtype != raster::DType::kU16) throw ArgumentError("per-band baseline supports u16 stores");
  const auto& d = m.sample_shape;
  const std::size_t plane = std::size_t{d.h} * d.w;
  for (std::size_t i = 0; i < m.sample_count; ++i) {
    auto chip = source.read_sample(i);
    auto v = chip.values<std::uint16_t>();
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t c = 0; c < d.c; ++c) {
        write_file(band_file(dir, i, t, c), std::as_bytes(v.subspan(d.offset(t, c, 0, 0), plane)));
      }
  }
  write_text(dir / "manifest.json", m.to_json().dump(2));
  return PerBandFileStore(dir, m);
}

PerBandFileStore PerBandFileStore::open(const fs::path& dir) {
  return PerBandFileStore(dir,
                          StoreManifest::from_json(nlohmann::json::parse(read_text(dir / "manifest.json"))));
}

std::vector<raster::RasterChip> PerBandFileStore::load_batch(std::span<const std::size_t> ids) const {
  const auto& d = manifest_.sample_shape;
  const std::size_t plane = std::size_t{d.h} * d.w;
  std::vector<raster::RasterChip> out;
  for (std::size_t i : ids) {
    if (i >= manifest_.sample_count) throw IndexError("sample " + std::to_string(i) + " out of range");
    std::vector<std::uint16_t> values(d.count());
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t c = 0; c < d.c; ++c) {
        opens_->fetch_add(1);
        auto bytes = read_file(band_file(dir_, i, t, c));
        if (bytes.size() != plane * sizeof(std::uint16_t)) throw CorruptionError("band file truncated");
        std::memcpy(values.data() + d.offset(t, c, 0, 0), bytes.data(), bytes.size());
      }
    const auto& e = manifest_.provenance[i];
    out.emplace_back(d, std::move(values), manifest_.band_names, e.timestamps,
                     raster::ChipOrigin{{1, 'S', e.tile_code}, e.x, e.y}, manifest_.nodata_value);
  }
  return out;
}

}  // namespace gfm::store
