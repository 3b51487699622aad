#include "gfm/store/chunk_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <unistd.h>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/checksum.hpp"
#include "gfm/common/error.hpp"

namespace fs = std::filesystem;

namespace gfm::store {

namespace {

std::size_t dtype_size(raster::DType d) {
  switch (d) {
    case raster::DType::kU16: return 2;
    case raster::DType::kF32: return 4;
    default: return 1;
  }
}

raster::DType dtype_from_zarr(const std::string& s) {
  if (s == "<u2") return raster::DType::kU16;
  if (s == "<f4") return raster::DType::kF32;
  throw FormatError("unsupported zarr dtype " + s);
}

nlohmann::ordered_json zarray_json(const StoreManifest& m) {
  const auto& s = m.sample_shape;
  nlohmann::ordered_json j;
  j["zarr_format"] = 2;
  j["shape"] = {m.sample_count, s.t, s.c, s.h, s.w};
  j["chunks"] = {m.chunk_samples, std::max(s.t, 1u), std::max(s.c, 1u), std::max(s.h, 1u),
                 std::max(s.w, 1u)};
  j["dtype"] = zarr_dtype(m.dtype);
  j["compressor"] = nullptr;
  j["fill_value"] = 0;
  j["order"] = "C";
  j["filters"] = nullptr;
  return j;
}

std::span<const std::byte> sample_bytes_of(const raster::RasterChip& chip) {
  return std::visit([](const auto& v) { return std::as_bytes(std::span(v)); }, chip.storage());
}

}  // namespace

std::string zarr_dtype(raster::DType dtype) {
  switch (dtype) {
    case raster::DType::kU16: return "<u2";
    case raster::DType::kF32: return "<f4";
    default: throw ArgumentError("chunk store holds u16 or f32 samples only");
  }
}

std::string chunk_file_name(std::size_t chunk) { return std::to_string(chunk) + ".0.0.0.0"; }

std::size_t StoreManifest::sample_bytes() const { return sample_shape.count() * dtype_size(dtype); }

nlohmann::ordered_json StoreManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "gfm-chunk-store";
  j["version"] = 1;
  j["sample_count"] = sample_count;
  j["sample_shape"] = {sample_shape.t, sample_shape.c, sample_shape.h, sample_shape.w};
  j["dtype"] = zarr_dtype(dtype);
  j["chunk_samples"] = chunk_samples;
  j["chunk_count"] = chunk_count();
  j["compression"] = nullptr;
  j["band_names"] = band_names;
  j["nodata"] = nodata_value;
  j["band_stats"] = raster::to_json(band_stats);
  auto& tiles_j = j["tiles"] = nlohmann::ordered_json::array();
  for (const auto& t : tiles) {
    tiles_j.push_back({{"tile", t.tile_code}, {"utm_zone", t.utm_zone},
                       {"lat_band", std::string(1, t.lat_band)}});
  }
  auto& prov = j["provenance"] = nlohmann::ordered_json::array();
  for (const auto& e : provenance) prov.push_back(nlohmann::ordered_json::parse(quality::format_index_line(e)));
  j["checksum_algorithm"] = "crc32";
  j["checksums"] = checksums;
  return j;
}

StoreManifest StoreManifest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gfm-chunk-store") throw FormatError("not a gfm chunk store manifest");
    StoreManifest m;
    m.sample_count = j.at("sample_count").get<std::size_t>();
    const auto shape = j.at("sample_shape").get<std::vector<std::uint32_t>>();
    if (shape.size() != 4) throw FormatError("sample_shape needs 4 dims");
    m.sample_shape = {shape[0], shape[1], shape[2], shape[3]};
    m.dtype = dtype_from_zarr(j.at("dtype").get<std::string>());
    m.chunk_samples = j.at("chunk_samples").get<std::size_t>();
    if (m.chunk_samples < 1) throw FormatError("chunk_samples must be >= 1");
    m.band_names = j.at("band_names").get<std::vector<std::string>>();
    m.nodata_value = j.at("nodata").get<double>();
    m.band_stats = raster::band_stats_from_json(j.at("band_stats"));
    for (const auto& t : j.at("tiles")) {
      m.tiles.push_back({t.at("utm_zone").get<int>(), t.at("lat_band").get<std::string>().at(0),
                         t.at("tile").get<std::string>()});
    }
    std::size_t line = 0;
    for (const auto& p : j.at("provenance")) m.provenance.push_back(quality::parse_index_line(p.dump(), ++line));
    m.checksums = j.at("checksums").get<std::vector<std::uint32_t>>();
    if (m.provenance.size() != m.sample_count || m.checksums.size() != m.sample_count) {
      throw FormatError("manifest provenance/checksum length differs from sample_count");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed store manifest: ") + e.what());
  }
}

StoreManifest pack(std::span<const quality::ChipIndexEntry> index, const ChipResolver& resolver,
                   const raster::BandStats& stats, const fs::path& out_dir,
                   const PackOptions& options) {
  if (options.chunk_samples < 1) throw ArgumentError("chunk_samples must be >= 1");
  StoreManifest m;
  m.chunk_samples = options.chunk_samples;
  m.band_stats = stats;
  m.sample_count = index.size();

  const fs::path parent = out_dir.parent_path().empty() ? fs::path(".") : out_dir.parent_path();
  fs::create_directories(parent);
  const fs::path tmp = parent / (out_dir.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  try {
    std::vector<std::byte> chunk;
    std::map<std::string, raster::TileId> tiles;
    std::size_t chunks_written = 0;
    auto flush = [&] {
      if (chunks_written >= options.fail_after_chunks) {
        throw IoError("simulated crash after " + std::to_string(chunks_written) + " chunks");
      }
      // Zarr edge chunks are stored full-size, padded with the fill value.
      chunk.resize(m.chunk_samples * m.sample_bytes(), std::byte{0});
      write_file(tmp / chunk_file_name(chunks_written), chunk);
      ++chunks_written;
      chunk.clear();
    };
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto& e = index[i];
      std::shared_ptr<const raster::RasterChip> tile;
      try {
        tile = resolver(e.tile_code);
      } catch (const MissingSourceError& err) {
        throw MissingSourceError("entry " + std::to_string(i) + " (tile " + e.tile_code + " at " +
                                 std::to_string(e.x) + "," + std::to_string(e.y) +
                                 "): " + err.what());
      }
      if (!tile) throw MissingSourceError("entry " + std::to_string(i) + ": tile " + e.tile_code + " not found");
      raster::RasterChip sample = raster::cut_window(*tile, e.timestamps, e.x, e.y, e.window_x, e.window_y);
      if (i == 0) {
        m.sample_shape = sample.dims();
        m.dtype = sample.dtype();
        m.band_names = sample.band_names();
        m.nodata_value = sample.nodata_value();
        zarr_dtype(m.dtype);
      } else if (sample.dims() != m.sample_shape || sample.dtype() != m.dtype) {
        throw ShapeError("entry " + std::to_string(i) + " has a different sample shape or dtype");
      }
      tiles.emplace(tile->origin().tile.tile_code, tile->origin().tile);
      const auto bytes = sample_bytes_of(sample);
      m.checksums.push_back(crc32(bytes));
      m.provenance.push_back(e);
      chunk.insert(chunk.end(), bytes.begin(), bytes.end());
      if ((i + 1) % m.chunk_samples == 0) flush();
    }
    if (!chunk.empty()) flush();
    for (auto& [code, id] : tiles) m.tiles.push_back(id);

    write_text(tmp / ".zarray", zarray_json(m).dump(2));
    write_text(tmp / ".zattrs", nlohmann::ordered_json{{"manifest", "manifest.json"}}.dump(2));
    write_text(tmp / "manifest.json", m.to_json().dump(2));
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }

  // Swap: the old store is moved aside before the new one is renamed in.
  const fs::path old = parent / (out_dir.filename().string() + ".old-" + std::to_string(::getpid()));
  fs::remove_all(old);
  if (fs::exists(out_dir)) fs::rename(out_dir, old);
  fs::rename(tmp, out_dir);
  fs::remove_all(old);
  return m;
}

ChunkStore ChunkStore::open(const fs::path& dir) {
  if (!fs::exists(dir / ".zarray") || !fs::exists(dir / "manifest.json")) {
    throw IoError("no chunk store at " + dir.string());
  }
  ChunkStore s;
  s.dir_ = dir;
  nlohmann::json manifest;
  nlohmann::json zarray;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
    zarray = nlohmann::json::parse(read_text(dir / ".zarray"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("store metadata is not JSON: ") + e.what());
  }
  auto m = StoreManifest::from_json(manifest);
  if (zarray.value("zarr_format", 0) != 2 || zarray.value("order", "") != "C" ||
      !zarray.value("compressor", nlohmann::json()).is_null()) {
    throw FormatError("unsupported .zarray (need zarr_format 2, C order, no compressor)");
  }
  s.manifest_ = std::make_shared<const StoreManifest>(std::move(m));
  s.opens_ = std::make_shared<std::atomic<std::uint64_t>>(0);
  return s;
}

std::vector<std::byte> ChunkStore::read_chunk(std::size_t chunk) const {
  if (chunk >= manifest_->chunk_count()) {
    throw IndexError("chunk " + std::to_string(chunk) + " out of range");
  }
  opens_->fetch_add(1);
  auto bytes = read_file(dir_ / chunk_file_name(chunk));
  if (bytes.size() != manifest_->chunk_samples * manifest_->sample_bytes()) {
    throw CorruptionError("chunk " + std::to_string(chunk) + " has wrong size");
  }
  return bytes;
}

raster::RasterChip ChunkStore::make_sample(std::size_t i, std::span<const std::byte> bytes) const {
  const auto& m = *manifest_;
  if (crc32(bytes) != m.checksums[i]) {
    throw CorruptionError("checksum mismatch for sample " + std::to_string(i));
  }
  raster::RasterChip::Storage storage;
  if (m.dtype == raster::DType::kU16) {
    std::vector<std::uint16_t> v(m.sample_shape.count());
    std::memcpy(v.data(), bytes.data(), bytes.size());
    storage = std::move(v);
  } else {
    std::vector<float> v(m.sample_shape.count());
    std::memcpy(v.data(), bytes.data(), bytes.size());
    storage = std::move(v);
  }
  const auto& e = m.provenance[i];
  raster::TileId tile{1, 'S', e.tile_code};
  for (const auto& t : m.tiles)
    if (t.tile_code == e.tile_code) tile = t;
  return raster::RasterChip(m.sample_shape, std::move(storage), m.band_names, e.timestamps,
                            {tile, e.x, e.y}, m.nodata_value);
}

raster::RasterChip ChunkStore::sample_from_chunk(std::size_t i, std::span<const std::byte> chunk) const {
  const std::size_t within = i % manifest_->chunk_samples;
  const std::size_t n = manifest_->sample_bytes();
  return make_sample(i, chunk.subspan(within * n, n));
}

raster::RasterChip ChunkStore::read_sample(std::size_t i) const {
  const auto& m = *manifest_;
  if (i >= m.sample_count) {
    throw IndexError("sample " + std::to_string(i) + " out of range [0, " +
                     std::to_string(m.sample_count) + ")");
  }
  const std::size_t chunk = i / m.chunk_samples;
  const std::size_t n = m.sample_bytes();
  opens_->fetch_add(1);
  std::ifstream in(dir_ / chunk_file_name(chunk), std::ios::binary);
  if (!in) throw IoError("cannot open chunk " + std::to_string(chunk));
  in.seekg(static_cast<std::streamoff>((i % m.chunk_samples) * n));
  std::vector<std::byte> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (!in) throw CorruptionError("chunk " + std::to_string(chunk) + " truncated");
  return make_sample(i, bytes);
}

}  // namespace gfm::store
