#include "gfm/raster/chip_io.hpp"

#include <array>
#include <cstring>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"

namespace gfm::raster {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'F', 'M', 'C'};

struct Header {
  DType dtype;
  ChipDims dims;
  std::vector<std::string> band_names;
  std::vector<std::string> timestamps;
  ChipOrigin origin;
  double nodata;
};

void put_header(ByteWriter& w, const Header& h) {
  for (char ch : kMagic) w.put(ch);
  w.put(kChipFormatVersion);
  w.put(static_cast<std::uint8_t>(h.dtype));
  w.put(h.dims.t);
  w.put(h.dims.c);
  w.put(h.dims.h);
  w.put(h.dims.w);
  for (const auto& name : h.band_names) w.put_string(name);
  for (const auto& ts : h.timestamps) w.put_string(ts);
  w.put_string(h.origin.tile.tile_code);
  w.put(static_cast<std::uint8_t>(h.origin.tile.utm_zone));
  w.put(static_cast<std::uint8_t>(h.origin.tile.lat_band));
  w.put(h.origin.x);
  w.put(h.origin.y);
  w.put(h.nodata);
}

Header get_header(ByteReader& r) {
  Header h{};
  std::array<char, 4> magic{};
  try {
    for (char& ch : magic) ch = r.get<char>();
  } catch (const CorruptionError&) {
    throw FormatError("file too short for chip header");
  }
  if (magic != kMagic) throw FormatError("bad magic bytes, not a chip file");
  const auto version = r.get<std::uint16_t>();
  if (version != kChipFormatVersion) {
    throw FormatError("unsupported chip format version " + std::to_string(version));
  }
  const auto dtype = r.get<std::uint8_t>();
  if (dtype > 2) throw FormatError("unknown dtype code " + std::to_string(dtype));
  h.dtype = static_cast<DType>(dtype);
  h.dims.t = r.get<std::uint32_t>();
  h.dims.c = r.get<std::uint32_t>();
  h.dims.h = r.get<std::uint32_t>();
  h.dims.w = r.get<std::uint32_t>();
  if (h.dims.t == 0 || h.dims.c == 0) throw FormatError("header declares an empty T or C axis");
  for (std::uint32_t i = 0; i < h.dims.c; ++i) h.band_names.push_back(r.get_string());
  for (std::uint32_t i = 0; i < h.dims.t; ++i) h.timestamps.push_back(r.get_string());
  h.origin.tile.tile_code = r.get_string();
  h.origin.tile.utm_zone = r.get<std::uint8_t>();
  h.origin.tile.lat_band = static_cast<char>(r.get<std::uint8_t>());
  h.origin.x = r.get<std::uint32_t>();
  h.origin.y = r.get<std::uint32_t>();
  h.nodata = r.get<double>();
  return h;
}

template <typename T>
std::vector<T> get_payload(ByteReader& r, std::size_t count) {
  if (r.remaining() != count * sizeof(T)) {
    throw CorruptionError("payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(count * sizeof(T)));
  }
  std::vector<T> out(count);
  auto bytes = r.get_bytes(count * sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

std::vector<std::byte> encode_chip(const RasterChip& chip) {
  ByteWriter w;
  put_header(w, {chip.dtype(), chip.dims(), chip.band_names(), chip.timestamps(), chip.origin(),
                 chip.nodata_value()});
  std::visit([&](const auto& v) { w.put_bytes(std::as_bytes(std::span(v))); }, chip.storage());
  return w.bytes();
}

RasterChip decode_chip(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  Header h = get_header(r);
  RasterChip::Storage storage;
  switch (h.dtype) {
    case DType::kU16: storage = get_payload<std::uint16_t>(r, h.dims.count()); break;
    case DType::kF32: storage = get_payload<float>(r, h.dims.count()); break;
    default: throw FormatError("dtype code 2 (u8) denotes a quality mask, not a chip");
  }
  try {
    return RasterChip(h.dims, std::move(storage), std::move(h.band_names),
                      std::move(h.timestamps), std::move(h.origin), h.nodata);
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid chip header: ") + e.what());
  }
}

void write_chip(const RasterChip& chip, const std::filesystem::path& path) {
  write_file(path, encode_chip(chip));
}

RasterChip read_chip(const std::filesystem::path& path) { return decode_chip(read_file(path)); }

std::vector<std::byte> encode_quality_masks(std::span<const QualityMask> masks) {
  if (masks.empty()) throw ArgumentError("no quality masks to encode");
  const auto& first = masks.front();
  Header h{DType::kU8, {static_cast<std::uint32_t>(masks.size()), 1, first.height, first.width},
           {"FMASK"}, {}, first.origin, static_cast<double>(kNoData)};
  for (const auto& m : masks) {
    m.validate();
    if (m.height != first.height || m.width != first.width) {
      throw ShapeError("quality masks differ in dims");
    }
    h.timestamps.push_back(m.timestamp);
  }
  ByteWriter w;
  put_header(w, h);
  for (const auto& m : masks) w.put_bytes(std::as_bytes(std::span(m.codes)));
  return w.bytes();
}

std::vector<QualityMask> decode_quality_masks(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  Header h = get_header(r);
  if (h.dtype != DType::kU8 || h.dims.c != 1) {
    throw FormatError("not a quality mask file (needs dtype 2 and C = 1)");
  }
  auto codes = get_payload<std::uint8_t>(r, h.dims.count());
  const std::size_t plane = std::size_t{h.dims.h} * h.dims.w;
  std::vector<QualityMask> out;
  for (std::uint32_t t = 0; t < h.dims.t; ++t) {
    QualityMask m{h.dims.h, h.dims.w,
                  std::vector<std::uint8_t>(codes.begin() + t * plane,
                                            codes.begin() + (t + 1) * plane),
                  h.origin, h.timestamps[t]};
    m.validate();
    out.push_back(std::move(m));
  }
  return out;
}

void write_quality_masks(std::span<const QualityMask> masks, const std::filesystem::path& path) {
  write_file(path, encode_quality_masks(masks));
}

std::vector<QualityMask> read_quality_masks(const std::filesystem::path& path) {
  return decode_quality_masks(read_file(path));
}

}  // namespace gfm::raster
