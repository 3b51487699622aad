#include "gfm/mae/preview.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "gfm/common/error.hpp"

namespace gfm::mae {

void write_rgb_preview(const raster::RasterChip& chip, std::size_t timestep,
                       const std::filesystem::path& path,
                       const std::array<std::string, 3>& bands, double max_reflectance) {
  const auto d = chip.dims();
  if (timestep >= d.t) throw IndexError("preview: timestep out of range");
  if (!(max_reflectance > 0.0)) throw ArgumentError("preview: max_reflectance must be > 0");
  std::array<std::size_t, 3> idx{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& names = chip.band_names();
    auto it = std::find(names.begin(), names.end(), bands[k]);
    if (it == names.end()) throw ArgumentError("preview: chip has no band " + bands[k]);
    idx[k] = static_cast<std::size_t>(it - names.begin());
  }
  const auto values = chip.to_float();
  std::vector<png_byte> rgb(d.h * d.w * 3);
  for (std::size_t y = 0; y < d.h; ++y) {
    for (std::size_t x = 0; x < d.w; ++x) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double v = values[d.offset(timestep, idx[k], y, x)];
        const double s = std::isfinite(v) ? std::clamp(v / max_reflectance, 0.0, 1.0) : 0.0;
        rgb[(y * d.w + x) * 3 + k] = static_cast<png_byte>(std::lround(s * 255.0));
      }
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("preview: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("preview: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("preview: failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(d.w), static_cast<png_uint_32>(d.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < d.h; ++y) png_write_row(png, rgb.data() + y * d.w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace gfm::mae
