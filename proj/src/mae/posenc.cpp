#include "gfm/mae/posenc.hpp"

#include <cmath>

namespace gfm::mae {

PosencSplit posenc_split(std::size_t dim) {
  if (dim == 0 || dim % 16 != 0) {
    throw ConfigError("positional encoding dim " + std::to_string(dim) +
                      " is not divisible by 16");
  }
  PosencSplit s;
  s.time = (dim / 4) & ~std::size_t{1};
  const std::size_t rest = dim - s.time;
  s.height = (rest / 2) & ~std::size_t{1};
  s.width = rest - s.height;
  return s;
}

namespace {

void encode_axis(double pos, std::size_t width, double* out) {
  for (std::size_t i = 0; i < width / 2; ++i) {
    const double omega = 1.0 / std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                                     static_cast<double>(width));
    out[2 * i] = std::sin(pos * omega);
    out[2 * i + 1] = std::cos(pos * omega);
  }
}

}  // namespace

nn::Tensor<double> posenc_3d(std::size_t grid_t, std::size_t grid_h, std::size_t grid_w,
                             std::size_t dim) {
  const PosencSplit s = posenc_split(dim);
  nn::Tensor<double> out({grid_t * grid_h * grid_w, dim});
  std::size_t row = 0;
  for (std::size_t t = 0; t < grid_t; ++t) {
    for (std::size_t y = 0; y < grid_h; ++y) {
      for (std::size_t x = 0; x < grid_w; ++x, ++row) {
        double* r = out.data() + row * dim;
        encode_axis(static_cast<double>(t), s.time, r);
        encode_axis(static_cast<double>(y), s.height, r + s.time);
        encode_axis(static_cast<double>(x), s.width, r + s.time + s.height);
      }
    }
  }
  return out;
}

}  // namespace gfm::mae
