#pragma once

#include <cstddef>

#include "gfm/nn/tensor.hpp"

namespace gfm::mae {

struct PosencSplit {
  std::size_t time = 0, height = 0, width = 0;
};

// Dimension split [time | height | width]; requires dim % 16 == 0.
PosencSplit posenc_split(std::size_t dim);

// Fixed 3-D sine-cosine encoding, one row per token in (t, h, w) row-major order.
nn::Tensor<double> posenc_3d(std::size_t grid_t, std::size_t grid_h, std::size_t grid_w,
                             std::size_t dim);

}  // namespace gfm::mae
