#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfm/nn/tensor.hpp"

// Batched losses. Each takes per-sample tensors and returns the scalar loss
// with one gradient tensor per sample. Reductions are global over the batch.
namespace gfm::nn {

template <typename T>
struct LossResult {
  T value{};
  std::vector<Tensor<T>> grads;
};

// Mean squared error over the listed rows (tokens) only.
template <typename T>
LossResult<T> masked_mse(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                         std::span<const std::vector<std::size_t>> masked_rows);

// RMSE and mean absolute error over elements whose weight is nonzero.
template <typename T>
LossResult<T> masked_rmse(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                          std::span<const Tensor<T>> mask);
template <typename T>
LossResult<T> masked_mae(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                         std::span<const Tensor<T>> mask);

// logits are [K, H, W]; labels are H*W class ids. Weights (empty = uniform) are
// rescaled to mean 1; the loss is sum(w_y * nll) / sum(w_y) over labelled pixels.
template <typename T>
LossResult<T> weighted_cross_entropy(std::span<const Tensor<T>> logits,
                                     std::span<const std::vector<std::uint8_t>> labels,
                                     std::span<const double> class_weights,
                                     int ignore_label = 255);

// 1 - mean over classes of soft dice, pooled across the batch.
template <typename T>
LossResult<T> dice_loss(std::span<const Tensor<T>> logits,
                        std::span<const std::vector<std::uint8_t>> labels, int ignore_label = 255,
                        double smooth = 1.0);

}  // namespace gfm::nn
