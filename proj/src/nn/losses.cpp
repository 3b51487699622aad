#include "gfm/nn/losses.hpp"

#include <cmath>

namespace gfm::nn {

namespace {

template <typename T>
void check_pairs(std::span<const Tensor<T>> a, std::span<const Tensor<T>> b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.size()) + " predictions vs " +
                     std::to_string(b.size()) + " targets");
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i].require_same_shape(b[i], what);
}

template <typename T>
void check_segmentation(std::span<const Tensor<T>> logits,
                        std::span<const std::vector<std::uint8_t>> labels, int ignore_label,
                        const char* what) {
  if (logits.size() != labels.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(logits.size()) +
                     " logit maps vs " + std::to_string(labels.size()) + " label maps");
  }
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const auto& z = logits[s];
    if (z.rank() != 3 || z.dim(0) < 1) {
      throw ShapeError(std::string(what) + ": logits " + shape_str(z.shape()) +
                       " are not [K,H,W]");
    }
    if (labels[s].size() != z.dim(1) * z.dim(2)) {
      throw ShapeError(std::string(what) + ": " + std::to_string(labels[s].size()) +
                       " labels vs logits " + shape_str(z.shape()));
    }
    for (auto y : labels[s]) {
      if (static_cast<int>(y) != ignore_label && y >= z.dim(0)) {
        throw LabelError(std::string(what) + ": label " + std::to_string(y) + " outside [0," +
                         std::to_string(z.dim(0)) + ")");
      }
    }
  }
}

template <typename T>
std::vector<Tensor<T>> zeros_like(std::span<const Tensor<T>> ts) {
  std::vector<Tensor<T>> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.emplace_back(t.shape());
  return out;
}

// Softmax over the channel axis of a [K, H*W] map at pixel q.
template <typename T>
void pixel_softmax(const T* z, std::size_t k, std::size_t hw, std::size_t q, std::vector<T>& p) {
  T mx = z[q];
  for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, z[c * hw + q]);
  T sum{};
  for (std::size_t c = 0; c < k; ++c) {
    p[c] = std::exp(z[c * hw + q] - mx);
    sum += p[c];
  }
  for (std::size_t c = 0; c < k; ++c) p[c] /= sum;
}

}  // namespace

template <typename T>
LossResult<T> masked_mse(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                         std::span<const std::vector<std::size_t>> masked_rows) {
  check_pairs(pred, target, "masked_mse");
  if (masked_rows.size() != pred.size()) throw ShapeError("masked_mse: one mask per sample");
  std::size_t count = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    for (auto r : masked_rows[s]) {
      if (r >= pred[s].rows()) throw IndexError("masked_mse: row " + std::to_string(r));
    }
    count += masked_rows[s].size() * pred[s].cols();
  }
  if (count == 0) throw DegenerateInputError("masked_mse: mask is empty");
  LossResult<T> out;
  out.grads = zeros_like(pred);
  double sse = 0.0;
  const T scale = static_cast<T>(2.0 / static_cast<double>(count));
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const std::size_t p = pred[s].cols();
    for (auto r : masked_rows[s]) {
      const T* a = pred[s].data() + r * p;
      const T* b = target[s].data() + r * p;
      T* g = out.grads[s].data() + r * p;
      for (std::size_t j = 0; j < p; ++j) {
        const T d = a[j] - b[j];
        sse += static_cast<double>(d) * static_cast<double>(d);
        g[j] = scale * d;
      }
    }
  }
  out.value = static_cast<T>(sse / static_cast<double>(count));
  return out;
}

template <typename T>
LossResult<T> masked_rmse(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                          std::span<const Tensor<T>> mask) {
  check_pairs(pred, target, "masked_rmse");
  check_pairs(pred, mask, "masked_rmse mask");
  std::size_t count = 0;
  double sse = 0.0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      if (mask[s][i] == T{}) continue;
      const double d = static_cast<double>(pred[s][i]) - static_cast<double>(target[s][i]);
      sse += d * d;
      ++count;
    }
  }
  if (count == 0) throw DegenerateInputError("masked_rmse: mask is empty");
  LossResult<T> out;
  const double rmse = std::sqrt(sse / static_cast<double>(count));
  out.value = static_cast<T>(rmse);
  out.grads = zeros_like(pred);
  if (rmse > 0.0) {
    const T scale = static_cast<T>(1.0 / (static_cast<double>(count) * rmse));
    for (std::size_t s = 0; s < pred.size(); ++s) {
      for (std::size_t i = 0; i < pred[s].size(); ++i) {
        if (mask[s][i] != T{}) out.grads[s][i] = scale * (pred[s][i] - target[s][i]);
      }
    }
  }
  return out;
}

template <typename T>
LossResult<T> masked_mae(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                         std::span<const Tensor<T>> mask) {
  check_pairs(pred, target, "masked_mae");
  check_pairs(pred, mask, "masked_mae mask");
  std::size_t count = 0;
  for (const auto& m : mask) {
    for (T v : m.values()) count += v != T{};
  }
  if (count == 0) throw DegenerateInputError("masked_mae: mask is empty");
  LossResult<T> out;
  out.grads = zeros_like(pred);
  const T inv = static_cast<T>(1.0 / static_cast<double>(count));
  double sae = 0.0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      if (mask[s][i] == T{}) continue;
      const T d = pred[s][i] - target[s][i];
      sae += std::abs(static_cast<double>(d));
      out.grads[s][i] = d > T{} ? inv : (d < T{} ? -inv : T{});
    }
  }
  out.value = static_cast<T>(sae / static_cast<double>(count));
  return out;
}

template <typename T>
LossResult<T> weighted_cross_entropy(std::span<const Tensor<T>> logits,
                                     std::span<const std::vector<std::uint8_t>> labels,
                                     std::span<const double> class_weights, int ignore_label) {
  check_segmentation(logits, labels, ignore_label, "weighted_cross_entropy");
  if (logits.empty()) throw DegenerateInputError("weighted_cross_entropy: empty batch");
  const std::size_t k = logits[0].dim(0);
  std::vector<double> w(k, 1.0);
  if (!class_weights.empty()) {
    if (class_weights.size() != k) {
      throw ShapeError("weighted_cross_entropy: " + std::to_string(class_weights.size()) +
                       " weights for " + std::to_string(k) + " classes");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (!(class_weights[c] >= 0.0) || !std::isfinite(class_weights[c])) {
        throw ArgumentError("weighted_cross_entropy: class weights must be finite and >= 0");
      }
      sum += class_weights[c];
    }
    if (sum <= 0.0) throw ArgumentError("weighted_cross_entropy: class weights sum to zero");
    for (std::size_t c = 0; c < k; ++c) w[c] = class_weights[c] * static_cast<double>(k) / sum;
  }
  double wsum = 0.0;
  for (const auto& lab : labels) {
    for (auto y : lab) {
      if (static_cast<int>(y) != ignore_label) wsum += w[y];
    }
  }
  if (wsum <= 0.0) throw DegenerateInputError("weighted_cross_entropy: no weighted labels");
  LossResult<T> out;
  out.grads = zeros_like(logits);
  double total = 0.0;
  std::vector<T> p(k);
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const std::size_t hw = labels[s].size();
    const T* z = logits[s].data();
    T* g = out.grads[s].data();
    for (std::size_t q = 0; q < hw; ++q) {
      const int y = labels[s][q];
      if (y == ignore_label) continue;
      pixel_softmax(z, k, hw, q, p);
      const double py = std::max(static_cast<double>(p[y]), 1e-300);
      total += w[y] * -std::log(py);
      const T scale = static_cast<T>(w[y] / wsum);
      for (std::size_t c = 0; c < k; ++c) {
        g[c * hw + q] = scale * (p[c] - (static_cast<int>(c) == y ? T(1) : T(0)));
      }
    }
  }
  out.value = static_cast<T>(total / wsum);
  return out;
}

template <typename T>
LossResult<T> dice_loss(std::span<const Tensor<T>> logits,
                        std::span<const std::vector<std::uint8_t>> labels, int ignore_label,
                        double smooth) {
  check_segmentation(logits, labels, ignore_label, "dice_loss");
  if (logits.empty()) throw DegenerateInputError("dice_loss: empty batch");
  const std::size_t k = logits[0].dim(0);
  std::vector<double> inter(k, 0.0), psum(k, 0.0), ysum(k, 0.0);
  std::vector<std::vector<T>> probs(logits.size());
  std::vector<T> p(k);
  std::size_t valid = 0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const std::size_t hw = labels[s].size();
    probs[s].assign(k * hw, T{});
    for (std::size_t q = 0; q < hw; ++q) {
      const int y = labels[s][q];
      if (y == ignore_label) continue;
      ++valid;
      pixel_softmax(logits[s].data(), k, hw, q, p);
      for (std::size_t c = 0; c < k; ++c) {
        probs[s][c * hw + q] = p[c];
        psum[c] += p[c];
      }
      inter[y] += p[y];
      ysum[y] += 1.0;
    }
  }
  if (valid == 0) throw DegenerateInputError("dice_loss: no labelled pixels");
  double mean_dice = 0.0;
  std::vector<double> num(k), den(k);
  for (std::size_t c = 0; c < k; ++c) {
    num[c] = 2.0 * inter[c] + smooth;
    den[c] = psum[c] + ysum[c] + smooth;
    mean_dice += num[c] / den[c];
  }
  mean_dice /= static_cast<double>(k);
  LossResult<T> out;
  out.value = static_cast<T>(1.0 - mean_dice);
  out.grads = zeros_like(logits);
  std::vector<T> dp(k);
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const std::size_t hw = labels[s].size();
    T* g = out.grads[s].data();
    for (std::size_t q = 0; q < hw; ++q) {
      const int y = labels[s][q];
      if (y == ignore_label) continue;
      T dot{};
      for (std::size_t c = 0; c < k; ++c) {
        const double yk = static_cast<int>(c) == y ? 1.0 : 0.0;
        dp[c] = static_cast<T>(-(2.0 * yk * den[c] - num[c]) / (den[c] * den[c]) /
                               static_cast<double>(k));
        dot += dp[c] * probs[s][c * hw + q];
      }
      for (std::size_t c = 0; c < k; ++c) {
        g[c * hw + q] = probs[s][c * hw + q] * (dp[c] - dot);
      }
    }
  }
  return out;
}

#define GFM_INSTANTIATE(T)                                                                    \
  template LossResult<T> masked_mse<T>(std::span<const Tensor<T>>, std::span<const Tensor<T>>, \
                                       std::span<const std::vector<std::size_t>>);            \
  template LossResult<T> masked_rmse<T>(std::span<const Tensor<T>>,                           \
                                        std::span<const Tensor<T>>,                           \
                                        std::span<const Tensor<T>>);                          \
  template LossResult<T> masked_mae<T>(std::span<const Tensor<T>>, std::span<const Tensor<T>>, \
                                       std::span<const Tensor<T>>);                           \
  template LossResult<T> weighted_cross_entropy<T>(                                           \
      std::span<const Tensor<T>>, std::span<const std::vector<std::uint8_t>>,                 \
      std::span<const double>, int);                                                          \
  template LossResult<T> dice_loss<T>(std::span<const Tensor<T>>,                             \
                                      std::span<const std::vector<std::uint8_t>>, int, double);

GFM_INSTANTIATE(float)
GFM_INSTANTIATE(double)

#undef GFM_INSTANTIATE

}  // namespace gfm::nn
