#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfm/nn/layers.hpp"
#include "gfm/nn/losses.hpp"
#include "support/grad_harness.hpp"

// Randomized finite-difference instances for every nn-core operation. Each
// function builds one instance from `seed` and returns the worst relative error.
namespace gfm::testing::grad {

using namespace gfm::nn;

inline std::size_t small_dim(Rng& rng) { return 3 + rng.uniform_int(5); }

inline Tensor<double> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  const auto n = shape_count(shape);
  return Tensor<double>(std::move(shape), random_values(rng, n, scale));
}

inline GradReport grad_linear(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = small_dim(rng), in = small_dim(rng), out = small_dim(rng);
  ParamStore<double> store;
  Linear<double> lin(store, "l", in, out, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {n, in});
  auto r = random_values(rng, n * out);
  Linear<double>::Cache cache;
  lin.forward(x, &cache);
  store.zero_grad();
  auto dx = lin.backward(cache, Tensor<double>({n, out}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(lin.forward(x).values(), r); }, targets);
}

inline GradReport grad_layer_norm(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = small_dim(rng), d = small_dim(rng);
  ParamStore<double> store;
  LayerNorm<double> ln(store, "n", d);
  randomize(store, rng);
  auto x = random_tensor(rng, {n, d});
  auto r = random_values(rng, n * d);
  LayerNorm<double>::Cache cache;
  ln.forward(x, &cache);
  store.zero_grad();
  auto dx = ln.backward(cache, Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(ln.forward(x).values(), r); }, targets);
}

inline GradReport grad_gelu(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = small_dim(rng), d = small_dim(rng);
  auto x = random_tensor(rng, {n, d}, 2.0);
  auto r = random_values(rng, n * d);
  auto dx = gelu_backward(x, Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  return check_gradients([&] { return project(gelu(x).values(), r); }, targets);
}

inline GradReport grad_softmax(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = small_dim(rng), d = small_dim(rng);
  auto x = random_tensor(rng, {n, d}, 2.0);
  auto r = random_values(rng, n * d);
  auto dx = softmax_backward(softmax(x), Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  return check_gradients([&] { return project(softmax(x).values(), r); }, targets);
}

inline GradReport grad_multi_head_attention(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t heads = 1 + rng.uniform_int(3);
  const std::size_t d = heads * (1 + rng.uniform_int(3)), n = small_dim(rng);
  ParamStore<double> store;
  MultiHeadAttention<double> attn(store, "a", d, heads, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {n, d});
  auto r = random_values(rng, n * d);
  MultiHeadAttention<double>::Cache cache;
  attn.forward(x, &cache);
  store.zero_grad();
  auto dx = attn.backward(cache, Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(attn.forward(x).values(), r); }, targets);
}

inline GradReport grad_mlp_block(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = small_dim(rng), d = small_dim(rng), hidden = small_dim(rng);
  ParamStore<double> store;
  MlpBlock<double> mlp(store, "m", d, hidden, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {n, d});
  auto r = random_values(rng, n * d);
  MlpBlock<double>::Cache cache;
  mlp.forward(x, &cache);
  store.zero_grad();
  auto dx = mlp.backward(cache, Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(mlp.forward(x).values(), r); }, targets);
}

inline GradReport grad_transformer_block(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t heads = 1 + rng.uniform_int(2);
  const std::size_t d = heads * (2 + rng.uniform_int(2)), n = small_dim(rng);
  ParamStore<double> store;
  TransformerBlock<double> block(store, "b", d, heads, 2, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {n, d});
  auto r = random_values(rng, n * d);
  TransformerBlock<double>::Cache cache;
  block.forward(x, &cache);
  store.zero_grad();
  auto dx = block.backward(cache, Tensor<double>({n, d}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(block.forward(x).values(), r); }, targets);
}

inline GradReport grad_conv3d(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t c = 1 + rng.uniform_int(3), pt = 1 + rng.uniform_int(2);
  const std::size_t ph = 1 + rng.uniform_int(3), pw = 1 + rng.uniform_int(3);
  const std::size_t t = pt * (1 + rng.uniform_int(2)), h = ph * 2, w = pw * 2;
  const std::size_t out = small_dim(rng);
  ParamStore<double> store;
  Conv3d<double> conv(store, "pe", c, pt, ph, pw, out, rng);
  randomize(store, rng);
  auto g = conv.geometry_for(t, h, w);
  auto input = random_values(rng, t * c * h * w);
  std::vector<std::size_t> tokens;
  for (std::size_t k = 0; k < g.tokens(); ++k) {
    if (k == 0 || rng.uniform() < 0.6) tokens.push_back(k);
  }
  auto r = random_values(rng, tokens.size() * out);
  Conv3d<double>::Cache cache;
  conv.forward(input, g, tokens, &cache);
  store.zero_grad();
  auto dx = conv.backward(cache, Tensor<double>({tokens.size(), out}, r), true);
  std::vector<GradTarget> targets{{"input", input, dx}};
  add_param_targets(store, targets);
  return check_gradients(
      [&] { return project(conv.forward(input, g, tokens).values(), r); }, targets);
}

inline GradReport grad_transpose_conv2d(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = small_dim(rng), out = small_dim(rng);
  const std::size_t h = small_dim(rng), w = small_dim(rng);
  ParamStore<double> store;
  TransposeConv2d<double> up(store, "up", in, out, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {in, h, w});
  auto r = random_values(rng, out * 4 * h * w);
  TransposeConv2d<double>::Cache cache;
  up.forward(x, &cache);
  store.zero_grad();
  auto dx = up.backward(cache, Tensor<double>({out, 2 * h, 2 * w}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(up.forward(x).values(), r); }, targets);
}

inline GradReport grad_conv1x1(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = small_dim(rng), out = small_dim(rng);
  const std::size_t h = small_dim(rng), w = small_dim(rng);
  ParamStore<double> store;
  Conv1x1<double> head(store, "head", in, out, rng);
  randomize(store, rng);
  auto x = random_tensor(rng, {in, h, w});
  auto r = random_values(rng, out * h * w);
  Conv1x1<double>::Cache cache;
  head.forward(x, &cache);
  store.zero_grad();
  auto dx = head.backward(cache, Tensor<double>({out, h, w}, r));
  std::vector<GradTarget> targets{{"x", x.values(), dx.storage()}};
  add_param_targets(store, targets);
  return check_gradients([&] { return project(head.forward(x).values(), r); }, targets);
}

// Loss gradient checks over a batch of two samples.
template <typename LossFn>
inline GradReport check_loss(Rng& rng, std::vector<Tensor<double>>& pred, LossFn&& loss) {
  auto result = loss();
  std::vector<GradTarget> targets;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    targets.push_back({"pred" + std::to_string(s), pred[s].values(), result.grads[s].storage()});
  }
  (void)rng;
  return check_gradients([&] { return static_cast<double>(loss().value); }, targets);
}

inline GradReport grad_masked_mse(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> pred, target;
  std::vector<std::vector<std::size_t>> masked(2);
  for (int s = 0; s < 2; ++s) {
    const std::size_t n = small_dim(rng), p = small_dim(rng);
    pred.push_back(random_tensor(rng, {n, p}));
    target.push_back(random_tensor(rng, {n, p}));
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 0 || rng.uniform() < 0.5) masked[s].push_back(i);
    }
  }
  return check_loss(rng, pred, [&] {
    return masked_mse<double>(pred, target, masked);
  });
}

inline std::vector<Tensor<double>> random_masks(Rng& rng, const std::vector<Tensor<double>>& like) {
  std::vector<Tensor<double>> masks;
  for (const auto& t : like) {
    Tensor<double> m(t.shape());
    for (auto& v : m.values()) v = rng.uniform() < 0.6 ? 1.0 : 0.0;
    m[0] = 1.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

inline GradReport grad_rmse_mae(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> pred, target;
  for (int s = 0; s < 2; ++s) {
    const std::size_t n = small_dim(rng), p = small_dim(rng);
    pred.push_back(random_tensor(rng, {n, p}));
    target.push_back(random_tensor(rng, {n, p}));
  }
  auto masks = random_masks(rng, pred);
  auto a = check_loss(rng, pred, [&] { return masked_rmse<double>(pred, target, masks); });
  auto b = check_loss(rng, pred, [&] { return masked_mae<double>(pred, target, masks); });
  return a.worst >= b.worst ? a : b;
}

inline std::vector<std::vector<std::uint8_t>> random_labels(Rng& rng,
                                                     const std::vector<Tensor<double>>& logits,
                                                     bool with_ignored) {
  std::vector<std::vector<std::uint8_t>> labels;
  for (const auto& z : logits) {
    std::vector<std::uint8_t> lab(z.dim(1) * z.dim(2));
    for (auto& y : lab) {
      y = with_ignored && rng.uniform() < 0.2 ? 255
                                              : static_cast<std::uint8_t>(rng.uniform_int(z.dim(0)));
    }
    lab[0] = 0;
    labels.push_back(std::move(lab));
  }
  return labels;
}

inline std::vector<Tensor<double>> random_logits(Rng& rng, std::size_t batch) {
  const std::size_t k = 2 + rng.uniform_int(3);
  std::vector<Tensor<double>> logits;
  for (std::size_t s = 0; s < batch; ++s) {
    logits.push_back(random_tensor(rng, {k, small_dim(rng), small_dim(rng)}, 2.0));
  }
  return logits;
}

inline GradReport grad_weighted_cross_entropy(std::uint64_t seed) {
  Rng rng(seed);
  auto logits = random_logits(rng, 2);
  auto labels = random_labels(rng, logits, true);
  std::vector<double> w(logits[0].dim(0));
  for (auto& v : w) v = 0.2 + rng.uniform() * 3.0;
  return check_loss(rng, logits, [&] {
    return weighted_cross_entropy<double>(logits, labels, w, 255);
  });
}

inline GradReport grad_dice_loss(std::uint64_t seed) {
  Rng rng(seed);
  auto logits = random_logits(rng, 2);
  auto labels = random_labels(rng, logits, true);
  return check_loss(rng, logits, [&] { return dice_loss<double>(logits, labels, 255); });
}

struct Case {
  const char* name;
  GradReport (*run)(std::uint64_t seed);
};

inline const std::vector<Case>& nn_cases() {
  static const std::vector<Case> kCases{
      {"linear", grad_linear},
      {"layer_norm", grad_layer_norm},
      {"gelu", grad_gelu},
      {"softmax", grad_softmax},
      {"multi_head_attention", grad_multi_head_attention},
      {"mlp_block", grad_mlp_block},
      {"transformer_block", grad_transformer_block},
      {"conv3d", grad_conv3d},
      {"transpose_conv2d", grad_transpose_conv2d},
      {"conv1x1", grad_conv1x1},
      {"masked_mse", grad_masked_mse},
      {"masked_rmse_mae", grad_rmse_mae},
      {"weighted_cross_entropy", grad_weighted_cross_entropy},
      {"dice_loss", grad_dice_loss},
  };
  return kCases;
}

}  // namespace gfm::testing::grad
