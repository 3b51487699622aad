#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gfm/common/rng.hpp"
#include "gfm/nn/param_store.hpp"
#include "gfm/nn/tensor.hpp"

// Layers with hand-written backward passes. Each layer registers its
// parameters in a ParamStore at construction and keeps only pointers to them.
// forward() optionally fills a Cache; backward() consumes it, accumulates
// parameter gradients and returns the input gradient. Activations are 2-D
// [tokens, features]; feature maps are [channels, height, width].
namespace gfm::nn {

template <typename T>
void ensure_grad(Param<T>& p);

template <typename T>
class Linear {
 public:
  struct Cache {
    Tensor<T> x;
  };

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy, bool need_dx = true) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Param<T>& weight() const { return *w_; }
  Param<T>* bias() const { return b_; }

 private:
  Param<T>* w_ = nullptr;
  Param<T>* b_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Tensor<T> xhat;
    std::vector<T> rstd;
  };

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, std::size_t dim, double eps = 1e-6);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) const;

 private:
  Param<T>* gamma_ = nullptr;
  Param<T>* beta_ = nullptr;
  std::size_t dim_ = 0;
  double eps_ = 1e-6;
};

// Exact GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy);

// Row-wise softmax over the last dimension.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy);

template <typename T>
class MultiHeadAttention {
 public:
  struct Cache {
    typename Linear<T>::Cache qkv_in;
    Tensor<T> qkv;
    std::vector<Tensor<T>> weights;  // per head, [N, N]
    typename Linear<T>::Cache proj_in;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& name, std::size_t dim,
                     std::size_t heads, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) const;

  std::size_t heads() const { return heads_; }

 private:
  Linear<T> qkv_;
  Linear<T> proj_;
  std::size_t dim_ = 0;
  std::size_t heads_ = 1;
};

template <typename T>
class MlpBlock {
 public:
  struct Cache {
    typename Linear<T>::Cache fc1;
    Tensor<T> hidden;  // pre-activation
    typename Linear<T>::Cache fc2;
  };

  MlpBlock() = default;
  MlpBlock(ParamStore<T>& store, const std::string& name, std::size_t dim, std::size_t hidden,
           Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) const;

 private:
  Linear<T> fc1_;
  Linear<T> fc2_;
};

// Pre-norm block: x + attn(ln1(x)), then + mlp(ln2(.)).
template <typename T>
class TransformerBlock {
 public:
  struct Cache {
    typename LayerNorm<T>::Cache ln1;
    typename MultiHeadAttention<T>::Cache attn;
    typename LayerNorm<T>::Cache ln2;
    typename MlpBlock<T>::Cache mlp;
  };

  TransformerBlock() = default;
  TransformerBlock(ParamStore<T>& store, const std::string& name, std::size_t dim,
                   std::size_t heads, std::size_t mlp_ratio, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) const;

 private:
  LayerNorm<T> ln1_;
  MultiHeadAttention<T> attn_;
  LayerNorm<T> ln2_;
  MlpBlock<T> mlp_;
};

// Non-overlapping tubelet geometry over a (T, C, H, W) input.
struct PatchGeometry {
  std::size_t t = 1, c = 1, h = 1, w = 1;
  std::size_t pt = 1, ph = 1, pw = 1;

  void validate() const;
  std::size_t grid_t() const { return t / pt; }
  std::size_t grid_h() const { return h / ph; }
  std::size_t grid_w() const { return w / pw; }
  std::size_t tokens() const { return grid_t() * grid_h() * grid_w(); }
  // Patch vectors are ordered (c, kt, kh, kw).
  std::size_t patch_size() const { return c * pt * ph * pw; }
  std::size_t token_index(std::size_t gt, std::size_t gh, std::size_t gw) const {
    return (gt * grid_h() + gh) * grid_w() + gw;
  }
};

// Gathers the listed tokens (all when `tokens` is empty) into [n, patch_size].
template <typename T>
Tensor<T> patchify(std::span<const T> values, const PatchGeometry& g,
                   std::span<const std::size_t> tokens = {});
// Writes patch rows back into a (T, C, H, W) buffer; untouched tokens keep their values.
template <typename T>
void unpatchify_into(const Tensor<T>& patches, const PatchGeometry& g,
                     std::span<const std::size_t> tokens, std::span<T> values);
template <typename T>
std::vector<T> unpatchify(const Tensor<T>& patches, const PatchGeometry& g);

// 3-D convolution with stride equal to kernel, applied only at selected tokens.
template <typename T>
class Conv3d {
 public:
  struct Cache {
    typename Linear<T>::Cache lin;
    PatchGeometry geometry;
    std::vector<std::size_t> tokens;
  };

  Conv3d() = default;
  Conv3d(ParamStore<T>& store, const std::string& name, std::size_t channels, std::size_t kt,
         std::size_t kh, std::size_t kw, std::size_t out, Rng& rng);

  // input is (T, C, H, W) given by `dims`; output is [n_tokens, out].
  Tensor<T> forward(std::span<const T> input, const PatchGeometry& dims,
                    std::span<const std::size_t> tokens = {}, Cache* cache = nullptr) const;
  // Returns the gradient with respect to the (T, C, H, W) input when need_dx.
  std::vector<T> backward(const Cache& cache, const Tensor<T>& dy, bool need_dx = false) const;

  PatchGeometry geometry_for(std::size_t t, std::size_t h, std::size_t w) const;

 private:
  Param<T>* w_ = nullptr;
  Param<T>* b_ = nullptr;
  std::size_t channels_ = 0, kt_ = 1, kh_ = 1, kw_ = 1, out_ = 0;
};

// Transposed 2-D convolution with kernel = stride (default 2): [Cin,H,W] -> [Cout,kH,kW].
template <typename T>
class TransposeConv2d {
 public:
  struct Cache {
    Tensor<T> pixels;  // [H*W, Cin]
    std::size_t h = 0, w = 0;
  };

  TransposeConv2d() = default;
  TransposeConv2d(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                  Rng& rng, std::size_t kernel = 2);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy, bool need_dx = true) const;

 private:
  Param<T>* w_ = nullptr;  // [Cin, Cout, k, k]
  Param<T>* b_ = nullptr;
  std::size_t in_ = 0, out_ = 0, k_ = 2;
};

// Pointwise convolution: [Cin,H,W] -> [Cout,H,W].
template <typename T>
class Conv1x1 {
 public:
  struct Cache {
    typename Linear<T>::Cache lin;
    std::size_t h = 0, w = 0;
  };

  Conv1x1() = default;
  Conv1x1(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy, bool need_dx = true) const;

 private:
  Linear<T> lin_;
};

}  // namespace gfm::nn
