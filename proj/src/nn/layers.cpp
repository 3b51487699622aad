#include "gfm/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "gfm/nn/kernels.hpp"

namespace gfm::nn {

namespace {

void require_cols(const Shape& shape, std::size_t cols, const char* what) {
  if (shape.size() != 2 || shape[1] != cols) {
    throw ShapeError(std::string(what) + ": input " + shape_str(shape) + " vs expected [N," +
                     std::to_string(cols) + "]");
  }
}

void require_map(const Shape& shape, std::size_t channels, const char* what) {
  if (shape.size() != 3 || shape[0] != channels) {
    throw ShapeError(std::string(what) + ": input " + shape_str(shape) + " vs expected [" +
                     std::to_string(channels) + ",H,W]");
  }
}

template <typename T>
void init_weight(Param<T>& p, Rng& rng) {
  init_trunc_normal(p.value, rng);
}

}  // namespace

template <typename T>
void ensure_grad(Param<T>& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor<T>(p.value.shape());
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                  Rng& rng, bool bias)
    : in_(in), out_(out) {
  w_ = &store.add(name + ".weight", {out, in}, true);
  init_weight(*w_, rng);
  if (bias) b_ = &store.add(name + ".bias", {out}, false);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Cache* cache) const {
  require_cols(x.shape(), in_, "linear");
  const std::size_t n = x.rows();
  Tensor<T> y({n, out_});
  kernels::linear_forward(x.data(), n, in_, w_->value.data(), b_ ? b_->value.data() : nullptr,
                          out_, y.data());
  if (cache) cache->x = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Cache& cache, const Tensor<T>& dy, bool need_dx) const {
  require_cols(dy.shape(), out_, "linear backward");
  const std::size_t n = cache.x.rows();
  if (dy.rows() != n) {
    throw ShapeError("linear backward: dy " + shape_str(dy.shape()) + " vs input " +
                     shape_str(cache.x.shape()));
  }
  ensure_grad(*w_);
  if (b_) ensure_grad(*b_);
  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>({n, in_});
  kernels::linear_backward(cache.x.data(), dy.data(), n, in_, out_, w_->value.data(),
                           need_dx ? dx.data() : nullptr, w_->grad.data(),
                           b_ ? b_->grad.data() : nullptr);
  return dx;
}

// ---------------------------------------------------------------- LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(ParamStore<T>& store, const std::string& name, std::size_t dim, double eps)
    : dim_(dim), eps_(eps) {
  gamma_ = &store.add(name + ".weight", {dim}, false);
  gamma_->value.fill(T(1));
  beta_ = &store.add(name + ".bias", {dim}, false);
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x, Cache* cache) const {
  require_cols(x.shape(), dim_, "layer_norm");
  const std::size_t n = x.rows();
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> rstd(n);
  const T* g = gamma_->value.data();
  const T* b = beta_->value.data();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    T mean{};
    for (T v : row) mean += v;
    mean /= static_cast<T>(dim_);
    T var{};
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(dim_);
    const T r = T(1) / std::sqrt(var + static_cast<T>(eps_));
    rstd[i] = r;
    auto xh = xhat.row(i);
    auto yr = y.row(i);
    for (std::size_t k = 0; k < dim_; ++k) {
      xh[k] = (row[k] - mean) * r;
      yr[k] = xh[k] * g[k] + b[k];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
Tensor<T> LayerNorm<T>::backward(const Cache& cache, const Tensor<T>& dy) const {
  cache.xhat.require_same_shape(dy, "layer_norm backward");
  ensure_grad(*gamma_);
  ensure_grad(*beta_);
  const std::size_t n = dy.rows();
  Tensor<T> dx(dy.shape());
  const T* g = gamma_->value.data();
  T* dg = gamma_->grad.data();
  T* db = beta_->grad.data();
  std::vector<T> dxh(dim_);
  for (std::size_t i = 0; i < n; ++i) {
    auto dyr = dy.row(i);
    auto xh = cache.xhat.row(i);
    T mean_d{}, mean_dx{};
    for (std::size_t k = 0; k < dim_; ++k) {
      dg[k] += dyr[k] * xh[k];
      db[k] += dyr[k];
      dxh[k] = dyr[k] * g[k];
      mean_d += dxh[k];
      mean_dx += dxh[k] * xh[k];
    }
    mean_d /= static_cast<T>(dim_);
    mean_dx /= static_cast<T>(dim_);
    auto dxr = dx.row(i);
    const T r = cache.rstd[i];
    for (std::size_t k = 0; k < dim_; ++k) dxr[k] = r * (dxh[k] - mean_d - xh[k] * mean_dx);
  }
  return dx;
}

// ---------------------------------------------------------------- GELU / softmax

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  }
  return y;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  x.require_same_shape(dy, "gelu backward");
  Tensor<T> dx(x.shape());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  const T inv_sqrt2pi = static_cast<T>(1.0 / std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
    const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
    dx[i] = dy[i] * (cdf + v * pdf);
  }
  return dx;
}

namespace {

template <typename T>
void softmax_row(T* row, std::size_t n) {
  T mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  T sum{};
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  const T inv = T(1) / sum;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

template <typename T>
void softmax_row_backward(const T* y, const T* dy, T* dx, std::size_t n) {
  const T s = kernels::dot(y, dy, n);
  for (std::size_t j = 0; j < n; ++j) dx[j] = y[j] * (dy[j] - s);
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() == 0 || x.empty()) throw ShapeError("softmax: empty input " + shape_str(x.shape()));
  Tensor<T> y = x;
  const std::size_t cols = x.shape().back();
  for (std::size_t r = 0; r < x.size() / cols; ++r) softmax_row(y.data() + r * cols, cols);
  return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  y.require_same_shape(dy, "softmax backward");
  Tensor<T> dx(y.shape());
  const std::size_t cols = y.shape().back();
  for (std::size_t r = 0; r < y.size() / cols; ++r) {
    softmax_row_backward(y.data() + r * cols, dy.data() + r * cols, dx.data() + r * cols, cols);
  }
  return dx;
}

// ---------------------------------------------------------------- attention

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParamStore<T>& store, const std::string& name,
                                          std::size_t dim, std::size_t heads, Rng& rng)
    : dim_(dim), heads_(heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ShapeError("attention: " + std::to_string(heads) + " heads do not divide dim " +
                     std::to_string(dim));
  }
  qkv_ = Linear<T>(store, name + ".qkv", dim, 3 * dim, rng);
  proj_ = Linear<T>(store, name + ".proj", dim, dim, rng);
}

namespace {

// Copies columns [offset, offset+width) of an [n, stride] matrix.
template <typename T>
void gather_cols(const T* src, std::size_t n, std::size_t stride, std::size_t offset,
                 std::size_t width, T* dst) {
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(dst + i * width, src + i * stride + offset, sizeof(T) * width);
  }
}

template <typename T>
void scatter_cols(const T* src, std::size_t n, std::size_t stride, std::size_t offset,
                  std::size_t width, T* dst) {
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(dst + i * stride + offset, src + i * width, sizeof(T) * width);
  }
}

}  // namespace

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& x, Cache* cache) const {
  require_cols(x.shape(), dim_, "attention");
  const std::size_t n = x.rows();
  const std::size_t dh = dim_ / heads_;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  typename Linear<T>::Cache qkv_cache;
  Tensor<T> qkv = qkv_.forward(x, cache ? &qkv_cache : nullptr);
  Tensor<T> out({n, dim_});
  std::vector<T> q(n * dh), k(n * dh), kt(n * dh), v(n * dh), o(n * dh);
  std::vector<Tensor<T>> weights;
  for (std::size_t h = 0; h < heads_; ++h) {
    gather_cols(qkv.data(), n, 3 * dim_, h * dh, dh, q.data());
    gather_cols(qkv.data(), n, 3 * dim_, dim_ + h * dh, dh, k.data());
    gather_cols(qkv.data(), n, 3 * dim_, 2 * dim_ + h * dh, dh, v.data());
    kernels::transpose(k.data(), n, dh, kt.data());
    Tensor<T> a({n, n});
    kernels::gemm(q.data(), kt.data(), a.data(), n, dh, n, false);
    for (auto& s : a.values()) s *= scale;
    for (std::size_t i = 0; i < n; ++i) softmax_row(a.data() + i * n, n);
    kernels::gemm(a.data(), v.data(), o.data(), n, n, dh, false);
    scatter_cols(o.data(), n, dim_, h * dh, dh, out.data());
    if (cache) weights.push_back(std::move(a));
  }
  typename Linear<T>::Cache proj_cache;
  Tensor<T> y = proj_.forward(out, cache ? &proj_cache : nullptr);
  if (cache) {
    cache->qkv_in = std::move(qkv_cache);
    cache->qkv = std::move(qkv);
    cache->weights = std::move(weights);
    cache->proj_in = std::move(proj_cache);
  }
  return y;
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::backward(const Cache& cache, const Tensor<T>& dy) const {
  const std::size_t n = cache.qkv.rows();
  const std::size_t dh = dim_ / heads_;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor<T> dout = proj_.backward(cache.proj_in, dy);
  Tensor<T> dqkv({n, 3 * dim_});
  std::vector<T> q(n * dh), k(n * dh), v(n * dh), vt(n * dh), dout_h(n * dh);
  std::vector<T> dq(n * dh), dk(n * dh), dv(n * dh);
  std::vector<T> at(n * n), ds(n * n), dst(n * n);
  for (std::size_t h = 0; h < heads_; ++h) {
    const Tensor<T>& a = cache.weights[h];
    gather_cols(cache.qkv.data(), n, 3 * dim_, h * dh, dh, q.data());
    gather_cols(cache.qkv.data(), n, 3 * dim_, dim_ + h * dh, dh, k.data());
    gather_cols(cache.qkv.data(), n, 3 * dim_, 2 * dim_ + h * dh, dh, v.data());
    gather_cols(dout.data(), n, dim_, h * dh, dh, dout_h.data());
    // dA = dO V^T ; dV = A^T dO
    kernels::transpose(v.data(), n, dh, vt.data());
    std::vector<T> da(n * n);
    kernels::gemm(dout_h.data(), vt.data(), da.data(), n, dh, n, false);
    kernels::transpose(a.data(), n, n, at.data());
    kernels::gemm(at.data(), dout_h.data(), dv.data(), n, n, dh, false);
    for (std::size_t i = 0; i < n; ++i) {
      softmax_row_backward(a.data() + i * n, da.data() + i * n, ds.data() + i * n, n);
    }
    for (auto& s : ds) s *= scale;
    // dQ = dS K ; dK = dS^T Q
    kernels::gemm(ds.data(), k.data(), dq.data(), n, n, dh, false);
    kernels::transpose(ds.data(), n, n, dst.data());
    kernels::gemm(dst.data(), q.data(), dk.data(), n, n, dh, false);
    scatter_cols(dq.data(), n, 3 * dim_, h * dh, dh, dqkv.data());
    scatter_cols(dk.data(), n, 3 * dim_, dim_ + h * dh, dh, dqkv.data());
    scatter_cols(dv.data(), n, 3 * dim_, 2 * dim_ + h * dh, dh, dqkv.data());
  }
  return qkv_.backward(cache.qkv_in, dqkv);
}

// ---------------------------------------------------------------- MLP / block

template <typename T>
MlpBlock<T>::MlpBlock(ParamStore<T>& store, const std::string& name, std::size_t dim,
                      std::size_t hidden, Rng& rng)
    : fc1_(store, name + ".fc1", dim, hidden, rng), fc2_(store, name + ".fc2", hidden, dim, rng) {}

template <typename T>
Tensor<T> MlpBlock<T>::forward(const Tensor<T>& x, Cache* cache) const {
  typename Linear<T>::Cache c1, c2;
  Tensor<T> h = fc1_.forward(x, cache ? &c1 : nullptr);
  Tensor<T> y = fc2_.forward(gelu(h), cache ? &c2 : nullptr);
  if (cache) {
    cache->fc1 = std::move(c1);
    cache->hidden = std::move(h);
    cache->fc2 = std::move(c2);
  }
  return y;
}

template <typename T>
Tensor<T> MlpBlock<T>::backward(const Cache& cache, const Tensor<T>& dy) const {
  Tensor<T> dg = fc2_.backward(cache.fc2, dy);
  return fc1_.backward(cache.fc1, gelu_backward(cache.hidden, dg));
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParamStore<T>& store, const std::string& name,
                                      std::size_t dim, std::size_t heads, std::size_t mlp_ratio,
                                      Rng& rng)
    : ln1_(store, name + ".norm1", dim),
      attn_(store, name + ".attn", dim, heads, rng),
      ln2_(store, name + ".norm2", dim),
      mlp_(store, name + ".mlp", dim, dim * mlp_ratio, rng) {}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Tensor<T> a = attn_.forward(ln1_.forward(x, cache ? &cache->ln1 : nullptr),
                              cache ? &cache->attn : nullptr);
  a += x;
  Tensor<T> y = mlp_.forward(ln2_.forward(a, cache ? &cache->ln2 : nullptr),
                             cache ? &cache->mlp : nullptr);
  y += a;
  return y;
}

template <typename T>
Tensor<T> TransformerBlock<T>::backward(const Cache& cache, const Tensor<T>& dy) const {
  Tensor<T> da = ln2_.backward(cache.ln2, mlp_.backward(cache.mlp, dy));
  da += dy;
  Tensor<T> dx = ln1_.backward(cache.ln1, attn_.backward(cache.attn, da));
  dx += da;
  return dx;
}

// ---------------------------------------------------------------- patches

void PatchGeometry::validate() const {
  if (t == 0 || c == 0 || h == 0 || w == 0 || pt == 0 || ph == 0 || pw == 0) {
    throw ShapeError("patch geometry has a zero dimension");
  }
  if (t % pt || h % ph || w % pw) {
    throw ShapeError("kernel (" + std::to_string(pt) + "," + std::to_string(ph) + "," +
                     std::to_string(pw) + ") does not divide input (" + std::to_string(t) + "," +
                     std::to_string(h) + "," + std::to_string(w) + ")");
  }
}

namespace {

template <typename F>
void for_each_patch_pixel(const PatchGeometry& g, std::size_t token, F&& f) {
  const std::size_t per_t = g.grid_h() * g.grid_w();
  const std::size_t gt = token / per_t;
  const std::size_t gh = (token % per_t) / g.grid_w();
  const std::size_t gw = token % g.grid_w();
  std::size_t e = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t kt = 0; kt < g.pt; ++kt) {
      const std::size_t t = gt * g.pt + kt;
      for (std::size_t kh = 0; kh < g.ph; ++kh) {
        const std::size_t base = ((t * g.c + c) * g.h + gh * g.ph + kh) * g.w + gw * g.pw;
        f(e, base, g.pw);
        e += g.pw;
      }
    }
  }
}

std::vector<std::size_t> all_tokens(const PatchGeometry& g) {
  std::vector<std::size_t> v(g.tokens());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

}  // namespace

template <typename T>
Tensor<T> patchify(std::span<const T> values, const PatchGeometry& g,
                   std::span<const std::size_t> tokens) {
  g.validate();
  if (values.size() != g.t * g.c * g.h * g.w) {
    throw ShapeError("patchify: " + std::to_string(values.size()) + " values for input (" +
                     std::to_string(g.t) + "," + std::to_string(g.c) + "," + std::to_string(g.h) +
                     "," + std::to_string(g.w) + ")");
  }
  std::vector<std::size_t> all;
  if (tokens.empty()) {
    all = all_tokens(g);
    tokens = all;
  }
  const std::size_t p = g.patch_size();
  Tensor<T> out({tokens.size(), p});
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    if (tokens[r] >= g.tokens()) throw IndexError("token " + std::to_string(tokens[r]));
    T* dst = out.data() + r * p;
    for_each_patch_pixel(g, tokens[r], [&](std::size_t e, std::size_t base, std::size_t len) {
      std::memcpy(dst + e, values.data() + base, sizeof(T) * len);
    });
  }
  return out;
}

template <typename T>
void unpatchify_into(const Tensor<T>& patches, const PatchGeometry& g,
                     std::span<const std::size_t> tokens, std::span<T> values) {
  g.validate();
  std::vector<std::size_t> all;
  if (tokens.empty()) {
    all = all_tokens(g);
    tokens = all;
  }
  const std::size_t p = g.patch_size();
  if (patches.shape() != Shape{tokens.size(), p}) {
    throw ShapeError("unpatchify: patches " + shape_str(patches.shape()) + " vs expected " +
                     shape_str({tokens.size(), p}));
  }
  if (values.size() != g.t * g.c * g.h * g.w) throw ShapeError("unpatchify: output size mismatch");
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    if (tokens[r] >= g.tokens()) throw IndexError("token " + std::to_string(tokens[r]));
    const T* src = patches.data() + r * p;
    for_each_patch_pixel(g, tokens[r], [&](std::size_t e, std::size_t base, std::size_t len) {
      std::memcpy(values.data() + base, src + e, sizeof(T) * len);
    });
  }
}

template <typename T>
std::vector<T> unpatchify(const Tensor<T>& patches, const PatchGeometry& g) {
  std::vector<T> out(g.t * g.c * g.h * g.w);
  unpatchify_into<T>(patches, g, {}, out);
  return out;
}

// ---------------------------------------------------------------- Conv3d

template <typename T>
Conv3d<T>::Conv3d(ParamStore<T>& store, const std::string& name, std::size_t channels,
                  std::size_t kt, std::size_t kh, std::size_t kw, std::size_t out, Rng& rng)
    : channels_(channels), kt_(kt), kh_(kh), kw_(kw), out_(out) {
  w_ = &store.add(name + ".weight", {out, channels, kt, kh, kw}, true);
  init_weight(*w_, rng);
  b_ = &store.add(name + ".bias", {out}, false);
}

template <typename T>
PatchGeometry Conv3d<T>::geometry_for(std::size_t t, std::size_t h, std::size_t w) const {
  return PatchGeometry{t, channels_, h, w, kt_, kh_, kw_};
}

template <typename T>
Tensor<T> Conv3d<T>::forward(std::span<const T> input, const PatchGeometry& dims,
                             std::span<const std::size_t> tokens, Cache* cache) const {
  if (dims.c != channels_ || dims.pt != kt_ || dims.ph != kh_ || dims.pw != kw_) {
    throw ShapeError("conv3d: input channels/kernel do not match layer");
  }
  Tensor<T> patches = patchify(input, dims, tokens);
  const std::size_t n = patches.rows();
  const std::size_t p = dims.patch_size();
  Tensor<T> y({n, out_});
  kernels::linear_forward(patches.data(), n, p, w_->value.data(), b_->value.data(), out_,
                          y.data());
  if (cache) {
    cache->lin.x = std::move(patches);
    cache->geometry = dims;
    if (tokens.empty()) {
      cache->tokens = all_tokens(dims);
    } else {
      cache->tokens.assign(tokens.begin(), tokens.end());
    }
  }
  return y;
}

template <typename T>
std::vector<T> Conv3d<T>::backward(const Cache& cache, const Tensor<T>& dy, bool need_dx) const {
  const std::size_t n = cache.lin.x.rows();
  const std::size_t p = cache.geometry.patch_size();
  if (dy.shape() != Shape{n, out_}) {
    throw ShapeError("conv3d backward: dy " + shape_str(dy.shape()) + " vs expected " +
                     shape_str({n, out_}));
  }
  ensure_grad(*w_);
  ensure_grad(*b_);
  Tensor<T> dpatch;
  if (need_dx) dpatch = Tensor<T>({n, p});
  kernels::linear_backward(cache.lin.x.data(), dy.data(), n, p, out_, w_->value.data(),
                           need_dx ? dpatch.data() : nullptr, w_->grad.data(), b_->grad.data());
  std::vector<T> dx;
  if (need_dx) {
    const auto& g = cache.geometry;
    dx.assign(g.t * g.c * g.h * g.w, T{});
    unpatchify_into<T>(dpatch, g, cache.tokens, dx);
  }
  return dx;
}

// ---------------------------------------------------------------- TransposeConv2d

template <typename T>
TransposeConv2d<T>::TransposeConv2d(ParamStore<T>& store, const std::string& name, std::size_t in,
                                    std::size_t out, Rng& rng, std::size_t kernel)
    : in_(in), out_(out), k_(kernel) {
  if (kernel == 0) throw ShapeError("transpose_conv2d: kernel must be positive");
  w_ = &store.add(name + ".weight", {in, out, kernel, kernel}, true);
  init_weight(*w_, rng);
  b_ = &store.add(name + ".bias", {out}, false);
}

template <typename T>
Tensor<T> TransposeConv2d<T>::forward(const Tensor<T>& x, Cache* cache) const {
  require_map(x.shape(), in_, "transpose_conv2d");
  const std::size_t h = x.dim(1), w = x.dim(2), hw = h * w;
  const std::size_t kk = k_ * k_;
  Tensor<T> pixels({hw, in_});
  kernels::transpose(x.data(), in_, hw, pixels.data());
  std::vector<T> cols(hw * out_ * kk);
  kernels::gemm(pixels.data(), w_->value.data(), cols.data(), hw, in_, out_ * kk, false);
  const std::size_t oh = h * k_, ow = w * k_;
  Tensor<T> y({out_, oh, ow});
  const T* bias = b_->value.data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const T* src = cols.data() + (i * w + j) * out_ * kk;
      for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t a = 0; a < k_; ++a) {
          T* dst = y.data() + (o * oh + i * k_ + a) * ow + j * k_;
          for (std::size_t b = 0; b < k_; ++b) dst[b] = src[o * kk + a * k_ + b] + bias[o];
        }
      }
    }
  }
  if (cache) {
    cache->pixels = std::move(pixels);
    cache->h = h;
    cache->w = w;
  }
  return y;
}

template <typename T>
Tensor<T> TransposeConv2d<T>::backward(const Cache& cache, const Tensor<T>& dy,
                                       bool need_dx) const {
  const std::size_t h = cache.h, w = cache.w, hw = h * w, kk = k_ * k_;
  const std::size_t oh = h * k_, ow = w * k_;
  if (dy.shape() != Shape{out_, oh, ow}) {
    throw ShapeError("transpose_conv2d backward: dy " + shape_str(dy.shape()) + " vs expected " +
                     shape_str({out_, oh, ow}));
  }
  ensure_grad(*w_);
  ensure_grad(*b_);
  const std::size_t width = out_ * kk;
  std::vector<T> dcols(hw * width);
  T* db = b_->grad.data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      T* dst = dcols.data() + (i * w + j) * width;
      for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t a = 0; a < k_; ++a) {
          const T* src = dy.data() + (o * oh + i * k_ + a) * ow + j * k_;
          for (std::size_t b = 0; b < k_; ++b) dst[o * kk + a * k_ + b] = src[b];
        }
      }
    }
  }
  for (std::size_t o = 0; o < out_; ++o) {
    const T* plane = dy.data() + o * oh * ow;
    T s{};
    for (std::size_t q = 0; q < oh * ow; ++q) s += plane[q];
    db[o] += s;
  }
  // dW[c, :] += sum_p X[p, c] * dcols[p, :]
  T* dw = w_->grad.data();
  for (std::size_t p = 0; p < hw; ++p) {
    const T* xp = cache.pixels.data() + p * in_;
    const T* dp = dcols.data() + p * width;
    for (std::size_t c = 0; c < in_; ++c) {
      const T xv = xp[c];
      if (xv == T{}) continue;
      T* dwc = dw + c * width;
      for (std::size_t q = 0; q < width; ++q) dwc[q] += xv * dp[q];
    }
  }
  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>({in_, h, w});
    const T* wv = w_->value.data();
    for (std::size_t c = 0; c < in_; ++c) {
      for (std::size_t p = 0; p < hw; ++p) {
        dx[c * hw + p] = kernels::dot(dcols.data() + p * width, wv + c * width, width);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Conv1x1

template <typename T>
Conv1x1<T>::Conv1x1(ParamStore<T>& store, const std::string& name, std::size_t in,
                    std::size_t out, Rng& rng)
    : lin_(store, name, in, out, rng) {}

template <typename T>
Tensor<T> Conv1x1<T>::forward(const Tensor<T>& x, Cache* cache) const {
  require_map(x.shape(), lin_.in_features(), "conv1x1");
  const std::size_t h = x.dim(1), w = x.dim(2), hw = h * w;
  Tensor<T> pixels({hw, lin_.in_features()});
  kernels::transpose(x.data(), lin_.in_features(), hw, pixels.data());
  Tensor<T> yp = lin_.forward(pixels, cache ? &cache->lin : nullptr);
  Tensor<T> y({lin_.out_features(), h, w});
  kernels::transpose(yp.data(), hw, lin_.out_features(), y.data());
  if (cache) {
    cache->h = h;
    cache->w = w;
  }
  return y;
}

template <typename T>
Tensor<T> Conv1x1<T>::backward(const Cache& cache, const Tensor<T>& dy, bool need_dx) const {
  const std::size_t hw = cache.h * cache.w;
  if (dy.shape() != Shape{lin_.out_features(), cache.h, cache.w}) {
    throw ShapeError("conv1x1 backward: dy " + shape_str(dy.shape()));
  }
  Tensor<T> dyp({hw, lin_.out_features()});
  kernels::transpose(dy.data(), lin_.out_features(), hw, dyp.data());
  Tensor<T> dxp = lin_.backward(cache.lin, dyp, need_dx);
  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>({lin_.in_features(), cache.h, cache.w});
    kernels::transpose(dxp.data(), hw, lin_.in_features(), dx.data());
  }
  return dx;
}

#define GFM_INSTANTIATE(T)                                                                   \
  template void ensure_grad<T>(Param<T>&);                                                   \
  template class Linear<T>;                                                                  \
  template class LayerNorm<T>;                                                               \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                              \
  template Tensor<T> gelu_backward<T>(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                           \
  template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&);                \
  template class MultiHeadAttention<T>;                                                      \
  template class MlpBlock<T>;                                                                \
  template class TransformerBlock<T>;                                                        \
  template Tensor<T> patchify<T>(std::span<const T>, const PatchGeometry&,                   \
                                 std::span<const std::size_t>);                              \
  template void unpatchify_into<T>(const Tensor<T>&, const PatchGeometry&,                   \
                                   std::span<const std::size_t>, std::span<T>);              \
  template std::vector<T> unpatchify<T>(const Tensor<T>&, const PatchGeometry&);             \
  template class Conv3d<T>;                                                                  \
  template class TransposeConv2d<T>;                                                         \
  template class Conv1x1<T>;

GFM_INSTANTIATE(float)
GFM_INSTANTIATE(double)

#undef GFM_INSTANTIATE

}  // namespace gfm::nn
