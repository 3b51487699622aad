#include "gfm/nn/kernels.hpp"

#include <cstring>
#include <vector>

namespace gfm::nn::kernels {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T s0{}, s1{}, s2{}, s3{};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
void transpose(const T* in, std::size_t rows, std::size_t cols, T* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock);
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
      }
    }
  }
}

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(T) * m * n);
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T{}) continue;
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void linear_forward(const T* x, std::size_t n, std::size_t in, const T* w, const T* b,
                    std::size_t out, T* y) {
  std::vector<T> wt(in * out);
  transpose(w, out, in, wt.data());
  for (std::size_t i = 0; i < n; ++i) {
    T* yi = y + i * out;
    if (b) {
      std::memcpy(yi, b, sizeof(T) * out);
    } else {
      std::memset(yi, 0, sizeof(T) * out);
    }
  }
  gemm(x, wt.data(), y, n, in, out, true);
}

template <typename T>
void linear_backward(const T* x, const T* dy, std::size_t n, std::size_t in, std::size_t out,
                     const T* w, T* dx, T* dw, T* db) {
  if (dx) gemm(dy, w, dx, n, out, in, false);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xi = x + i * in;
    const T* dyi = dy + i * out;
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dyi[o];
      if (db) db[o] += g;
      if (g == T{}) continue;
      T* dwo = dw + o * in;
      for (std::size_t k = 0; k < in; ++k) dwo[k] += g * xi[k];
    }
  }
}

#define GFM_INSTANTIATE(T)                                                                   \
  template T dot<T>(const T*, const T*, std::size_t);                                        \
  template void transpose<T>(const T*, std::size_t, std::size_t, T*);                        \
  template void gemm<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void linear_forward<T>(const T*, std::size_t, std::size_t, const T*, const T*,    \
                                  std::size_t, T*);                                          \
  template void linear_backward<T>(const T*, const T*, std::size_t, std::size_t, std::size_t, \
                                   const T*, T*, T*, T*);

GFM_INSTANTIATE(float)
GFM_INSTANTIATE(double)

#undef GFM_INSTANTIATE

}  // namespace gfm::nn::kernels
