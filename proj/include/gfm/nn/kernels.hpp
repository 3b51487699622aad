#pragma once

#include <cstddef>
#include <span>

#include "gfm/nn/tensor.hpp"

// Dense kernels shared by the layers. Loop orders are fixed so results are
// bit-reproducible for a given build.
namespace gfm::nn::kernels {

// y[n, out] = x[n, in] * w[out, in]^T + b[out]  (b may be null)
template <typename T>
void linear_forward(const T* x, std::size_t n, std::size_t in, const T* w, const T* b,
                    std::size_t out, T* y);

// Accumulates dw (and db) and writes dx (if non-null) for linear_forward.
template <typename T>
void linear_backward(const T* x, const T* dy, std::size_t n, std::size_t in, std::size_t out,
                     const T* w, T* dx, T* dw, T* db);

// c[m, n] (+)= a[m, k] * b[k, n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

// out[c, r] = in[r, c]
template <typename T>
void transpose(const T* in, std::size_t rows, std::size_t cols, T* out);

template <typename T>
T dot(const T* a, const T* b, std::size_t n);

}  // namespace gfm::nn::kernels
