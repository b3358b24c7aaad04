#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsplab/rng.hpp"
#include "rsplab/tensor.hpp"

// Layer zoo for the 3D-conv encoder. Conventions:
//  - activations are [N, C, T, H, W], row-major;
//  - forward(x, training=true) caches whatever backward needs; a
//    training=false forward leaves existing caches untouched, so inference
//    passes may be interleaved before the backward of the last training pass;
//  - backward accumulates parameter gradients (call zero_grad between steps)
//    and returns the input gradient.
namespace rsplab::nn {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

struct Conv3dGeometry {
  int t_out = 0, h_out = 0, w_out = 0;
};

template <typename T>
class Conv3d {
 public:
  // Cubic kernel (odd), same padding k/2, separate temporal/spatial strides.
  Conv3d(int in_ch, int out_ch, int kernel, int stride_t, int stride_s);

  void init_params(Rng& rng);  // He-normal weights, zero bias
  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true);
  void zero_grad();

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  Conv3dGeometry out_geometry(int t, int h, int w) const;

  Tensor<T> weight;  // [out_ch, in_ch * k^3]
  Tensor<T> bias;    // [out_ch]
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;

 private:
  void im2col(const T* x, int t, int h, int w, const Conv3dGeometry& g, T* col) const;
  void col2im_add(const T* col, int t, int h, int w, const Conv3dGeometry& g, T* dx) const;

  int in_ch_, out_ch_, k_, st_, ss_, pad_;
  std::vector<std::size_t> x_shape_;
  Tensor<T> cols_;  // cached im2col buffers, [N, K, P]
};

template <typename T>
class GroupNorm {
 public:
  GroupNorm(int channels, int groups, T eps = static_cast<T>(1e-5));

  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dy);
  void zero_grad();

  Tensor<T> gamma, beta, grad_gamma, grad_beta;

 private:
  int channels_, groups_;
  T eps_;
  Tensor<T> xhat_;     // cached normalized input
  Tensor<T> inv_std_;  // [N, groups]
  std::vector<std::size_t> x_shape_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  std::vector<unsigned char> mask_;
};

// Mean over (T, H, W): [N, C, T, H, W] -> [N, C], accumulated in double so
// the pooling identity holds to 1e-6.
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dpool) const;

 private:
  std::vector<std::size_t> x_shape_;
};

template <typename T>
class Linear {
 public:
  Linear(int in_dim, int out_dim, bool with_bias);

  void init_params(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, bool training);  // [N, in] -> [N, out]
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true);
  void zero_grad();

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  bool has_bias() const { return with_bias_; }

  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out] (empty when bias-free)
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;

 private:
  int in_, out_;
  bool with_bias_;
  Tensor<T> x_;  // cached input
};

// Row-wise x / (||x|| + eps); eps = 1e-12 keeps zero vectors finite.
template <typename T>
class L2Normalize {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Tensor<T> x_;
  std::vector<double> norms_;
};

}  // namespace rsplab::nn
