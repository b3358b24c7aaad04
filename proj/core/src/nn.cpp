#include "rsplab/nn.hpp"

#include <cblas.h>

#include <cmath>
#include <stdexcept>

namespace rsplab::nn {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

namespace {

void expect_rank5(const std::vector<std::size_t>& shape, const char* where) {
  if (shape.size() != 5) {
    throw ShapeError(std::string(where) + ": expected rank-5 [N,C,T,H,W] input");
  }
}

}  // namespace

// -------------------------------------------------------------------- Conv3d

template <typename T>
Conv3d<T>::Conv3d(int in_ch, int out_ch, int kernel, int stride_t, int stride_s)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), st_(stride_t), ss_(stride_s), pad_(kernel / 2) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("Conv3d: kernel must be odd and positive");
  }
  if (in_ch < 1 || out_ch < 1 || stride_t < 1 || stride_s < 1) {
    throw std::invalid_argument("Conv3d: channels and strides must be positive");
  }
  const std::size_t kk = static_cast<std::size_t>(k_) * k_ * k_;
  weight = Tensor<T>({static_cast<std::size_t>(out_ch_), static_cast<std::size_t>(in_ch_) * kk});
  bias = Tensor<T>({static_cast<std::size_t>(out_ch_)});
  grad_weight = Tensor<T>(weight.shape());
  grad_bias = Tensor<T>(bias.shape());
}

template <typename T>
void Conv3d<T>::init_params(Rng& rng) {
  const double fan_in = static_cast<double>(in_ch_) * k_ * k_ * k_;
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (auto& w : weight.vec()) w = static_cast<T>(rng.normal() * std_dev);
  bias.fill(T(0));
}

template <typename T>
Conv3dGeometry Conv3d<T>::out_geometry(int t, int h, int w) const {
  // Same padding with odd kernels keeps every output extent >= 1.
  Conv3dGeometry g;
  g.t_out = (t + 2 * pad_ - k_) / st_ + 1;
  g.h_out = (h + 2 * pad_ - k_) / ss_ + 1;
  g.w_out = (w + 2 * pad_ - k_) / ss_ + 1;
  return g;
}

template <typename T>
void Conv3d<T>::im2col(const T* x, int t, int h, int w, const Conv3dGeometry& g, T* col) const {
  const std::size_t p_total =
      static_cast<std::size_t>(g.t_out) * static_cast<std::size_t>(g.h_out) *
      static_cast<std::size_t>(g.w_out);
  std::size_t row = 0;
  for (int c = 0; c < in_ch_; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * t * h * w;
    for (int kt = 0; kt < k_; ++kt) {
      for (int kh = 0; kh < k_; ++kh) {
        for (int kw = 0; kw < k_; ++kw, ++row) {
          T* out = col + row * p_total;
          std::size_t p = 0;
          for (int to = 0; to < g.t_out; ++to) {
            const int ti = to * st_ + kt - pad_;
            const bool t_ok = ti >= 0 && ti < t;
            for (int ho = 0; ho < g.h_out; ++ho) {
              const int hi = ho * ss_ + kh - pad_;
              const bool h_ok = hi >= 0 && hi < h;
              const T* xrow = xc + (static_cast<std::size_t>(ti) * h + static_cast<std::size_t>(hi)) * w;
              for (int wo = 0; wo < g.w_out; ++wo, ++p) {
                const int wi = wo * ss_ + kw - pad_;
                out[p] = (t_ok && h_ok && wi >= 0 && wi < w) ? xrow[wi] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Conv3d<T>::col2im_add(const T* col, int t, int h, int w, const Conv3dGeometry& g,
                           T* dx) const {
  const std::size_t p_total =
      static_cast<std::size_t>(g.t_out) * static_cast<std::size_t>(g.h_out) *
      static_cast<std::size_t>(g.w_out);
  std::size_t row = 0;
  for (int c = 0; c < in_ch_; ++c) {
    T* xc = dx + static_cast<std::size_t>(c) * t * h * w;
    for (int kt = 0; kt < k_; ++kt) {
      for (int kh = 0; kh < k_; ++kh) {
        for (int kw = 0; kw < k_; ++kw, ++row) {
          const T* in = col + row * p_total;
          std::size_t p = 0;
          for (int to = 0; to < g.t_out; ++to) {
            const int ti = to * st_ + kt - pad_;
            const bool t_ok = ti >= 0 && ti < t;
            for (int ho = 0; ho < g.h_out; ++ho) {
              const int hi = ho * ss_ + kh - pad_;
              const bool h_ok = hi >= 0 && hi < h;
              T* xrow = xc + (static_cast<std::size_t>(ti) * h + static_cast<std::size_t>(hi)) * w;
              for (int wo = 0; wo < g.w_out; ++wo, ++p) {
                const int wi = wo * ss_ + kw - pad_;
                if (t_ok && h_ok && wi >= 0 && wi < w) xrow[wi] += in[p];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& x, bool training) {
  expect_rank5(x.shape(), "Conv3d::forward");
  if (static_cast<int>(x.dim(1)) != in_ch_) {
    throw ShapeError("Conv3d::forward: expected " + std::to_string(in_ch_) + " channels, got " +
                     x.shape_str());
  }
  const int n = static_cast<int>(x.dim(0));
  const int t = static_cast<int>(x.dim(2));
  const int h = static_cast<int>(x.dim(3));
  const int w = static_cast<int>(x.dim(4));
  const Conv3dGeometry g = out_geometry(t, h, w);
  const std::size_t kk = weight.dim(1);  // in_ch * k^3
  const std::size_t p_total =
      static_cast<std::size_t>(g.t_out) * static_cast<std::size_t>(g.h_out) *
      static_cast<std::size_t>(g.w_out);

  Tensor<T> y({static_cast<std::size_t>(n), static_cast<std::size_t>(out_ch_),
               static_cast<std::size_t>(g.t_out), static_cast<std::size_t>(g.h_out),
               static_cast<std::size_t>(g.w_out)});

  Tensor<T> scratch;
  Tensor<T>* cols = &scratch;
  if (training) {
    x_shape_ = x.shape();
    cols_ = Tensor<T>({static_cast<std::size_t>(n), kk, p_total});
    cols = &cols_;
  } else {
    scratch = Tensor<T>({1, kk, p_total});
  }

  const std::size_t x_stride = static_cast<std::size_t>(in_ch_) * t * h * w;
  const std::size_t y_stride = static_cast<std::size_t>(out_ch_) * p_total;
  for (int i = 0; i < n; ++i) {
    T* col = cols->data() + (training ? static_cast<std::size_t>(i) * kk * p_total : 0);
    im2col(x.data() + static_cast<std::size_t>(i) * x_stride, t, h, w, g, col);
    T* yi = y.data() + static_cast<std::size_t>(i) * y_stride;
    gemm(false, false, out_ch_, static_cast<int>(p_total), static_cast<int>(kk), T(1),
         weight.data(), static_cast<int>(kk), col, static_cast<int>(p_total), T(0), yi,
         static_cast<int>(p_total));
    for (int oc = 0; oc < out_ch_; ++oc) {
      const T b = bias[static_cast<std::size_t>(oc)];
      T* row = yi + static_cast<std::size_t>(oc) * p_total;
      for (std::size_t p = 0; p < p_total; ++p) row[p] += b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv3d<T>::backward(const Tensor<T>& dy, bool need_dx) {
  if (x_shape_.empty()) throw std::logic_error("Conv3d::backward before training forward");
  const int n = static_cast<int>(x_shape_[0]);
  const int t = static_cast<int>(x_shape_[2]);
  const int h = static_cast<int>(x_shape_[3]);
  const int w = static_cast<int>(x_shape_[4]);
  const Conv3dGeometry g = out_geometry(t, h, w);
  const std::size_t kk = weight.dim(1);
  const std::size_t p_total =
      static_cast<std::size_t>(g.t_out) * static_cast<std::size_t>(g.h_out) *
      static_cast<std::size_t>(g.w_out);
  check_shape(dy.shape(),
              {static_cast<std::size_t>(n), static_cast<std::size_t>(out_ch_),
               static_cast<std::size_t>(g.t_out), static_cast<std::size_t>(g.h_out),
               static_cast<std::size_t>(g.w_out)},
              "Conv3d::backward");

  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>(x_shape_);
  Tensor<T> dcol({kk, p_total});
  const std::size_t x_stride = static_cast<std::size_t>(in_ch_) * t * h * w;
  const std::size_t y_stride = static_cast<std::size_t>(out_ch_) * p_total;

  for (int i = 0; i < n; ++i) {
    const T* dyi = dy.data() + static_cast<std::size_t>(i) * y_stride;
    const T* col = cols_.data() + static_cast<std::size_t>(i) * kk * p_total;
    // dW += dY * col^T ; db += row sums of dY
    gemm(false, true, out_ch_, static_cast<int>(kk), static_cast<int>(p_total), T(1), dyi,
         static_cast<int>(p_total), col, static_cast<int>(p_total), T(1), grad_weight.data(),
         static_cast<int>(kk));
    for (int oc = 0; oc < out_ch_; ++oc) {
      const T* row = dyi + static_cast<std::size_t>(oc) * p_total;
      T acc = T(0);
      for (std::size_t p = 0; p < p_total; ++p) acc += row[p];
      grad_bias[static_cast<std::size_t>(oc)] += acc;
    }
    if (need_dx) {
      // dcol = W^T * dY, scattered back through the column mapping.
      gemm(true, false, static_cast<int>(kk), static_cast<int>(p_total), out_ch_, T(1),
           weight.data(), static_cast<int>(kk), dyi, static_cast<int>(p_total), T(0), dcol.data(),
           static_cast<int>(p_total));
      col2im_add(dcol.data(), t, h, w, g, dx.data() + static_cast<std::size_t>(i) * x_stride);
    }
  }
  return dx;
}

template <typename T>
void Conv3d<T>::zero_grad() {
  grad_weight.fill(T(0));
  grad_bias.fill(T(0));
}

// ----------------------------------------------------------------- GroupNorm

template <typename T>
GroupNorm<T>::GroupNorm(int channels, int groups, T eps)
    : channels_(channels), groups_(groups), eps_(eps) {
  if (groups < 1 || channels < 1 || channels % groups != 0) {
    throw std::invalid_argument("GroupNorm: groups must divide channels");
  }
  gamma = Tensor<T>({static_cast<std::size_t>(channels)});
  beta = Tensor<T>({static_cast<std::size_t>(channels)});
  gamma.fill(T(1));
  grad_gamma = Tensor<T>(gamma.shape());
  grad_beta = Tensor<T>(beta.shape());
}

template <typename T>
Tensor<T> GroupNorm<T>::forward(const Tensor<T>& x, bool training) {
  expect_rank5(x.shape(), "GroupNorm::forward");
  if (static_cast<int>(x.dim(1)) != channels_) {
    throw ShapeError("GroupNorm::forward: channel mismatch " + x.shape_str());
  }
  const std::size_t n = x.dim(0);
  const std::size_t spatial = x.dim(2) * x.dim(3) * x.dim(4);
  const std::size_t ch_per_group = static_cast<std::size_t>(channels_ / groups_);
  const std::size_t group_elems = ch_per_group * spatial;

  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  Tensor<T> inv_std({n, static_cast<std::size_t>(groups_)});

  for (std::size_t i = 0; i < n; ++i) {
    for (int g = 0; g < groups_; ++g) {
      const std::size_t base =
          (i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(g) * ch_per_group) *
          spatial;
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t e = 0; e < group_elems; ++e) {
        const double v = x[base + e];
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / static_cast<double>(group_elems);
      const double var = std::max(0.0, sum_sq / static_cast<double>(group_elems) - mean * mean);
      const double istd = 1.0 / std::sqrt(var + static_cast<double>(eps_));
      inv_std[i * static_cast<std::size_t>(groups_) + static_cast<std::size_t>(g)] =
          static_cast<T>(istd);
      for (std::size_t c = 0; c < ch_per_group; ++c) {
        const std::size_t ch = static_cast<std::size_t>(g) * ch_per_group + c;
        const T gm = gamma[ch];
        const T bt = beta[ch];
        const std::size_t off = base + c * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          const T xh = static_cast<T>((x[off + s] - mean) * istd);
          xhat[off + s] = xh;
          y[off + s] = gm * xh + bt;
        }
      }
    }
  }
  if (training) {
    x_shape_ = x.shape();
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> GroupNorm<T>::backward(const Tensor<T>& dy) {
  if (x_shape_.empty()) throw std::logic_error("GroupNorm::backward before training forward");
  check_shape(dy.shape(), x_shape_, "GroupNorm::backward");
  const std::size_t n = x_shape_[0];
  const std::size_t spatial = x_shape_[2] * x_shape_[3] * x_shape_[4];
  const std::size_t ch_per_group = static_cast<std::size_t>(channels_ / groups_);
  const std::size_t group_elems = ch_per_group * spatial;

  Tensor<T> dx(x_shape_);
  for (std::size_t i = 0; i < n; ++i) {
    for (int g = 0; g < groups_; ++g) {
      const std::size_t base =
          (i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(g) * ch_per_group) *
          spatial;
      const double istd =
          inv_std_[i * static_cast<std::size_t>(groups_) + static_cast<std::size_t>(g)];
      // dxhat = dy * gamma; reduce its sums, then the standard GN backward.
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < ch_per_group; ++c) {
        const std::size_t ch = static_cast<std::size_t>(g) * ch_per_group + c;
        const double gm = gamma[ch];
        const std::size_t off = base + c * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          const double dxh = dy[off + s] * gm;
          s1 += dxh;
          s2 += dxh * xhat_[off + s];
        }
      }
      const double inv_count = 1.0 / static_cast<double>(group_elems);
      for (std::size_t c = 0; c < ch_per_group; ++c) {
        const std::size_t ch = static_cast<std::size_t>(g) * ch_per_group + c;
        const double gm = gamma[ch];
        const std::size_t off = base + c * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          const double dxh = dy[off + s] * gm;
          const double xh = xhat_[off + s];
          dx[off + s] = static_cast<T>(istd * (dxh - (s1 + xh * s2) * inv_count));
        }
      }
    }
  }
  // Parameter gradients.
  for (std::size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < channels_; ++ch) {
      const std::size_t off = (i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(ch)) * spatial;
      double dg = 0.0, db = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) {
        dg += dy[off + s] * xhat_[off + s];
        db += dy[off + s];
      }
      grad_gamma[static_cast<std::size_t>(ch)] += static_cast<T>(dg);
      grad_beta[static_cast<std::size_t>(ch)] += static_cast<T>(db);
    }
  }
  return dx;
}

template <typename T>
void GroupNorm<T>::zero_grad() {
  grad_gamma.fill(T(0));
  grad_beta.fill(T(0));
}

// ---------------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> y(x.shape());
  if (training) mask_.assign(x.numel(), 0);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const bool pos = x[i] > T(0);
    y[i] = pos ? x[i] : T(0);
    if (training && pos) mask_[i] = 1;
  }
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& dy) {
  if (mask_.size() != dy.numel()) throw std::logic_error("ReLU::backward size mismatch");
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = mask_[i] ? dy[i] : T(0);
  return dx;
}

// ------------------------------------------------------------ GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, bool training) {
  expect_rank5(x.shape(), "GlobalAvgPool::forward");
  if (training) x_shape_ = x.shape();
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  const std::size_t spatial = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor<T> y({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (i * c + ch) * spatial;
      double acc = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) acc += x[off + s];
      y[i * c + ch] = static_cast<T>(acc / static_cast<double>(spatial));
    }
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dpool) const {
  if (x_shape_.empty()) throw std::logic_error("GlobalAvgPool::backward before training forward");
  const std::size_t n = x_shape_[0];
  const std::size_t c = x_shape_[1];
  const std::size_t spatial = x_shape_[2] * x_shape_[3] * x_shape_[4];
  check_shape(dpool.shape(), {n, c}, "GlobalAvgPool::backward");
  Tensor<T> dx(x_shape_);
  const T scale = static_cast<T>(1.0 / static_cast<double>(spatial));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T g = dpool[i * c + ch] * scale;
      const std::size_t off = (i * c + ch) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) dx[off + s] = g;
    }
  }
  return dx;
}

// -------------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(int in_dim, int out_dim, bool with_bias)
    : in_(in_dim), out_(out_dim), with_bias_(with_bias) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("Linear: dims must be positive");
  weight = Tensor<T>({static_cast<std::size_t>(out_), static_cast<std::size_t>(in_)});
  grad_weight = Tensor<T>(weight.shape());
  if (with_bias_) {
    bias = Tensor<T>({static_cast<std::size_t>(out_)});
    grad_bias = Tensor<T>(bias.shape());
  }
}

template <typename T>
void Linear<T>::init_params(Rng& rng) {
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(in_));
  for (auto& w : weight.vec()) w = static_cast<T>(rng.normal() * std_dev);
  if (with_bias_) bias.fill(T(0));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 2 || static_cast<int>(x.dim(1)) != in_) {
    throw ShapeError("Linear::forward: expected [N," + std::to_string(in_) + "], got " +
                     x.shape_str());
  }
  const int n = static_cast<int>(x.dim(0));
  Tensor<T> y({static_cast<std::size_t>(n), static_cast<std::size_t>(out_)});
  // One GEMM per row keeps each output row a pure function of its input row,
  // so permuting the batch permutes outputs bit-for-bit.
  for (int i = 0; i < n; ++i) {
    gemm(false, true, 1, out_, in_, T(1), x.data() + static_cast<std::size_t>(i) * in_, in_,
         weight.data(), in_, T(0), y.data() + static_cast<std::size_t>(i) * out_, out_);
  }
  if (with_bias_) {
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < out_; ++o) {
        y[static_cast<std::size_t>(i) * out_ + static_cast<std::size_t>(o)] +=
            bias[static_cast<std::size_t>(o)];
      }
    }
  }
  if (training) x_ = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy, bool need_dx) {
  if (x_.numel() == 0) throw std::logic_error("Linear::backward before training forward");
  const int n = static_cast<int>(x_.dim(0));
  check_shape(dy.shape(), {static_cast<std::size_t>(n), static_cast<std::size_t>(out_)},
              "Linear::backward");
  // dW += dY^T X ; db += column sums of dY ; dX = dY W.
  gemm(true, false, out_, in_, n, T(1), dy.data(), out_, x_.data(), in_, T(1), grad_weight.data(),
       in_);
  if (with_bias_) {
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < out_; ++o) {
        grad_bias[static_cast<std::size_t>(o)] +=
            dy[static_cast<std::size_t>(i) * out_ + static_cast<std::size_t>(o)];
      }
    }
  }
  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>({static_cast<std::size_t>(n), static_cast<std::size_t>(in_)});
    gemm(false, false, n, in_, out_, T(1), dy.data(), out_, weight.data(), in_, T(0), dx.data(),
         in_);
  }
  return dx;
}

template <typename T>
void Linear<T>::zero_grad() {
  grad_weight.fill(T(0));
  if (with_bias_) grad_bias.fill(T(0));
}

// --------------------------------------------------------------- L2Normalize

template <typename T>
Tensor<T> L2Normalize<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 2) throw ShapeError("L2Normalize::forward: expected [N,D]");
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  Tensor<T> y(x.shape());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = x[i * d + j];
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    norms[i] = norm;
    const double denom = norm + 1e-12;
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] = static_cast<T>(x[i * d + j] / denom);
  }
  if (training) {
    x_ = x;
    norms_ = std::move(norms);
  }
  return y;
}

template <typename T>
Tensor<T> L2Normalize<T>::backward(const Tensor<T>& dy) {
  if (x_.numel() == 0) throw std::logic_error("L2Normalize::backward before training forward");
  check_shape(dy.shape(), x_.shape(), "L2Normalize::backward");
  const std::size_t n = x_.dim(0);
  const std::size_t d = x_.dim(1);
  Tensor<T> dx(x_.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = norms_[i];
    const double denom = norm + 1e-12;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(dy[i * d + j]) * x_[i * d + j];
    const double coef = dot / (std::max(norm, 1e-12) * denom * denom);
    for (std::size_t j = 0; j < d; ++j) {
      dx[i * d + j] = static_cast<T>(dy[i * d + j] / denom - x_[i * d + j] * coef);
    }
  }
  return dx;
}

template class Conv3d<float>;
template class Conv3d<double>;
template class GroupNorm<float>;
template class GroupNorm<double>;
template class ReLU<float>;
template class ReLU<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Linear<float>;
template class Linear<double>;
template class L2Normalize<float>;
template class L2Normalize<double>;

}  // namespace rsplab::nn
