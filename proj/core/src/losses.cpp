#include "rsplab/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rsplab::loss {

namespace {

template <typename T>
double dot_d(std::span<const T> u, std::span<const T> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

template <typename T>
void check_dims(std::span<const T> u, std::span<const T> v, const char* where) {
  if (u.size() != v.size())
    throw ShapeError(std::string(where) + ": dimension mismatch, " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
}

}  // namespace

template <typename T>
T similarity(std::span<const T> u, std::span<const T> v) {
  check_dims(u, v, "similarity");
  return static_cast<T>(dot_d(u, v));
}

template <typename T>
T triplet_loss(std::span<const T> anchor, std::span<const T> pos,
               std::span<const T> neg, T margin) {
  check_dims(anchor, pos, "triplet_loss");
  check_dims(anchor, neg, "triplet_loss");
  const double p_pos = dot_d(anchor, pos);
  const double p_neg = dot_d(anchor, neg);
  const double arg = static_cast<double>(margin) - (p_pos - p_neg);
  return static_cast<T>(std::max(0.0, arg));
}

template <typename T>
T triplet_loss_grad(std::span<const T> anchor, std::span<const T> pos,
                    std::span<const T> neg, T margin, T grad_scale,
                    std::span<T> d_anchor, std::span<T> d_pos, std::span<T> d_neg,
                    TripletAux* aux) {
  check_dims(anchor, pos, "triplet_loss_grad");
  check_dims(anchor, neg, "triplet_loss_grad");
  const double p_pos = dot_d(anchor, pos);
  const double p_neg = dot_d(anchor, neg);
  const double arg = static_cast<double>(margin) - (p_pos - p_neg);
  const bool active = arg > 0.0;
  if (aux) {
    aux->p_pos = p_pos;
    aux->p_neg = p_neg;
    aux->active = active;
  }
  if (active) {
    // dL/d anchor = -(pos - neg); dL/d pos = -anchor; dL/d neg = +anchor.
    const double g = static_cast<double>(grad_scale);
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      d_anchor[i] += static_cast<T>(-g * (static_cast<double>(pos[i]) - static_cast<double>(neg[i])));
      d_pos[i] += static_cast<T>(-g * static_cast<double>(anchor[i]));
      d_neg[i] += static_cast<T>(g * static_cast<double>(anchor[i]));
    }
  }
  return static_cast<T>(std::max(0.0, arg));
}

template <typename T>
T triplet_loss_symmetric_grad(std::span<const T> a, std::span<const T> b,
                              std::span<const T> neg, T margin, T grad_scale,
                              std::span<T> d_a, std::span<T> d_b, std::span<T> d_neg,
                              TripletAux* aux) {
  const T half = grad_scale / T(2);
  TripletAux aux_ab, aux_ba;
  const T l_ab = triplet_loss_grad(a, b, neg, margin, half, d_a, d_b, d_neg, &aux_ab);
  const T l_ba = triplet_loss_grad(b, a, neg, margin, half, d_b, d_a, d_neg, &aux_ba);
  if (aux) {
    aux->p_pos = aux_ab.p_pos;
    aux->p_neg = 0.5 * (aux_ab.p_neg + aux_ba.p_neg);
    aux->active = aux_ab.active || aux_ba.active;
  }
  return (l_ab + l_ba) / T(2);
}

template <typename T>
T infonce_loss(std::span<const T> a_i, std::span<const T> a_j,
               const Tensor<T>& negatives, T tau) {
  return infonce_loss_grad<T>(a_i, a_j, negatives, tau, T(0), {}, {}, nullptr, nullptr);
}

template <typename T>
T infonce_loss_grad(std::span<const T> a_i, std::span<const T> a_j,
                    const Tensor<T>& negatives, T tau, T grad_scale,
                    std::span<T> d_a_i, std::span<T> d_a_j,
                    Tensor<T>* d_negatives, InfoNceAux* aux) {
  if (tau <= T(0)) throw ConfigError("infonce_loss: temperature must be positive");
  if (negatives.rank() != 2)
    throw ShapeError("infonce_loss: negatives must be [K, dim]");
  const std::size_t K = negatives.dim(0);
  const std::size_t dim = negatives.dim(1);
  if (K < 1) throw ConfigError("infonce_loss: needs at least one negative");
  check_dims(a_i, a_j, "infonce_loss");
  if (a_i.size() != dim)
    throw ShapeError("infonce_loss: negative dim " + std::to_string(dim) +
                     " does not match embedding dim " + std::to_string(a_i.size()));

  const double inv_tau = 1.0 / static_cast<double>(tau);

  // Logits: index 0 is the positive, 1..K the negatives.
  std::vector<double> logits(K + 1);
  logits[0] = dot_d(a_i, a_j) * inv_tau;
  for (std::size_t n = 0; n < K; ++n) {
    std::span<const T> neg(negatives.data() + n * dim, dim);
    logits[n + 1] = dot_d(a_i, neg) * inv_tau;
  }

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum_exp = 0.0;
  for (double l : logits) sum_exp += std::exp(l - max_logit);
  const double lse = max_logit + std::log(sum_exp);
  const double loss = lse - logits[0];

  if (aux) {
    aux->p_pos = logits[0] / inv_tau;
    aux->positive_first = true;
    for (std::size_t n = 1; n <= K; ++n)
      if (logits[n] >= logits[0]) aux->positive_first = false;
  }

  const bool want_grad = grad_scale != T(0) && !d_a_i.empty();
  if (want_grad) {
    const double g = static_cast<double>(grad_scale);
    // softmax over logits; dL/dl_0 = s_0 - 1, dL/dl_n = s_n.
    const double s0 = std::exp(logits[0] - lse);
    const double c0 = g * (s0 - 1.0) * inv_tau;
    for (std::size_t i = 0; i < dim; ++i) {
      d_a_i[i] += static_cast<T>(c0 * static_cast<double>(a_j[i]));
      d_a_j[i] += static_cast<T>(c0 * static_cast<double>(a_i[i]));
    }
    for (std::size_t n = 0; n < K; ++n) {
      const double sn = std::exp(logits[n + 1] - lse);
      const double cn = g * sn * inv_tau;
      const T* neg = negatives.data() + n * dim;
      for (std::size_t i = 0; i < dim; ++i)
        d_a_i[i] += static_cast<T>(cn * static_cast<double>(neg[i]));
      if (d_negatives) {
        T* dn = d_negatives->data() + n * dim;
        for (std::size_t i = 0; i < dim; ++i)
          dn[i] += static_cast<T>(cn * static_cast<double>(a_i[i]));
      }
    }
  }
  return static_cast<T>(loss);
}

template <typename T>
T total_loss(T l_m, T l_a, T lambda) {
  if (lambda < T(0)) throw ConfigError("total_loss: lambda must be >= 0");
  return l_m + lambda * l_a;
}

template <typename T>
T speed_prediction_loss(std::span<const T> m, std::size_t speed_label,
                        const Tensor<T>& W, std::span<const T> b) {
  Tensor<T> dW(W.shape());
  std::vector<T> dm(m.size(), T(0)), db(b.size(), T(0));
  return speed_prediction_loss_grad<T>(m, speed_label, W, b, T(0),
                                       std::span<T>(dm), dW, std::span<T>(db), nullptr);
}

template <typename T>
T speed_prediction_loss_grad(std::span<const T> m, std::size_t speed_label,
                             const Tensor<T>& W, std::span<const T> b, T grad_scale,
                             std::span<T> d_m, Tensor<T>& d_W, std::span<T> d_b,
                             bool* correct) {
  if (W.rank() != 2) throw ShapeError("speed_prediction_loss: W must be [num_speeds, dim]");
  const std::size_t S = W.dim(0);
  const std::size_t dim = W.dim(1);
  if (m.size() != dim)
    throw ShapeError("speed_prediction_loss: embedding dim mismatch");
  if (b.size() != S) throw ShapeError("speed_prediction_loss: bias dim mismatch");
  if (speed_label >= S)
    throw std::out_of_range("speed_prediction_loss: label " + std::to_string(speed_label) +
                            " out of range for " + std::to_string(S) + " speeds");

  std::vector<double> logits(S);
  for (std::size_t s = 0; s < S; ++s) {
    std::span<const T> row(W.data() + s * dim, dim);
    logits[s] = dot_d(row, m) + static_cast<double>(b[s]);
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum_exp = 0.0;
  for (double l : logits) sum_exp += std::exp(l - max_logit);
  const double lse = max_logit + std::log(sum_exp);
  const double loss = lse - logits[speed_label];

  if (correct) {
    std::size_t arg = 0;
    for (std::size_t s = 1; s < S; ++s)
      if (logits[s] > logits[arg]) arg = s;
    *correct = arg == speed_label;
  }

  if (grad_scale != T(0)) {
    const double g = static_cast<double>(grad_scale);
    for (std::size_t s = 0; s < S; ++s) {
      const double p = std::exp(logits[s] - lse);
      const double dlogit = g * (p - (s == speed_label ? 1.0 : 0.0));
      const T* w = W.data() + s * dim;
      T* dw = d_W.data() + s * dim;
      for (std::size_t i = 0; i < dim; ++i) {
        dw[i] += static_cast<T>(dlogit * static_cast<double>(m[i]));
        d_m[i] += static_cast<T>(dlogit * static_cast<double>(w[i]));
      }
      d_b[s] += static_cast<T>(dlogit);
    }
  }
  return static_cast<T>(loss);
}

// Explicit instantiations: float for training, double for the gradient suite.
#define RSPLAB_INSTANTIATE_LOSSES(T)                                                           \
  template T similarity<T>(std::span<const T>, std::span<const T>);                            \
  template T triplet_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>, T);   \
  template T triplet_loss_grad<T>(std::span<const T>, std::span<const T>, std::span<const T>, \
                                  T, T, std::span<T>, std::span<T>, std::span<T>,              \
                                  TripletAux*);                                                \
  template T triplet_loss_symmetric_grad<T>(std::span<const T>, std::span<const T>,           \
                                            std::span<const T>, T, T, std::span<T>,           \
                                            std::span<T>, std::span<T>, TripletAux*);         \
  template T infonce_loss<T>(std::span<const T>, std::span<const T>, const Tensor<T>&, T);     \
  template T infonce_loss_grad<T>(std::span<const T>, std::span<const T>, const Tensor<T>&,    \
                                  T, T, std::span<T>, std::span<T>, Tensor<T>*, InfoNceAux*);  \
  template T total_loss<T>(T, T, T);                                                           \
  template T speed_prediction_loss<T>(std::span<const T>, std::size_t, const Tensor<T>&,       \
                                      std::span<const T>);                                     \
  template T speed_prediction_loss_grad<T>(std::span<const T>, std::size_t, const Tensor<T>&,  \
                                           std::span<const T>, T, std::span<T>, Tensor<T>&,    \
                                           std::span<T>, bool*);

RSPLAB_INSTANTIATE_LOSSES(float)
RSPLAB_INSTANTIATE_LOSSES(double)

#undef RSPLAB_INSTANTIATE_LOSSES

}  // namespace rsplab::loss
