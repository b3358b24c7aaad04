#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsplab/tensor.hpp"

namespace rsplab::loss {

// Metric-learning objectives on embedding vectors. All functions are pure;
// accumulation happens in double regardless of the scalar type so float
// callers still get stable sums. Gradients are analytic and are validated
// against central finite differences in the test suite.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dot-product similarity d(u, v). For unit inputs the result lies in
// [-1-eps, 1+eps]. Throws ShapeError on dimension mismatch.
template <typename T>
T similarity(std::span<const T> u, std::span<const T> v);

// Hinge loss max(0, margin - (p+ - p-)) with p+ = d(anchor, pos) and
// p- = d(anchor, neg). The subgradient at the kink is 0: gradients flow
// only when margin - (p+ - p-) > 0 strictly.
template <typename T>
T triplet_loss(std::span<const T> anchor, std::span<const T> pos,
               std::span<const T> neg, T margin);

struct TripletAux {
  double p_pos = 0.0;  // d(anchor, pos)
  double p_neg = 0.0;  // d(anchor, neg)
  bool active = false; // hinge engaged
};

// Same loss; also accumulates d(loss)/d(input) into the grad spans
// (scaled by grad_scale) and reports the similarity pair.
template <typename T>
T triplet_loss_grad(std::span<const T> anchor, std::span<const T> pos,
                    std::span<const T> neg, T margin, T grad_scale,
                    std::span<T> d_anchor, std::span<T> d_pos, std::span<T> d_neg,
                    TripletAux* aux = nullptr);

// Symmetric variant: mean of the anchor-on-first and anchor-on-second hinges.
template <typename T>
T triplet_loss_symmetric_grad(std::span<const T> a, std::span<const T> b,
                              std::span<const T> neg, T margin, T grad_scale,
                              std::span<T> d_a, std::span<T> d_b, std::span<T> d_neg,
                              TripletAux* aux = nullptr);

// InfoNCE: -log(q+ / (q+ + sum_n q_n)) with q+ = exp(d(a_i, a_j)/tau) and
// q_n = exp(d(a_i, neg_n)/tau). Computed via log-sum-exp with the max logit
// subtracted, so inputs at the similarity extremes stay finite. Equivalent
// to cross-entropy over K+1 logits d/tau with the positive at index 0.
// negatives is a [K, dim] tensor, K >= 1. tau <= 0 is a ConfigError.
template <typename T>
T infonce_loss(std::span<const T> a_i, std::span<const T> a_j,
               const Tensor<T>& negatives, T tau);

struct InfoNceAux {
  double p_pos = 0.0;         // d(a_i, a_j)
  bool positive_first = false; // positive logit strictly ranked first
};

// Gradient form. d_negatives may be null when negatives are constants
// (bank entries). Gradients are accumulated scaled by grad_scale.
template <typename T>
T infonce_loss_grad(std::span<const T> a_i, std::span<const T> a_j,
                    const Tensor<T>& negatives, T tau, T grad_scale,
                    std::span<T> d_a_i, std::span<T> d_a_j,
                    Tensor<T>* d_negatives = nullptr,
                    InfoNceAux* aux = nullptr);

// Joint objective L_m + lambda * L_a. lambda >= 0.
template <typename T>
T total_loss(T l_m, T l_a, T lambda);

// Cross-entropy of a linear speed classifier: logits = W m + b, softmax,
// -log p[label]. Used only by the SP ablation mode. W is [num_speeds, dim].
template <typename T>
T speed_prediction_loss(std::span<const T> m, std::size_t speed_label,
                        const Tensor<T>& W, std::span<const T> b);

template <typename T>
T speed_prediction_loss_grad(std::span<const T> m, std::size_t speed_label,
                             const Tensor<T>& W, std::span<const T> b, T grad_scale,
                             std::span<T> d_m, Tensor<T>& d_W, std::span<T> d_b,
                             bool* correct = nullptr);

// Per-step scalar record logged to the metrics stream.
struct LossReport {
  double l_m = 0.0;
  double l_a = 0.0;
  double l_total = 0.0;
  double p_pos = 0.0;    // mean positive-pair similarity (triplet)
  double p_neg = 0.0;    // mean negative-pair similarity (triplet)
  double nce_acc = 0.0;  // fraction of positives ranked first in InfoNCE
};

}  // namespace rsplab::loss
