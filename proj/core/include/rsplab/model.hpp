#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsplab/config.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/nn.hpp"
#include "rsplab/tensor.hpp"

namespace rsplab::model {

// Encoder geometry. Stage s applies Conv3d(widths[s-1] -> widths[s]) with
// spatial stride 2; temporal stride is 1 for the first stage and 2 after, so
// an 8-frame 64x64 clip ends at [widths.back(), T'=1, 4, 4]. Same padding
// with odd kernels keeps every output extent >= 1 for any positive input.
struct EncoderConfig {
  std::vector<int> widths = {32, 64, 128, 256};  // one entry per stage
  std::vector<int> kernels = {3, 3, 3, 3};       // odd; broadcast if size 1
  int in_channels = 3;
  int embed_dim = 128;
  int group_norm_groups = 8;  // 0 disables normalization
  bool normalize_embeddings = true;
  // Re-normalize the last feature map before global pooling. Without it the
  // pooled features of different clips share a large common component (every
  // post-ReLU channel has a similar positive spatial mean), which leaves the
  // contrastive losses with near-collinear embeddings at init.
  bool final_norm = true;

  static EncoderConfig from_config(const config::RawConfig& cfg);
  void validate() const;
  int feature_dim() const { return widths.back(); }
};

template <typename T>
struct EncoderOut {
  Tensor<T> feature;  // [N, C, T', H', W'] last convolutional features
  Tensor<T> pooled;   // [N, C] global average over (T', H', W')
};

template <typename T>
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg);

  void init_params(Rng& rng);
  EncoderOut<T> forward(const Tensor<T>& x, bool training);  // x: [N,3,T,H,W]
  // d_pooled: [N, C]; optional d_feature adds a direct gradient on the
  // feature map. The input gradient is not materialized.
  void backward(const Tensor<T>& d_pooled, const Tensor<T>* d_feature = nullptr);

  std::vector<std::pair<std::string, Tensor<T>*>> named_params();
  std::vector<std::pair<std::string, Tensor<T>*>> named_grads();
  void zero_grad();
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  std::vector<nn::Conv3d<T>> convs_;
  std::vector<nn::GroupNorm<T>> norms_;
  std::vector<nn::ReLU<T>> relus_;
  std::vector<nn::GroupNorm<T>> final_norm_;  // 0 or 1 entries
  nn::GlobalAvgPool<T> pool_;
};

template <typename T>
struct ModelOut {
  Tensor<T> feature;  // [N, C, T', H', W']
  Tensor<T> pooled;   // [N, C]                 (x in the equations)
  Tensor<T> m_raw;    // [N, 128] pre-normalization motion projection
  Tensor<T> m;        // [N, 128] unit-norm motion embedding
  Tensor<T> a_raw;    // [N, 128]
  Tensor<T> a;        // [N, 128] unit-norm appearance embedding
};

// Encoder plus the two bias-free projection heads g_m, g_a (disjoint
// parameters, both reading the same pooled feature).
template <typename T>
class RspNet {
 public:
  explicit RspNet(const EncoderConfig& cfg);

  void init_params(std::uint64_t seed);
  ModelOut<T> forward(const Tensor<T>& clips, bool training);
  // dm/da are gradients w.r.t. the unit-norm embeddings (zero tensors when a
  // loss term is disabled); d_pooled adds a direct gradient on pooled x
  // (speed-prediction ablation head).
  void backward(const Tensor<T>& dm, const Tensor<T>& da,
                const Tensor<T>* d_pooled_extra = nullptr);

  std::vector<std::pair<std::string, Tensor<T>*>> named_params();
  std::vector<std::pair<std::string, Tensor<T>*>> named_grads();
  void zero_grad();
  const EncoderConfig& config() const { return encoder.config(); }

  Encoder<T> encoder;
  nn::Linear<T> head_m;  // [128, C], no bias
  nn::Linear<T> head_a;
  nn::L2Normalize<T> norm_m;
  nn::L2Normalize<T> norm_a;
};

using RspNetF = RspNet<float>;

// [N clips of [T,H,W,3]] -> [N, 3, T, H, W] model input batch.
template <typename T>
Tensor<T> clips_to_batch(const std::vector<data::Clip>& clips);

extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class RspNet<float>;
extern template class RspNet<double>;
extern template Tensor<float> clips_to_batch<float>(const std::vector<data::Clip>&);
extern template Tensor<double> clips_to_batch<double>(const std::vector<data::Clip>&);

}  // namespace rsplab::model
