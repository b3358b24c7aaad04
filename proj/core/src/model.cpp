#include "rsplab/model.hpp"

#include <algorithm>

namespace rsplab::model {

using config::ConfigError;

EncoderConfig EncoderConfig::from_config(const config::RawConfig& cfg) {
  EncoderConfig c;
  {
    std::vector<int> widths = cfg.get_int_list("model", "widths", c.widths);
    c.widths = widths;
  }
  // When widths is overridden but kernels is not, fall back to a broadcast 3
  // so the default stage count never leaks into a reshaped encoder.
  c.kernels = cfg.get_int_list("model", "kernels", std::vector<int>{3});
  c.embed_dim = static_cast<int>(cfg.get_int("model", "embed_dim", c.embed_dim));
  c.group_norm_groups =
      static_cast<int>(cfg.get_int("model", "group_norm_groups", c.group_norm_groups));
  c.normalize_embeddings =
      cfg.get_bool("model", "normalize_embeddings", c.normalize_embeddings);
  c.final_norm = cfg.get_bool("model", "final_norm", c.final_norm);
  c.validate();
  return c;
}

void EncoderConfig::validate() const {
  if (widths.empty()) throw ConfigError("[model] widths must name at least one stage");
  for (int w : widths) {
    if (w < 1) throw ConfigError("[model] widths must be positive");
  }
  if (kernels.size() != 1 && kernels.size() != widths.size()) {
    throw ConfigError("[model] kernels must have one entry or one per stage");
  }
  for (int k : kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("[model] kernels must be odd and positive");
  }
  if (in_channels != 3) throw ConfigError("[model] in_channels must be 3");
  if (embed_dim < 1) throw ConfigError("[model] embed_dim must be positive");
  if (group_norm_groups < 0) throw ConfigError("[model] group_norm_groups must be >= 0");
  if (group_norm_groups > 0) {
    for (int w : widths) {
      if (w % group_norm_groups != 0) {
        throw ConfigError("[model] group_norm_groups must divide every stage width");
      }
    }
  }
}

namespace {

int kernel_for_stage(const EncoderConfig& cfg, std::size_t stage) {
  return cfg.kernels.size() == 1 ? cfg.kernels[0] : cfg.kernels[stage];
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int in_ch = cfg_.in_channels;
  for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
    const int out_ch = cfg_.widths[s];
    const int stride_t = s == 0 ? 1 : 2;
    convs_.emplace_back(in_ch, out_ch, kernel_for_stage(cfg_, s), stride_t, 2);
    if (cfg_.group_norm_groups > 0) {
      norms_.emplace_back(out_ch, cfg_.group_norm_groups);
    }
    relus_.emplace_back();
    in_ch = out_ch;
  }
  if (cfg_.group_norm_groups > 0 && cfg_.final_norm) {
    final_norm_.emplace_back(cfg_.widths.back(), cfg_.group_norm_groups);
  }
}

template <typename T>
void Encoder<T>::init_params(Rng& rng) {
  for (auto& conv : convs_) conv.init_params(rng);
  for (auto& gn : norms_) {
    gn.gamma.fill(T(1));
    gn.beta.fill(T(0));
  }
  for (auto& gn : final_norm_) {
    gn.gamma.fill(T(1));
    gn.beta.fill(T(0));
  }
}

template <typename T>
EncoderOut<T> Encoder<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> h = x;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    h = convs_[s].forward(h, training);
    if (!norms_.empty()) h = norms_[s].forward(h, training);
    h = relus_[s].forward(h, training);
  }
  if (!final_norm_.empty()) h = final_norm_[0].forward(h, training);
  EncoderOut<T> out;
  out.pooled = pool_.forward(h, training);
  out.feature = std::move(h);
  return out;
}

template <typename T>
void Encoder<T>::backward(const Tensor<T>& d_pooled, const Tensor<T>* d_feature) {
  Tensor<T> dh = pool_.backward(d_pooled);
  if (d_feature != nullptr) {
    check_shape(d_feature->shape(), dh.shape(), "Encoder::backward d_feature");
    for (std::size_t i = 0; i < dh.numel(); ++i) dh[i] += (*d_feature)[i];
  }
  if (!final_norm_.empty()) dh = final_norm_[0].backward(dh);
  for (std::size_t s = convs_.size(); s-- > 0;) {
    dh = relus_[s].backward(dh);
    if (!norms_.empty()) dh = norms_[s].backward(dh);
    dh = convs_[s].backward(dh, /*need_dx=*/s != 0);
  }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Encoder<T>::named_params() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    const std::string tag = "enc.conv" + std::to_string(s);
    out.emplace_back(tag + ".weight", &convs_[s].weight);
    out.emplace_back(tag + ".bias", &convs_[s].bias);
    if (!norms_.empty()) {
      const std::string gtag = "enc.gn" + std::to_string(s);
      out.emplace_back(gtag + ".gamma", &norms_[s].gamma);
      out.emplace_back(gtag + ".beta", &norms_[s].beta);
    }
  }
  if (!final_norm_.empty()) {
    out.emplace_back("enc.final_norm.gamma", &final_norm_[0].gamma);
    out.emplace_back("enc.final_norm.beta", &final_norm_[0].beta);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Encoder<T>::named_grads() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    const std::string tag = "enc.conv" + std::to_string(s);
    out.emplace_back(tag + ".weight", &convs_[s].grad_weight);
    out.emplace_back(tag + ".bias", &convs_[s].grad_bias);
    if (!norms_.empty()) {
      const std::string gtag = "enc.gn" + std::to_string(s);
      out.emplace_back(gtag + ".gamma", &norms_[s].grad_gamma);
      out.emplace_back(gtag + ".beta", &norms_[s].grad_beta);
    }
  }
  if (!final_norm_.empty()) {
    out.emplace_back("enc.final_norm.gamma", &final_norm_[0].grad_gamma);
    out.emplace_back("enc.final_norm.beta", &final_norm_[0].grad_beta);
  }
  return out;
}

template <typename T>
void Encoder<T>::zero_grad() {
  for (auto& conv : convs_) conv.zero_grad();
  for (auto& gn : norms_) gn.zero_grad();
  for (auto& gn : final_norm_) gn.zero_grad();
}

template <typename T>
RspNet<T>::RspNet(const EncoderConfig& cfg)
    : encoder(cfg),
      head_m(cfg.feature_dim(), cfg.embed_dim, /*with_bias=*/false),
      head_a(cfg.feature_dim(), cfg.embed_dim, /*with_bias=*/false) {}

template <typename T>
void RspNet<T>::init_params(std::uint64_t seed) {
  Rng enc_rng = derive_rng(seed, "init_encoder");
  encoder.init_params(enc_rng);
  Rng m_rng = derive_rng(seed, "init_head_m");
  head_m.init_params(m_rng);
  Rng a_rng = derive_rng(seed, "init_head_a");
  head_a.init_params(a_rng);
}

template <typename T>
ModelOut<T> RspNet<T>::forward(const Tensor<T>& clips, bool training) {
  EncoderOut<T> enc = encoder.forward(clips, training);
  ModelOut<T> out;
  out.m_raw = head_m.forward(enc.pooled, training);
  out.a_raw = head_a.forward(enc.pooled, training);
  if (encoder.config().normalize_embeddings) {
    out.m = norm_m.forward(out.m_raw, training);
    out.a = norm_a.forward(out.a_raw, training);
  } else {
    out.m = out.m_raw;
    out.a = out.a_raw;
  }
  out.feature = std::move(enc.feature);
  out.pooled = std::move(enc.pooled);
  return out;
}

template <typename T>
void RspNet<T>::backward(const Tensor<T>& dm, const Tensor<T>& da,
                         const Tensor<T>* d_pooled_extra) {
  const bool normalized = encoder.config().normalize_embeddings;
  Tensor<T> dz_m = normalized ? norm_m.backward(dm) : dm;
  Tensor<T> dz_a = normalized ? norm_a.backward(da) : da;
  Tensor<T> d_pool_m = head_m.backward(dz_m, true);
  Tensor<T> d_pool_a = head_a.backward(dz_a, true);
  for (std::size_t i = 0; i < d_pool_m.numel(); ++i) d_pool_m[i] += d_pool_a[i];
  if (d_pooled_extra != nullptr) {
    check_shape(d_pooled_extra->shape(), d_pool_m.shape(), "RspNet::backward d_pooled_extra");
    for (std::size_t i = 0; i < d_pool_m.numel(); ++i) d_pool_m[i] += (*d_pooled_extra)[i];
  }
  encoder.backward(d_pool_m);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> RspNet<T>::named_params() {
  auto out = encoder.named_params();
  out.emplace_back("head_m.weight", &head_m.weight);
  out.emplace_back("head_a.weight", &head_a.weight);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> RspNet<T>::named_grads() {
  auto out = encoder.named_grads();
  out.emplace_back("head_m.weight", &head_m.grad_weight);
  out.emplace_back("head_a.weight", &head_a.grad_weight);
  return out;
}

template <typename T>
void RspNet<T>::zero_grad() {
  encoder.zero_grad();
  head_m.zero_grad();
  head_a.zero_grad();
}

template <typename T>
Tensor<T> clips_to_batch(const std::vector<data::Clip>& clips) {
  if (clips.empty()) throw ShapeError("clips_to_batch: empty batch");
  const std::size_t t = clips[0].pixels.dim(0);
  const std::size_t h = clips[0].pixels.dim(1);
  const std::size_t w = clips[0].pixels.dim(2);
  Tensor<T> out({clips.size(), 3, t, h, w});
  const std::size_t plane = t * h * w;
  for (std::size_t n = 0; n < clips.size(); ++n) {
    check_shape(clips[n].pixels.shape(), {t, h, w, 3}, "clips_to_batch");
    const float* src = clips[n].pixels.data();
    T* dst = out.data() + n * 3 * plane;
    // [T,H,W,C] -> [C,T,H,W]
    for (std::size_t p = 0; p < plane; ++p) {
      dst[p] = static_cast<T>(src[p * 3]);
      dst[plane + p] = static_cast<T>(src[p * 3 + 1]);
      dst[2 * plane + p] = static_cast<T>(src[p * 3 + 2]);
    }
  }
  return out;
}

template class Encoder<float>;
template class Encoder<double>;
template class RspNet<float>;
template class RspNet<double>;
template Tensor<float> clips_to_batch<float>(const std::vector<data::Clip>&);
template Tensor<double> clips_to_batch<double>(const std::vector<data::Clip>&);

}  // namespace rsplab::model
