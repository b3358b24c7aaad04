#include "rsplab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rsplab/image.hpp"
#include "rsplab/parallel.hpp"

namespace rsplab::train {

namespace fs = std::filesystem;
using config::ConfigError;

Mode mode_from_string(const std::string& s) {
  if (s == "rsp_avid") return Mode::rsp_avid;
  if (s == "rsp_only") return Mode::rsp_only;
  if (s == "avid_only") return Mode::avid_only;
  if (s == "sp_avid") return Mode::sp_avid;
  if (s == "rsp_vid") return Mode::rsp_vid;
  throw ConfigError("[train] unknown mode '" + s +
                    "' (expected rsp_avid, rsp_only, avid_only, sp_avid, or rsp_vid)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::rsp_avid: return "rsp_avid";
    case Mode::rsp_only: return "rsp_only";
    case Mode::avid_only: return "avid_only";
    case Mode::sp_avid: return "sp_avid";
    case Mode::rsp_vid: return "rsp_vid";
  }
  return "?";
}

NegativeSource negative_source_from_string(const std::string& s) {
  if (s == "bank") return NegativeSource::bank;
  if (s == "resample") return NegativeSource::resample;
  throw ConfigError("[train] unknown negative_source '" + s + "' (expected bank or resample)");
}

std::string to_string(NegativeSource s) {
  return s == NegativeSource::bank ? "bank" : "resample";
}

TrainConfig TrainConfig::from_config(const config::RawConfig& cfg, std::uint64_t default_seed) {
  TrainConfig c;
  c.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", c.batch_size));
  c.epochs = static_cast<int>(cfg.get_int("train", "epochs", c.epochs));
  c.base_lr = cfg.get_real("train", "base_lr", c.base_lr);
  c.momentum = cfg.get_real("train", "momentum", c.momentum);
  c.weight_decay = cfg.get_real("train", "weight_decay", c.weight_decay);
  c.gamma = cfg.get_real("train", "gamma", c.gamma);
  c.tau = cfg.get_real("train", "tau", c.tau);
  c.lambda = cfg.get_real("train", "lambda", c.lambda);
  c.bank_size = static_cast<int>(cfg.get_int("train", "bank_size", c.bank_size));
  c.speed_set = cfg.get_int_list("train", "speed_set", c.speed_set);
  c.mode = mode_from_string(cfg.get_str("train", "mode", to_string(c.mode)));
  c.negative_source =
      negative_source_from_string(cfg.get_str("train", "negative_source", to_string(c.negative_source)));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("train", "seed", static_cast<std::int64_t>(default_seed)));
  c.checkpoint_every = static_cast<int>(cfg.get_int("train", "checkpoint_every", c.checkpoint_every));
  c.symmetric_triplet = cfg.get_bool("train", "symmetric_triplet", c.symmetric_triplet);
  c.momentum_encoder = cfg.get_bool("train", "momentum_encoder", c.momentum_encoder);
  c.key_momentum = cfg.get_real("train", "key_momentum", c.key_momentum);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("[train] batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("[train] epochs must be >= 1");
  if (base_lr <= 0.0) throw ConfigError("[train] base_lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("[train] momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("[train] weight_decay must be >= 0");
  if (gamma <= 0.0) throw ConfigError("[train] gamma must be positive");
  if (tau <= 0.0) throw ConfigError("[train] tau must be positive");
  if (lambda < 0.0) throw ConfigError("[train] lambda must be >= 0");
  if (bank_size < 1) throw ConfigError("[train] bank_size must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("[train] checkpoint_every must be >= 1");
  if (key_momentum < 0.0 || key_momentum >= 1.0) {
    throw ConfigError("[train] key_momentum must lie in [0, 1)");
  }
  if (speed_set.size() < 2) throw ConfigError("[train] speed_set needs at least two speeds");
  for (std::size_t i = 0; i < speed_set.size(); ++i) {
    if (speed_set[i] < 1) throw ConfigError("[train] speeds must be >= 1");
    if (i > 0 && speed_set[i] <= speed_set[i - 1]) {
      throw ConfigError("[train] speed_set must be strictly increasing");
    }
  }
}

double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr) {
  if (step < 0 || total_steps < 1 || step > total_steps) {
    throw ConfigError("lr_schedule: step must lie in [0, total_steps]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

namespace {

int clips_per_video(Mode m) {
  switch (m) {
    case Mode::sp_avid: return 2;   // A-VID pair only
    case Mode::rsp_vid: return 5;   // triplet + separately sampled VID pair
    default: return 3;              // triplet; A-VID reuses (c_i, c_j)
  }
}

bool mode_uses_triplet(Mode m) { return m != Mode::sp_avid; }

}  // namespace

Trainer::Trainer(const data::Corpus& corpus, const model::EncoderConfig& enc_cfg,
                 const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug_cfg,
                 const TrainConfig& cfg, std::uint64_t config_hash)
    : corpus_(corpus),
      clip_cfg_(clip_cfg),
      aug_cfg_(aug_cfg),
      cfg_(cfg),
      config_hash_(config_hash),
      net_(enc_cfg) {
  cfg_.validate();
  clip_cfg_.validate();
  aug_cfg_.validate();
  if (corpus_.size() == 0) throw ConfigError("trainer: corpus is empty");
  if (cfg_.negative_source == NegativeSource::bank) {
    bank_ = std::make_unique<NegativeBank>(cfg_.bank_size, enc_cfg.embed_dim);
  }
  const std::size_t n_speeds = cfg_.speed_set.size();
  const std::size_t dim = static_cast<std::size_t>(enc_cfg.embed_dim);
  sp_weight_ = TensorF({n_speeds, dim});
  sp_bias_ = TensorF({n_speeds});
  sp_grad_weight_ = TensorF({n_speeds, dim});
  sp_grad_bias_ = TensorF({n_speeds});
  for (auto [name, p] : all_params()) momentum_[name] = TensorF(p->shape());
}

std::vector<std::pair<std::string, TensorF*>> Trainer::all_params() {
  auto out = net_.named_params();
  if (cfg_.mode == Mode::sp_avid) {
    out.emplace_back("sp.weight", &sp_weight_);
    out.emplace_back("sp.bias", &sp_bias_);
  }
  return out;
}

std::vector<std::pair<std::string, TensorF*>> Trainer::all_grads() {
  auto out = net_.named_grads();
  if (cfg_.mode == Mode::sp_avid) {
    out.emplace_back("sp.weight", &sp_grad_weight_);
    out.emplace_back("sp.bias", &sp_grad_bias_);
  }
  return out;
}

void Trainer::init() {
  net_.init_params(cfg_.seed);
  Rng sp_rng = derive_rng(cfg_.seed, "init_sp");
  for (auto& v : sp_weight_.vec()) v = static_cast<float>(sp_rng.normal() * 0.01);
  sp_bias_.fill(0.0f);
  for (auto& [name, buf] : momentum_) buf.fill(0.0f);
  epoch_ = 0;
  step_ = 0;
  if (bank_) warm_fill_bank();
}

TensorF Trainer::encode_appearance(const std::vector<data::Clip>& clips, int chunk) {
  const std::size_t n = clips.size();
  const std::size_t dim = static_cast<std::size_t>(net_.config().embed_dim);
  TensorF out({n, dim});
  for (std::size_t ofs = 0; ofs < n; ofs += static_cast<std::size_t>(chunk)) {
    const std::size_t take = std::min<std::size_t>(chunk, n - ofs);
    std::vector<data::Clip> part(clips.begin() + ofs, clips.begin() + ofs + take);
    auto x = model::clips_to_batch<float>(part);
    model::ModelOut<float> o = net_.forward(x, false);
    std::copy(o.a.data(), o.a.data() + take * dim, out.data() + ofs * dim);
  }
  return out;
}

void Trainer::warm_fill_bank() {
  Rng rng = derive_rng(cfg_.seed, "bank_warmfill");
  const bool speed_aug = cfg_.mode != Mode::rsp_vid;
  const int fixed_speed = *std::min_element(cfg_.speed_set.begin(), cfg_.speed_set.end());
  while (!bank_->full()) {
    const int remaining = bank_->capacity() - bank_->size();
    const int take = std::min(64, remaining);
    std::vector<data::ClipSpec> specs(static_cast<std::size_t>(take));
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(take));
    std::vector<std::int64_t> tags(static_cast<std::size_t>(take));
    for (int i = 0; i < take; ++i) {
      const std::size_t v =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(corpus_.size()) - 1));
      const int speed =
          speed_aug
              ? cfg_.speed_set[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(cfg_.speed_set.size()) - 1))]
              : fixed_speed;
      specs[static_cast<std::size_t>(i)] =
          data::sample_clip_spec(corpus_.record(v), clip_cfg_.length, speed, rng);
      seeds[static_cast<std::size_t>(i)] = rng.next_u64();
      tags[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
    }
    std::vector<data::Clip> clips(static_cast<std::size_t>(take));
    parallel_for(static_cast<std::size_t>(take), env_worker_count(), [&](std::size_t i) {
      clips[i] = data::realize_clip(corpus_, specs[i], clip_cfg_, aug_cfg_, seeds[i]);
    });
    TensorF a = encode_appearance(clips);
    const std::size_t dim = a.dim(1);
    for (int i = 0; i < take; ++i) {
      bank_->enqueue(a.data() + static_cast<std::size_t>(i) * dim, tags[static_cast<std::size_t>(i)],
                     -1);
    }
  }
}

std::int64_t Trainer::steps_per_epoch() const {
  const std::int64_t n = static_cast<std::int64_t>(corpus_.size());
  return (n + cfg_.batch_size - 1) / cfg_.batch_size;
}

std::int64_t Trainer::total_steps() const {
  return static_cast<std::int64_t>(cfg_.epochs) * steps_per_epoch();
}

StepReport Trainer::train_step(const std::vector<std::size_t>& batch, Rng& rng) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  const int b = static_cast<int>(batch.size());
  const int cpv = clips_per_video(cfg_.mode);
  const std::size_t dim = static_cast<std::size_t>(net_.config().embed_dim);
  const bool use_triplet = mode_uses_triplet(cfg_.mode);
  const int fixed_speed = *std::min_element(cfg_.speed_set.begin(), cfg_.speed_set.end());

  StepReport r;
  r.step = step_;
  r.epoch = epoch_;
  r.lr = lr_schedule(step_, total_steps(), cfg_.base_lr);
  r.batch_videos.assign(batch.begin(), batch.end());

  // 1. Draw every spec and augmentation seed serially (determinism), then
  //    realize the clips in parallel.
  std::vector<data::ClipSpec> specs;
  specs.reserve(static_cast<std::size_t>(b) * cpv);
  std::vector<std::uint64_t> seeds;
  seeds.reserve(specs.capacity());
  for (int vi = 0; vi < b; ++vi) {
    const data::VideoRecord& rec = corpus_.record(batch[static_cast<std::size_t>(vi)]);
    if (use_triplet) {
      data::TripletSpec tri = data::sample_rsp_triplet_spec(rec, clip_cfg_.length, cfg_.speed_set, rng);
      specs.push_back(tri.i);
      specs.push_back(tri.j);
      specs.push_back(tri.k);
    } else {
      auto pair = data::sample_avid_pair_spec(rec, clip_cfg_.length, cfg_.speed_set, true,
                                              fixed_speed, rng);
      specs.push_back(pair.first);
      specs.push_back(pair.second);
    }
    if (cfg_.mode == Mode::rsp_vid) {
      auto pair = data::sample_avid_pair_spec(rec, clip_cfg_.length, cfg_.speed_set, false,
                                              fixed_speed, rng);
      specs.push_back(pair.first);
      specs.push_back(pair.second);
    }
    for (int s = 0; s < cpv; ++s) seeds.push_back(rng.next_u64());
  }

  // 2. Resample-mode negatives: the literal per-video re-sampling (no grad).
  //    Bank-mode negatives are assembled after the forward pass below.
  std::vector<TensorF> resampled;  // per video, [K, dim]
  if (cfg_.negative_source == NegativeSource::resample) {
    resampled.reserve(static_cast<std::size_t>(b));
    const bool speed_aug = cfg_.mode != Mode::rsp_vid;
    for (int vi = 0; vi < b; ++vi) {
      const data::VideoRecord& rec = corpus_.record(batch[static_cast<std::size_t>(vi)]);
      std::vector<data::Clip> negs =
          data::sample_negatives(corpus_, rec.id, cfg_.bank_size, clip_cfg_, cfg_.speed_set,
                                 speed_aug, fixed_speed, aug_cfg_, rng);
      for (const data::Clip& c : negs) {
        r.negative_tags.push_back(static_cast<std::int64_t>(corpus_.index_of(c.spec.video_id)));
        r.negative_steps.push_back(step_);
      }
      r.negatives_used.push_back(negs.size());
      resampled.push_back(encode_appearance(negs));
    }
  }

  // 3. Realize and encode the training batch.
  std::vector<data::Clip> clips(specs.size());
  parallel_for(specs.size(), env_worker_count(), [&](std::size_t i) {
    clips[i] = data::realize_clip(corpus_, specs[i], clip_cfg_, aug_cfg_, seeds[i]);
  });
  auto x = model::clips_to_batch<float>(clips);
  net_.zero_grad();
  sp_grad_weight_.fill(0.0f);
  sp_grad_bias_.fill(0.0f);
  model::ModelOut<float> out = net_.forward(x, true);

  // 3b. Bank mode: enqueue this step's a_j embeddings (evicting the oldest),
  //     then give every positive the whole bank minus its own same-step
  //     entries. Same-step entries from *other* videos therefore serve as
  //     fresh in-batch negatives; without them the loss can be lowered by
  //     simply drifting the embedding cloud away from the stale bank instead
  //     of separating content. Stored vectors stay constants (no gradient).
  std::vector<TensorF> bank_negs;  // per video, [size-?, dim]
  if (cfg_.negative_source == NegativeSource::bank) {
    if (bank_->size() == 0) throw TrainError("train_step: negative bank is empty; call init()");
    for (int vi = 0; vi < b; ++vi) {
      const int aj = vi * cpv + (cfg_.mode == Mode::rsp_vid ? 4 : 1);
      bank_->enqueue(out.a.data() + static_cast<std::size_t>(aj) * dim,
                     static_cast<std::int64_t>(batch[static_cast<std::size_t>(vi)]), step_);
    }
    const TensorF pool = bank_->snapshot();
    r.negative_tags = bank_->tags();
    r.negative_steps = bank_->steps();
    const std::size_t n_pool = r.negative_tags.size();
    bank_negs.reserve(static_cast<std::size_t>(b));
    for (int vi = 0; vi < b; ++vi) {
      const auto vid = static_cast<std::int64_t>(batch[static_cast<std::size_t>(vi)]);
      auto own = [&](std::size_t e) {
        return r.negative_steps[e] == step_ && r.negative_tags[e] == vid;
      };
      std::size_t keep = 0;
      for (std::size_t e = 0; e < n_pool; ++e) keep += own(e) ? 0 : 1;
      TensorF negs({keep, dim});
      std::size_t w = 0;
      for (std::size_t e = 0; e < n_pool; ++e) {
        if (own(e)) continue;
        std::copy_n(pool.data() + e * dim, dim, negs.data() + w++ * dim);
      }
      r.negatives_used.push_back(keep);
      bank_negs.push_back(std::move(negs));
    }
  }

  // 4. Losses and embedding gradients.
  Tensor<float> dm(out.m.shape());
  Tensor<float> da(out.a.shape());
  const float scale_m = static_cast<float>(cfg_.alpha_m() / b);
  const float scale_a = static_cast<float>(cfg_.lambda_eff() / b);
  double l_m_sum = 0.0, l_a_sum = 0.0, p_pos_sum = 0.0, p_neg_sum = 0.0;
  int nce_first = 0;

  auto row = [&](Tensor<float>& t, int i) {
    return std::span<float>(t.data() + static_cast<std::size_t>(i) * dim, dim);
  };
  auto crow = [&](const Tensor<float>& t, int i) {
    return std::span<const float>(t.data() + static_cast<std::size_t>(i) * dim, dim);
  };

  for (int vi = 0; vi < b; ++vi) {
    const int base = vi * cpv;
    if (use_triplet) {
      loss::TripletAux aux;
      float l;
      if (cfg_.symmetric_triplet) {
        l = loss::triplet_loss_symmetric_grad<float>(
            crow(out.m, base), crow(out.m, base + 1), crow(out.m, base + 2),
            static_cast<float>(cfg_.gamma), scale_m, row(dm, base), row(dm, base + 1),
            row(dm, base + 2), &aux);
      } else {
        l = loss::triplet_loss_grad<float>(
            crow(out.m, base), crow(out.m, base + 1), crow(out.m, base + 2),
            static_cast<float>(cfg_.gamma), scale_m, row(dm, base), row(dm, base + 1),
            row(dm, base + 2), &aux);
      }
      l_m_sum += l;
      p_pos_sum += aux.p_pos;
      p_neg_sum += aux.p_neg;
    } else {
      // Per-clip speed classification on the two A-VID clips.
      double ce = 0.0;
      for (int s = 0; s < 2; ++s) {
        const int ri = base + s;
        const int speed = specs[static_cast<std::size_t>(ri)].speed;
        const auto it = std::find(cfg_.speed_set.begin(), cfg_.speed_set.end(), speed);
        const std::size_t label = static_cast<std::size_t>(it - cfg_.speed_set.begin());
        ce += loss::speed_prediction_loss_grad<float>(
            crow(out.m, ri), label, sp_weight_,
            std::span<const float>(sp_bias_.data(), sp_bias_.numel()), scale_m / 2.0f,
            row(dm, ri), sp_grad_weight_,
            std::span<float>(sp_grad_bias_.data(), sp_grad_bias_.numel()), nullptr);
      }
      l_m_sum += ce / 2.0;
    }

    const int ai = base + (cfg_.mode == Mode::rsp_vid ? 3 : 0);
    const int aj = ai + 1;
    loss::InfoNceAux aux;
    const TensorF& negs = cfg_.negative_source == NegativeSource::bank
                              ? bank_negs[static_cast<std::size_t>(vi)]
                              : resampled[static_cast<std::size_t>(vi)];
    l_a_sum += loss::infonce_loss_grad<float>(crow(out.a, ai), crow(out.a, aj), negs,
                                              static_cast<float>(cfg_.tau), scale_a, row(da, ai),
                                              row(da, aj), nullptr, &aux);
    if (aux.positive_first) ++nce_first;
  }

  r.losses.l_m = l_m_sum / b;
  r.losses.l_a = l_a_sum / b;
  r.losses.l_total = cfg_.alpha_m() * r.losses.l_m + cfg_.lambda_eff() * r.losses.l_a;
  r.losses.p_pos = use_triplet ? p_pos_sum / b : 0.0;
  r.losses.p_neg = use_triplet ? p_neg_sum / b : 0.0;
  r.losses.nce_acc = static_cast<double>(nce_first) / b;

  if (!std::isfinite(r.losses.l_total) || !std::isfinite(r.losses.l_m) ||
      !std::isfinite(r.losses.l_a)) {
    std::string where = "none (no output directory)";
    if (!dump_dir_.empty()) {
      const std::string path = dump_dir_ + "/nan_dump_step_" + std::to_string(step_) + ".txt";
      std::ofstream dump(path);
      dump << "non-finite loss\nstep " << step_ << "\nepoch " << epoch_ << "\nL_m " << r.losses.l_m
           << "\nL_a " << r.losses.l_a << "\nlr " << r.lr << "\nclips:\n";
      for (const auto& s : specs) {
        dump << "  " << s.video_id << " start=" << s.start << " length=" << s.length
             << " speed=" << s.speed << "\n";
      }
      where = path;
    }
    throw TrainError("non-finite loss at step " + std::to_string(step_) +
                     " (L_m=" + std::to_string(r.losses.l_m) +
                     ", L_a=" + std::to_string(r.losses.l_a) + "); diagnostics: " + where);
  }

  // 5. Backprop and one SGD step over encoder + heads (+ SP classifier).
  net_.backward(dm, da);
  sgd_update(r.lr);

  ++step_;
  return r;
}

void Trainer::sgd_update(double lr) {
  auto params = all_params();
  auto grads = all_grads();
  const float mu = static_cast<float>(cfg_.momentum);
  const float wd = static_cast<float>(cfg_.weight_decay);
  const float flr = static_cast<float>(lr);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    TensorF* p = params[pi].second;
    TensorF* g = grads[pi].second;
    TensorF& v = momentum_.at(params[pi].first);
    float* pd = p->data();
    const float* gd = g->data();
    float* vd = v.data();
    const std::size_t n = p->numel();
    for (std::size_t i = 0; i < n; ++i) {
      vd[i] = mu * vd[i] + (gd[i] + wd * pd[i]);
      pd[i] -= flr * vd[i];
    }
  }
}

ckpt::Checkpoint Trainer::make_checkpoint() {
  ckpt::Checkpoint c = ckpt::Checkpoint::from_model(net_, config_hash_, epoch_, step_);
  for (auto& [name, buf] : momentum_) c.tensors["opt." + name] = buf;
  if (cfg_.mode == Mode::sp_avid) {
    c.tensors["sp.weight"] = sp_weight_;
    c.tensors["sp.bias"] = sp_bias_;
  }
  if (bank_) bank_->save_to(c);
  return c;
}

void Trainer::load_checkpoint(const ckpt::Checkpoint& c, bool force) {
  c.check_hash(config_hash_, force);
  c.load_into(net_);
  for (auto& [name, buf] : momentum_) {
    const auto it = c.tensors.find("opt." + name);
    if (it == c.tensors.end()) throw img::IoError("checkpoint is missing optimizer state opt." + name);
    if (it->second.shape() != buf.shape()) {
      throw img::IoError("checkpoint optimizer state opt." + name + " has wrong shape");
    }
    buf = it->second;
  }
  if (cfg_.mode == Mode::sp_avid) {
    const auto w = c.tensors.find("sp.weight");
    const auto bi = c.tensors.find("sp.bias");
    if (w == c.tensors.end() || bi == c.tensors.end()) {
      throw img::IoError("checkpoint is missing the speed-prediction classifier");
    }
    sp_weight_ = w->second;
    sp_bias_ = bi->second;
  }
  if (bank_) *bank_ = NegativeBank::restore_from(c);
  epoch_ = c.epoch;
  step_ = c.step;
}

bool Trainer::resume_from(const std::string& out_dir, bool force) {
  int best_epoch = -1;
  std::string best_path;
  if (!fs::is_directory(out_dir)) return false;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("ckpt_epoch_", 0) != 0) continue;
    const int e = std::atoi(name.substr(11).c_str());
    if (e > best_epoch) {
      best_epoch = e;
      best_path = entry.path().string();
    }
  }
  if (best_epoch < 0) return false;
  load_checkpoint(ckpt::Checkpoint::load(best_path), force);
  return true;
}

std::string Trainer::metrics_line(const StepReport& r) const {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%lld,\"epoch\":%d,\"lr\":%.10g,\"L_m\":%.10g,\"L_a\":%.10g,"
                "\"L_total\":%.10g,\"nce_acc\":%.6g}",
                static_cast<long long>(r.step), r.epoch, r.lr, r.losses.l_m, r.losses.l_a,
                r.losses.l_total, r.losses.nce_acc);
  return buf;
}

void Trainer::run(const std::string& out_dir, const std::function<void(const StepReport&)>& on_step) {
  fs::create_directories(out_dir);
  dump_dir_ = out_dir;
  std::ofstream metrics(out_dir + "/metrics.jsonl", std::ios::app);
  if (!metrics) throw img::IoError("cannot open " + out_dir + "/metrics.jsonl for append");

  const std::size_t n = corpus_.size();
  while (epoch_ < cfg_.epochs) {
    Rng rng = derive_rng(cfg_.seed, "train_epoch", static_cast<std::uint64_t>(epoch_));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t ofs = 0; ofs < n; ofs += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t take = std::min<std::size_t>(cfg_.batch_size, n - ofs);
      std::vector<std::size_t> batch(order.begin() + ofs, order.begin() + ofs + take);
      StepReport rep = train_step(batch, rng);
      metrics << metrics_line(rep) << "\n";
      metrics.flush();
      if (on_step) on_step(rep);
    }
    ++epoch_;
    if (epoch_ % cfg_.checkpoint_every == 0 || epoch_ == cfg_.epochs) {
      make_checkpoint().save(out_dir + "/" + ckpt::checkpoint_name(epoch_));
    }
  }
}

std::string run_pretraining(const data::Corpus& corpus, const model::EncoderConfig& enc_cfg,
                            const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug_cfg,
                            const TrainConfig& cfg, std::uint64_t config_hash,
                            const std::string& out_dir, bool resume, bool force,
                            const std::function<void(const StepReport&)>& on_step) {
  Trainer trainer(corpus, enc_cfg, clip_cfg, aug_cfg, cfg, config_hash);
  if (resume && trainer.resume_from(out_dir, force)) {
    // picked up from the newest checkpoint
  } else {
    trainer.init();
  }
  trainer.run(out_dir, on_step);
  return out_dir + "/" + ckpt::checkpoint_name(trainer.epoch());
}

}  // namespace rsplab::train
