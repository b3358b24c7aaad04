#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rsplab/bank.hpp"
#include "rsplab/checkpoint.hpp"
#include "rsplab/config.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/losses.hpp"
#include "rsplab/model.hpp"

namespace rsplab::train {

// Raised on non-finite losses (after the diagnostic dump is written).
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ablation rows: which losses train, and how the A-VID pair is sampled.
//   rsp_avid  : Eq.(2) + Eq.(3), speed augmentation on (the full method)
//   rsp_only  : Eq.(3) computed but excluded from the gradient
//   avid_only : Eq.(2) computed but excluded from the gradient
//   sp_avid   : per-clip speed classification replaces Eq.(2)
//   rsp_vid   : Eq.(2) + Eq.(3) with speed augmentation off in A-VID sampling
enum class Mode { rsp_avid, rsp_only, avid_only, sp_avid, rsp_vid };
enum class NegativeSource { bank, resample };

Mode mode_from_string(const std::string& s);  // ConfigError on unknown names
std::string to_string(Mode m);
NegativeSource negative_source_from_string(const std::string& s);
std::string to_string(NegativeSource s);

struct TrainConfig {
  int batch_size = 64;
  int epochs = 200;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double gamma = 0.15;  // triplet margin
  double tau = 0.07;    // InfoNCE temperature
  double lambda = 1.0;  // joint-objective weight on L_a
  int bank_size = 16384;
  std::vector<int> speed_set = {1, 2};
  Mode mode = Mode::rsp_avid;
  NegativeSource negative_source = NegativeSource::bank;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;       // epochs between checkpoints
  bool symmetric_triplet = false;  // average the anchor-on-m_j hinge too
  // Encode A-VID keys (a_j, the enqueued vectors) with an EMA copy of the
  // network instead of the live one. Off by default; at small scale the
  // live-live pairing collapses: every query chases a moving partner while
  // the constant negatives push back only diffusely, so the whole embedding
  // cloud contracts to a point. EMA keys anchor each video near its previous
  // position, which opposes the contraction directly.
  bool momentum_encoder = false;
  double key_momentum = 0.9;  // EMA factor for the key network

  // Reads the [train] section; seed falls back to default_seed when absent.
  static TrainConfig from_config(const config::RawConfig& cfg, std::uint64_t default_seed);
  void validate() const;

  // Mode-effective loss coefficients: L_total = alpha_m*L_m + lambda_eff*L_a.
  double alpha_m() const { return mode == Mode::avid_only ? 0.0 : 1.0; }
  double lambda_eff() const { return mode == Mode::rsp_only ? 0.0 : lambda; }
};

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); monotone non-increasing.
double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr);

struct StepReport {
  std::int64_t step = 0;  // global 0-based step index
  int epoch = 0;
  double lr = 0.0;
  loss::LossReport losses;
  std::vector<std::size_t> batch_videos;     // corpus indices this step
  std::vector<std::int64_t> negative_tags;   // video tag per candidate negative
  std::vector<std::int64_t> negative_steps;  // enqueue step per candidate negative
  std::vector<std::size_t> negatives_used;   // negatives consumed per batch video
};

// Algorithm-1 training loop: per video draw an RSP triplet (c_i, c_j, c_k),
// reuse (c_i, c_j) as the A-VID positive pair, encode, enqueue the batch's
// a_j into the bank, and apply Eq.(1) with one SGD step on encoder and both
// heads jointly. Each positive consumes the whole bank as negatives except
// same-step entries from its own video, so the rest of the current batch
// doubles as fresh in-batch negatives.
class Trainer {
 public:
  Trainer(const data::Corpus& corpus, const model::EncoderConfig& enc_cfg,
          const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug_cfg,
          const TrainConfig& cfg, std::uint64_t config_hash);

  // Fresh start: parameter init from cfg.seed, zero momentum, bank warm-fill.
  void init();
  // Loads the newest ckpt_epoch_* under out_dir; false when none exists.
  bool resume_from(const std::string& out_dir, bool force = false);

  StepReport train_step(const std::vector<std::size_t>& batch, Rng& rng);

  // Runs the remaining epochs: per-step metrics appended to
  // <out_dir>/metrics.jsonl, checkpoints every checkpoint_every epochs and at
  // the end as <out_dir>/ckpt_epoch_%04d. on_step (optional) observes every
  // step after it is logged.
  void run(const std::string& out_dir, const std::function<void(const StepReport&)>& on_step = {});

  std::int64_t steps_per_epoch() const;
  std::int64_t total_steps() const;
  int epoch() const { return epoch_; }
  std::int64_t step() const { return step_; }

  model::RspNetF& net() { return net_; }
  model::RspNetF* key_net() { return net_k_ ? net_k_.get() : nullptr; }
  NegativeBank* bank() { return bank_ ? bank_.get() : nullptr; }
  const TrainConfig& config() const { return cfg_; }

  ckpt::Checkpoint make_checkpoint();
  void load_checkpoint(const ckpt::Checkpoint& c, bool force = false);

  // Encodes clips without gradient tracking and returns appearance rows.
  TensorF encode_appearance(const std::vector<data::Clip>& clips, int chunk = 32);

 private:
  void warm_fill_bank();
  void sgd_update(double lr);
  void ema_update_key();
  std::string metrics_line(const StepReport& r) const;

  const data::Corpus& corpus_;
  data::ClipConfig clip_cfg_;
  data::AugmentConfig aug_cfg_;
  TrainConfig cfg_;
  std::uint64_t config_hash_;
  model::RspNetF net_;
  std::unique_ptr<model::RspNetF> net_k_;  // EMA key network (optional)
  std::unique_ptr<NegativeBank> bank_;
  // SP ablation classifier (speed classes over m); trained with the model.
  TensorF sp_weight_, sp_bias_, sp_grad_weight_, sp_grad_bias_;
  std::map<std::string, TensorF> momentum_;  // per-parameter SGD velocity
  int epoch_ = 0;
  std::int64_t step_ = 0;
  std::string dump_dir_;  // where NaN diagnostics go (set by run)

  std::vector<std::pair<std::string, TensorF*>> all_params();
  std::vector<std::pair<std::string, TensorF*>> all_grads();
};

// Convenience wrapper used by the CLI and tests: fresh run or resume, then
// train to cfg.epochs. Returns the final checkpoint path.
std::string run_pretraining(const data::Corpus& corpus, const model::EncoderConfig& enc_cfg,
                            const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug_cfg,
                            const TrainConfig& cfg, std::uint64_t config_hash,
                            const std::string& out_dir, bool resume, bool force = false,
                            const std::function<void(const StepReport&)>& on_step = {});

}  // namespace rsplab::train
