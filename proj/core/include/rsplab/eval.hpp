#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rsplab/config.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/model.hpp"

namespace rsplab::eval {

struct EvalConfig {
  int num_clips = 10;         // clips averaged into one video feature
  bool pool_max_all = false;  // max over (T',H',W') instead of spatial max + temporal mean
  std::vector<int> k_list = {1, 5, 10, 20, 50};
  double test_fraction = 0.25;
  int probe_epochs = 30;
  double probe_lr = 0.01;
  double probe_momentum = 0.9;
  int probe_batch = 16;
  std::uint64_t seed = 0;

  static EvalConfig from_config(const config::RawConfig& cfg, std::uint64_t default_seed);
  void validate() const;
};

// Deterministic label-free split: shuffle by seed, first ceil(N*fraction)
// videos become the test set.
struct Split {
  std::vector<std::size_t> train, test;
};
Split split_corpus(const data::Corpus& corpus, double test_fraction, std::uint64_t seed);

// Evenly spaced clip starts covering [0, max(0, num_frames - span)];
// num_clips = 1 centers the single clip.
std::vector<int> even_clip_starts(int num_frames, int span, int num_clips);

struct VideoFeature {
  std::string video_id;
  int label = -1;
  std::vector<float> vec;  // [C]
};

// num_clips evenly spaced speed-1 clips; per clip the last convolutional map
// is max-pooled over H',W' and averaged over T' (or max over everything with
// pool_max_all); the clip vectors are averaged. Videos shorter than the clip
// span wrap frame indices (logged to stderr, non-fatal).
VideoFeature extract_video_feature(const data::Corpus& corpus, std::size_t video_idx,
                                   model::RspNetF& net, const data::ClipConfig& clip_cfg,
                                   int num_clips, bool pool_max_all);

// Feature table for a set of videos (parallel over videos).
std::vector<VideoFeature> extract_features(const data::Corpus& corpus,
                                           const std::vector<std::size_t>& videos,
                                           model::RspNetF& net, const data::ClipConfig& clip_cfg,
                                           const EvalConfig& cfg);

struct RetrievalResult {
  std::map<int, double> accuracy;                   // k -> correct-at-k rate
  std::vector<std::vector<std::string>> rankings;   // per query: gallery ids, best first
};

// Cosine ranking of the gallery per query; a query is correct at k when any
// of its top-k gallery hits shares the query's label.
RetrievalResult retrieve_topk(const std::vector<VideoFeature>& queries,
                              const std::vector<VideoFeature>& gallery,
                              const std::vector<int>& k_list);

void write_retrieval_json(const std::string& path, const RetrievalResult& result,
                          const std::vector<VideoFeature>& queries);

struct ProbeResult {
  double test_acc = 0.0;
  double train_acc = 0.0;
  int num_classes = 0;
};

// Linear classifier on pooled features; freeze_encoder=true trains only the
// classifier (linear probe), false fine-tunes everything at probe_lr.
// Test protocol: average the classifier logits over num_clips evenly spaced
// speed-1 clips, then argmax. The corpus must be fully labeled.
ProbeResult train_action_probe(model::RspNetF& net, const data::Corpus& corpus, const Split& split,
                               const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug,
                               const EvalConfig& cfg, bool freeze_encoder);

inline ProbeResult linear_probe(model::RspNetF& net, const data::Corpus& corpus, const Split& split,
                                const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug,
                                const EvalConfig& cfg) {
  return train_action_probe(net, corpus, split, clip_cfg, aug, cfg, true);
}

inline ProbeResult finetune_action_recognition(model::RspNetF& net, const data::Corpus& corpus,
                                               const Split& split, const data::ClipConfig& clip_cfg,
                                               const data::AugmentConfig& aug,
                                               const EvalConfig& cfg) {
  return train_action_probe(net, corpus, split, clip_cfg, aug, cfg, false);
}

}  // namespace rsplab::eval
