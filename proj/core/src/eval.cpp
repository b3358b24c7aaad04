#include "rsplab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rsplab/image.hpp"
#include "rsplab/losses.hpp"
#include "rsplab/parallel.hpp"

namespace rsplab::eval {

using config::ConfigError;

EvalConfig EvalConfig::from_config(const config::RawConfig& cfg, std::uint64_t default_seed) {
  EvalConfig c;
  c.num_clips = static_cast<int>(cfg.get_int("eval", "num_clips", c.num_clips));
  c.pool_max_all = cfg.get_bool("eval", "pool_max_all", c.pool_max_all);
  c.k_list = cfg.get_int_list("eval", "k_list", c.k_list);
  c.test_fraction = cfg.get_real("eval", "test_fraction", c.test_fraction);
  c.probe_epochs = static_cast<int>(cfg.get_int("eval", "probe_epochs", c.probe_epochs));
  c.probe_lr = cfg.get_real("eval", "probe_lr", c.probe_lr);
  c.probe_momentum = cfg.get_real("eval", "probe_momentum", c.probe_momentum);
  c.probe_batch = static_cast<int>(cfg.get_int("eval", "probe_batch", c.probe_batch));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("eval", "seed", static_cast<std::int64_t>(default_seed)));
  c.validate();
  return c;
}

void EvalConfig::validate() const {
  if (num_clips < 1) throw ConfigError("[eval] num_clips must be >= 1");
  if (k_list.empty()) throw ConfigError("[eval] k_list must not be empty");
  for (int k : k_list) {
    if (k < 1) throw ConfigError("[eval] k values must be >= 1");
  }
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ConfigError("[eval] test_fraction must lie in (0, 1)");
  }
  if (probe_epochs < 1) throw ConfigError("[eval] probe_epochs must be >= 1");
  if (probe_lr <= 0.0) throw ConfigError("[eval] probe_lr must be positive");
  if (probe_momentum < 0.0 || probe_momentum >= 1.0) {
    throw ConfigError("[eval] probe_momentum must be in [0, 1)");
  }
  if (probe_batch < 1) throw ConfigError("[eval] probe_batch must be >= 1");
}

Split split_corpus(const data::Corpus& corpus, double test_fraction, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 2) throw ConfigError("split_corpus: need at least two videos");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(seed, "eval_split");
  rng.shuffle(order);
  std::size_t test_count = static_cast<std::size_t>(
      std::llround(std::ceil(test_fraction * static_cast<double>(n))));
  test_count = std::clamp<std::size_t>(test_count, 1, n - 1);
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_count));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_count), order.end());
  return s;
}

std::vector<int> even_clip_starts(int num_frames, int span, int num_clips) {
  const int hi = std::max(0, num_frames - span);
  std::vector<int> starts(static_cast<std::size_t>(num_clips));
  if (num_clips == 1) {
    starts[0] = hi / 2;
    return starts;
  }
  for (int i = 0; i < num_clips; ++i) {
    starts[static_cast<std::size_t>(i)] = static_cast<int>(
        std::llround(static_cast<double>(i) * hi / static_cast<double>(num_clips - 1)));
  }
  return starts;
}

namespace {

// Speed-1 clip decoded at the video's native size; frame indices wrap for
// videos shorter than the span (logged once by the caller).
data::Clip decode_eval_clip(const data::Corpus& corpus, std::size_t video_idx, int start,
                            int length) {
  const data::VideoRecord& rec = corpus.record(video_idx);
  if (rec.num_frames >= start + length) {
    return corpus.decode_clip({rec.id, start, length, 1});
  }
  const img::Image8& first = corpus.frame(video_idx, 0);
  data::Clip clip;
  clip.spec = {rec.id, start, length, 1};
  clip.pixels = TensorF({static_cast<std::size_t>(length), static_cast<std::size_t>(first.height),
                         static_cast<std::size_t>(first.width), 3});
  std::size_t o = 0;
  for (int t = 0; t < length; ++t) {
    const img::Image8& frame = corpus.frame(video_idx, (start + t) % rec.num_frames);
    for (unsigned char byte : frame.pixels) clip.pixels[o++] = static_cast<float>(byte) / 255.0f;
  }
  return clip;
}

// The num_clips evaluation clips of one video, resized to the model input.
std::vector<data::Clip> eval_clips(const data::Corpus& corpus, std::size_t video_idx,
                                   const data::ClipConfig& clip_cfg, int num_clips) {
  const data::VideoRecord& rec = corpus.record(video_idx);
  if (rec.num_frames < clip_cfg.length) {
    std::fprintf(stderr, "note: video %s has %d frames, shorter than the %d-frame clip; wrapping\n",
                 rec.id.c_str(), rec.num_frames, clip_cfg.length);
  }
  const std::vector<int> starts = even_clip_starts(rec.num_frames, clip_cfg.length, num_clips);
  std::vector<data::Clip> clips;
  clips.reserve(starts.size());
  for (int start : starts) {
    data::Clip raw = decode_eval_clip(corpus, video_idx, start, clip_cfg.length);
    clips.push_back(data::resize_clip(raw, clip_cfg.height, clip_cfg.width));
  }
  return clips;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / (std::max(std::sqrt(na), 1e-12) * std::max(std::sqrt(nb), 1e-12));
}

}  // namespace

VideoFeature extract_video_feature(const data::Corpus& corpus, std::size_t video_idx,
                                   model::RspNetF& net, const data::ClipConfig& clip_cfg,
                                   int num_clips, bool pool_max_all) {
  const data::VideoRecord& rec = corpus.record(video_idx);
  std::vector<data::Clip> clips = eval_clips(corpus, video_idx, clip_cfg, num_clips);
  auto x = model::clips_to_batch<float>(clips);
  model::ModelOut<float> out = net.forward(x, false);

  const std::size_t c_dim = out.feature.dim(1);
  const std::size_t t_dim = out.feature.dim(2);
  const std::size_t spatial = out.feature.dim(3) * out.feature.dim(4);
  VideoFeature f;
  f.video_id = rec.id;
  f.label = rec.label;
  f.vec.assign(c_dim, 0.0f);
  std::vector<double> acc(c_dim, 0.0);
  for (std::size_t n = 0; n < clips.size(); ++n) {
    for (std::size_t c = 0; c < c_dim; ++c) {
      const float* plane = out.feature.data() + ((n * c_dim + c) * t_dim) * spatial;
      double pooled;
      if (pool_max_all) {
        double best = -1e300;
        for (std::size_t e = 0; e < t_dim * spatial; ++e) best = std::max(best, static_cast<double>(plane[e]));
        pooled = best;
      } else {
        double t_sum = 0.0;
        for (std::size_t t = 0; t < t_dim; ++t) {
          double best = -1e300;
          for (std::size_t s = 0; s < spatial; ++s) {
            best = std::max(best, static_cast<double>(plane[t * spatial + s]));
          }
          t_sum += best;
        }
        pooled = t_sum / static_cast<double>(t_dim);
      }
      acc[c] += pooled;
    }
  }
  for (std::size_t c = 0; c < c_dim; ++c) {
    f.vec[c] = static_cast<float>(acc[c] / static_cast<double>(clips.size()));
  }
  return f;
}

std::vector<VideoFeature> extract_features(const data::Corpus& corpus,
                                           const std::vector<std::size_t>& videos,
                                           model::RspNetF& net, const data::ClipConfig& clip_cfg,
                                           const EvalConfig& cfg) {
  std::vector<VideoFeature> out(videos.size());
  parallel_for(videos.size(), env_worker_count(), [&](std::size_t i) {
    out[i] = extract_video_feature(corpus, videos[i], net, clip_cfg, cfg.num_clips,
                                   cfg.pool_max_all);
  });
  return out;
}

RetrievalResult retrieve_topk(const std::vector<VideoFeature>& queries,
                              const std::vector<VideoFeature>& gallery,
                              const std::vector<int>& k_list) {
  if (gallery.empty()) throw ConfigError("retrieve_topk: gallery is empty");
  if (queries.empty()) throw ConfigError("retrieve_topk: no queries");
  if (k_list.empty()) throw ConfigError("retrieve_topk: k_list is empty");
  const std::size_t g = gallery.size();

  RetrievalResult r;
  r.rankings.reserve(queries.size());
  std::map<int, int> correct;
  for (int k : k_list) correct[k] = 0;

  for (const VideoFeature& q : queries) {
    std::vector<double> sim(g);
    for (std::size_t i = 0; i < g; ++i) sim[i] = cosine(q.vec, gallery[i].vec);
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    std::vector<std::string> ids(g);
    for (std::size_t i = 0; i < g; ++i) ids[i] = gallery[order[i]].video_id;
    r.rankings.push_back(std::move(ids));
    for (int k : k_list) {
      const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), g);
      bool hit = false;
      for (std::size_t i = 0; i < kk && !hit; ++i) hit = gallery[order[i]].label == q.label;
      if (hit) ++correct[k];
    }
  }
  for (int k : k_list) {
    r.accuracy[k] = static_cast<double>(correct[k]) / static_cast<double>(queries.size());
  }
  return r;
}

void write_retrieval_json(const std::string& path, const RetrievalResult& result,
                          const std::vector<VideoFeature>& queries) {
  nlohmann::json j;
  for (const auto& [k, acc] : result.accuracy) j["accuracy"][std::to_string(k)] = acc;
  j["queries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    nlohmann::json q;
    q["id"] = queries[i].video_id;
    q["label"] = queries[i].label;
    q["ranking"] = result.rankings.at(i);
    j["queries"].push_back(std::move(q));
  }
  std::ofstream out(path);
  if (!out) throw img::IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

ProbeResult train_action_probe(model::RspNetF& net, const data::Corpus& corpus, const Split& split,
                               const data::ClipConfig& clip_cfg, const data::AugmentConfig& aug,
                               const EvalConfig& cfg, bool freeze_encoder) {
  cfg.validate();
  if (split.train.empty() || split.test.empty()) {
    throw ConfigError("train_action_probe: split must have train and test videos");
  }
  const int num_classes = corpus.num_classes();
  if (num_classes < 1) throw ConfigError("train_action_probe: corpus has no labels");
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    if (corpus.record(v).label < 0) {
      throw ConfigError("train_action_probe: video " + corpus.record(v).id + " is unlabeled");
    }
  }
  const std::size_t c_dim = static_cast<std::size_t>(net.config().feature_dim());

  TensorF W({static_cast<std::size_t>(num_classes), c_dim});
  TensorF b({static_cast<std::size_t>(num_classes)});
  TensorF dW(W.shape()), db(b.shape());
  TensorF mW(W.shape()), mb(b.shape());
  Rng init_rng = derive_rng(cfg.seed, "probe_init");
  for (auto& v : W.vec()) v = static_cast<float>(init_rng.normal() * 0.01);

  std::map<std::string, TensorF> net_momentum;
  if (!freeze_encoder) {
    for (auto [name, p] : net.named_params()) net_momentum[name] = TensorF(p->shape());
  }
  const float mu = static_cast<float>(cfg.probe_momentum);
  const float lr = static_cast<float>(cfg.probe_lr);
  auto sgd = [&](TensorF& p, const TensorF& g, TensorF& m) {
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = mu * m[i] + g[i];
      p[i] -= lr * m[i];
    }
  };

  const std::size_t embed = static_cast<std::size_t>(net.config().embed_dim);
  for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    Rng rng = derive_rng(cfg.seed, "probe_epoch", static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order = split.train;
    rng.shuffle(order);
    for (std::size_t ofs = 0; ofs < order.size(); ofs += static_cast<std::size_t>(cfg.probe_batch)) {
      const std::size_t take = std::min<std::size_t>(cfg.probe_batch, order.size() - ofs);
      std::vector<data::ClipSpec> specs(take);
      std::vector<std::uint64_t> seeds(take);
      std::vector<int> labels(take);
      for (std::size_t i = 0; i < take; ++i) {
        const data::VideoRecord& rec = corpus.record(order[ofs + i]);
        specs[i] = data::sample_clip_spec(rec, clip_cfg.length, 1, rng);
        seeds[i] = rng.next_u64();
        labels[i] = rec.label;
      }
      std::vector<data::Clip> clips(take);
      parallel_for(take, env_worker_count(), [&](std::size_t i) {
        clips[i] = data::realize_clip(corpus, specs[i], clip_cfg, aug, seeds[i]);
      });
      auto x = model::clips_to_batch<float>(clips);
      if (!freeze_encoder) net.zero_grad();
      model::ModelOut<float> out = net.forward(x, !freeze_encoder);

      dW.fill(0.0f);
      db.fill(0.0f);
      TensorF d_pooled({take, c_dim});
      const float scale = 1.0f / static_cast<float>(take);
      for (std::size_t i = 0; i < take; ++i) {
        loss::speed_prediction_loss_grad<float>(
            std::span<const float>(out.pooled.data() + i * c_dim, c_dim),
            static_cast<std::size_t>(labels[i]), W,
            std::span<const float>(b.data(), b.numel()), scale,
            std::span<float>(d_pooled.data() + i * c_dim, c_dim), dW,
            std::span<float>(db.data(), db.numel()), nullptr);
      }
      if (!freeze_encoder) {
        TensorF dm({take, embed}), da({take, embed});
        net.backward(dm, da, &d_pooled);
        auto params = net.named_params();
        auto grads = net.named_grads();
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
          sgd(*params[pi].second, *grads[pi].second, net_momentum.at(params[pi].first));
        }
      }
      sgd(W, dW, mW);
      sgd(b, db, mb);
    }
  }

  // Accuracy: mean classifier logits over the evenly spaced eval clips.
  auto accuracy_over = [&](const std::vector<std::size_t>& videos) {
    int correct_count = 0;
    std::vector<int> predictions(videos.size(), -1);
    parallel_for(videos.size(), env_worker_count(), [&](std::size_t qi) {
      std::vector<data::Clip> clips = eval_clips(corpus, videos[qi], clip_cfg, cfg.num_clips);
      auto x = model::clips_to_batch<float>(clips);
      model::ModelOut<float> out = net.forward(x, false);
      std::vector<double> logits(static_cast<std::size_t>(num_classes), 0.0);
      for (std::size_t n = 0; n < clips.size(); ++n) {
        for (int cls = 0; cls < num_classes; ++cls) {
          double z = b[static_cast<std::size_t>(cls)];
          const float* w_row = W.data() + static_cast<std::size_t>(cls) * c_dim;
          const float* feat = out.pooled.data() + n * c_dim;
          for (std::size_t c = 0; c < c_dim; ++c) z += static_cast<double>(w_row[c]) * feat[c];
          logits[static_cast<std::size_t>(cls)] += z;
        }
      }
      int best = 0;
      for (int cls = 1; cls < num_classes; ++cls) {
        if (logits[static_cast<std::size_t>(cls)] > logits[static_cast<std::size_t>(best)]) best = cls;
      }
      predictions[qi] = best;
    });
    for (std::size_t qi = 0; qi < videos.size(); ++qi) {
      if (predictions[qi] == corpus.record(videos[qi]).label) ++correct_count;
    }
    return static_cast<double>(correct_count) / static_cast<double>(videos.size());
  };

  ProbeResult r;
  r.num_classes = num_classes;
  r.train_acc = accuracy_over(split.train);
  r.test_acc = accuracy_over(split.test);
  return r;
}

}  // namespace rsplab::eval
