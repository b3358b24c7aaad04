// Acceptance gate: exercises the eight release criteria end to end and
// prints one PASS/FAIL line per criterion on stdout (progress goes to
// stderr). Exit code 0 iff every criterion passes. The heavy phase runs
// nine 30-epoch pretraining runs (3 seeds x 3 ablation modes) on a
// 200-video SpeedShapes corpus, so expect minutes of CPU time.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rsplab/checkpoint.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/eval.hpp"
#include "rsplab/losses.hpp"
#include "rsplab/model.hpp"
#include "rsplab/parallel.hpp"
#include "rsplab/rng.hpp"
#include "rsplab/speedshapes.hpp"
#include "rsplab/tensor.hpp"
#include "rsplab/trainer.hpp"
#include "rsplab/visualization.hpp"

namespace fs = std::filesystem;
using rsplab::Rng;
using rsplab::TensorD;
using rsplab::TensorF;

namespace {

constexpr const char* kTmp = "acceptance_tmp";
constexpr std::uint64_t kHash = 0xACCE97A2CE000001ull;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- shared desk-scale configuration -------------------------------------

rsplab::data::SpeedShapesConfig corpus_cfg() {
  rsplab::data::SpeedShapesConfig cfg;
  cfg.num_videos = 200;
  cfg.num_appearance_classes = 10;
  cfg.frames_per_video = 60;
  cfg.frame_size = 64;
  cfg.seed = 7;
  return cfg;
}

rsplab::data::ClipConfig clip_cfg() { return rsplab::data::ClipConfig{8, 32, 32}; }

rsplab::model::EncoderConfig encoder_cfg() {
  rsplab::model::EncoderConfig cfg;
  cfg.widths = {16, 32, 64};
  cfg.kernels = {3, 3, 3};
  cfg.embed_dim = 128;
  cfg.group_norm_groups = 8;
  return cfg;
}

rsplab::train::TrainConfig train_cfg(rsplab::train::Mode mode, std::uint64_t seed) {
  rsplab::train::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 30;
  cfg.base_lr = 0.05;
  cfg.bank_size = 1024;  // K pinned by criterion 5
  cfg.speed_set = {1, 2};
  cfg.checkpoint_every = 10;
  cfg.mode = mode;
  cfg.seed = seed;
  return cfg;
}

rsplab::eval::EvalConfig eval_cfg() {
  rsplab::eval::EvalConfig cfg;
  cfg.num_clips = 3;
  cfg.k_list = {1, 5, 10, 20, 50};
  cfg.test_fraction = 0.25;
  cfg.probe_epochs = 12;
  cfg.probe_lr = 0.05;
  cfg.probe_batch = 16;
  cfg.seed = 42;
  return cfg;
}

const rsplab::data::Corpus& corpus() {
  static rsplab::data::Corpus c = [] {
    auto t0 = std::chrono::steady_clock::now();
    auto built = rsplab::data::generate_speedshapes_in_memory(corpus_cfg(), clip_cfg().length, 2,
                                                              rsplab::env_worker_count());
    std::fprintf(stderr, "[acceptance] corpus ready: %zu videos (%.1fs)\n", built.size(),
                 elapsed_s(t0));
    return built;
  }();
  return c;
}

// --- small numeric helpers ------------------------------------------------

std::vector<double> unit_vec_d(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x *= inv;
  return v;
}

struct FdAccum {
  double num = 0.0;  // sum of squared (analytic - fd)
  double den = 0.0;  // sum of squared fd
};

template <typename F>
void fd_block(std::vector<double>& x, std::span<const double> g, const F& f, double h,
              FdAccum& acc) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = f();
    x[k] = keep - h;
    const double dn = f();
    x[k] = keep;
    const double fd = (up - dn) / (2.0 * h);
    const double d = g[k] - fd;
    acc.num += d * d;
    acc.den += fd * fd;
  }
}

double rel_of(const FdAccum& acc) {
  if (acc.num == 0.0) return 0.0;
  return std::sqrt(acc.num) / std::max(std::sqrt(acc.den), 1e-12);
}

// Tie-corrected Spearman: Pearson correlation of average ranks.
std::vector<double> avg_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = rank;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = avg_ranks(x), ry = avg_ranks(y);
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// --- criterion 1: loss closed forms --------------------------------------

Verdict criterion1() {
  double max_err = 0.0;
  double at_paper_k = 0.0;
  for (std::size_t k : {std::size_t{3}, std::size_t{1024}, std::size_t{16384}}) {
    std::vector<float> a_i(128, 0.0f), a_j(128, 0.0f);
    a_i[0] = 1.0f;
    a_j[1] = 1.0f;
    TensorF negatives({k, 128});
    for (std::size_t r = 0; r < k; ++r) negatives[r * 128 + 2] = 1.0f;  // orthogonal to a_i
    const float l = rsplab::loss::infonce_loss<float>(a_i, a_j, negatives, 0.07f);
    const double expect = std::log(static_cast<double>(k) + 1.0);
    max_err = std::max(max_err, std::abs(static_cast<double>(l) - expect));
    if (k == 16384) at_paper_k = l;
  }
  bool triplet_exact = true;
  Rng rng(13);
  for (float gamma : {0.15f, 0.4f, 0.75f}) {
    const std::vector<double> ad = unit_vec_d(128, rng);
    std::vector<float> a(ad.begin(), ad.end());
    const float l = rsplab::loss::triplet_loss<float>(a, a, a, gamma);
    triplet_exact = triplet_exact && (l == gamma);
  }
  const bool pass = max_err <= 1e-5 && triplet_exact;
  return {pass, fmt("max|L-ln(K+1)|=%.2e over K={3,1024,16384} (K=16384: %.5f); identical "
                    "embeddings -> triplet==gamma %s",
                    max_err, at_paper_k, triplet_exact ? "exactly" : "VIOLATED")};
}

// --- criterion 2: analytic gradients vs central finite differences -------

Verdict criterion2() {
  const double h = 1e-6;
  Rng rng(991);
  double max_rel_triplet = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<double> a, p, n;
    double gap = 0.0;
    do {  // stay away from the hinge kink where the FD stencil straddles it
      a = unit_vec_d(128, rng);
      p = unit_vec_d(128, rng);
      n = unit_vec_d(128, rng);
      const double pp = rsplab::loss::similarity<double>(a, p);
      const double pn = rsplab::loss::similarity<double>(a, n);
      gap = 0.15 - (pp - pn);
    } while (std::abs(gap) < 1e-3);
    std::vector<double> da(128, 0.0), dp(128, 0.0), dn(128, 0.0);
    rsplab::loss::triplet_loss_grad<double>(a, p, n, 0.15, 1.0, da, dp, dn);
    const auto f = [&] { return rsplab::loss::triplet_loss<double>(a, p, n, 0.15); };
    FdAccum acc;
    fd_block(a, da, f, h, acc);
    fd_block(p, dp, f, h, acc);
    fd_block(n, dn, f, h, acc);
    max_rel_triplet = std::max(max_rel_triplet, rel_of(acc));
  }

  double max_rel_nce = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<double> a_i = unit_vec_d(128, rng);
    std::vector<double> a_j = unit_vec_d(128, rng);
    const std::size_t k = 16;
    TensorD negatives({k, 128});
    for (std::size_t r = 0; r < k; ++r) {
      const std::vector<double> row = unit_vec_d(128, rng);
      std::copy(row.begin(), row.end(), negatives.data() + r * 128);
    }
    std::vector<double> d_i(128, 0.0), d_j(128, 0.0);
    TensorD d_neg({k, 128});
    rsplab::loss::infonce_loss_grad<double>(a_i, a_j, negatives, 0.07, 1.0, d_i, d_j, &d_neg);
    const auto f = [&] { return rsplab::loss::infonce_loss<double>(a_i, a_j, negatives, 0.07); };
    FdAccum acc;
    fd_block(a_i, d_i, f, h, acc);
    fd_block(a_j, d_j, f, h, acc);
    fd_block(negatives.vec(), std::span<const double>(d_neg.vec()), f, h, acc);
    max_rel_nce = std::max(max_rel_nce, rel_of(acc));
  }

  const bool pass = max_rel_triplet <= 1e-4 && max_rel_nce <= 1e-4;
  return {pass, fmt("100 random 128-D instances each: max rel err Eq.2=%.2e Eq.3=%.2e (tol 1e-4)",
                    max_rel_triplet, max_rel_nce)};
}

// --- criterion 3: CAM pooling identity through the real encoder ----------

Verdict criterion3() {
  const auto& corp = corpus();
  rsplab::model::RspNetF net(encoder_cfg());
  net.init_params(77);
  const auto ccfg = clip_cfg();
  const auto aug = rsplab::data::AugmentConfig::identity();
  Rng rng(303);
  double max_dev = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    std::vector<rsplab::data::Clip> clips;
    for (int side = 0; side < 2; ++side) {
      const auto vi = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(corp.size()) - 1));
      const auto& rec = corp.record(vi);
      const int speed = rng.bernoulli(0.5) ? 2 : 1;
      const int span = speed * (ccfg.length - 1) + 1;
      const int start =
          static_cast<int>(rng.uniform_int(0, std::max(0, rec.num_frames - span)));
      rsplab::data::ClipSpec spec{rec.id, start, ccfg.length, speed};
      clips.push_back(rsplab::data::realize_clip(corp, spec, ccfg, aug, 1));
    }
    auto out = net.forward(rsplab::model::clips_to_batch<float>(clips), false);
    const TensorF f_i = rsplab::viz::feature_slice(out.feature, 0);
    const std::size_t c = out.pooled.dim(1);
    const std::span<const float> x_j(out.pooled.data() + c, c);
    const TensorF& w = (pair % 2 == 0) ? net.head_m.weight : net.head_a.weight;
    const auto map = rsplab::viz::similarity_activation_map(f_i, x_j, w, w);
    double mean = 0.0;
    for (float v : map.m.vec()) mean += static_cast<double>(v);
    mean /= static_cast<double>(map.m.numel());
    max_dev = std::max(max_dev, std::abs(mean - map.s));
  }
  return {max_dev <= 1e-5,
          fmt("50 clip pairs through the encoder: max|mean(M_s)-s|=%.2e (tol 1e-5)", max_dev)};
}

// --- criterion 4: sampler statistics --------------------------------------

Verdict criterion4() {
  rsplab::data::VideoRecord rec;
  rec.id = "v";
  rec.num_frames = 60;
  rec.fps = 25;
  rec.label = 0;
  const std::vector<int> speeds = {1, 2};
  Rng rng(44);
  int triplet_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto t = rsplab::data::sample_rsp_triplet_spec(rec, 8, speeds, rng);
    if (t.i.speed == t.j.speed && t.i.speed != t.k.speed) ++triplet_ok;
  }
  int mismatch = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto pair = rsplab::data::sample_avid_pair_spec(rec, 8, speeds, true, 1, rng);
    if (pair.first.speed != pair.second.speed) ++mismatch;
  }
  const double freq = mismatch / 10000.0;
  int fixed_mismatch = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto pair = rsplab::data::sample_avid_pair_spec(rec, 8, speeds, false, 1, rng);
    if (pair.first.speed != pair.second.speed) ++fixed_mismatch;
  }
  const bool pass =
      triplet_ok == 10000 && std::abs(freq - 0.5) <= 0.02 && fixed_mismatch == 0;
  return {pass, fmt("s_i=s_j!=s_k %d/10000; A-VID mismatch %.4f (want 0.5+-0.02); "
                    "speed_augmentation=false mismatch %d (want 0)",
                    triplet_ok, freq, fixed_mismatch)};
}

// --- heavy phase: 3 seeds x 3 modes, shared by criteria 5-7 --------------

struct HeavyArtifacts {
  bool ok = false;
  std::string error;
  // per seed: epoch index (0-based) -> mean L_total over that epoch's steps
  std::map<std::uint64_t, std::map<int, double>> epoch_loss;           // rsp_avid runs
  std::map<std::uint64_t, std::map<int, double>> probe_by_epoch;      // rsp_avid: 10/20/30
  std::map<std::string, std::vector<double>> probe30;  // mode name -> per-seed accuracy
  std::vector<double> probe_random;                    // per-seed random-init accuracy
  std::string seed1_rsp_avid_dir;
};

std::string run_dir(std::uint64_t seed, rsplab::train::Mode mode) {
  return std::string(kTmp) + "/s" + std::to_string(seed) + "_" + rsplab::train::to_string(mode);
}

double probe_checkpoint(const std::string& dir, int epoch, const rsplab::eval::Split& split) {
  rsplab::model::RspNetF net(encoder_cfg());
  const auto c = rsplab::ckpt::Checkpoint::load(dir + "/" + rsplab::ckpt::checkpoint_name(epoch));
  c.load_into(net);
  const auto res = rsplab::eval::linear_probe(net, corpus(), split, clip_cfg(),
                                              rsplab::data::AugmentConfig::identity(), eval_cfg());
  return res.test_acc;
}

HeavyArtifacts run_heavy_phase() {
  HeavyArtifacts art;
  try {
    const auto& corp = corpus();
    const auto split = rsplab::eval::split_corpus(corp, eval_cfg().test_fraction, eval_cfg().seed);
    using rsplab::train::Mode;
    const std::vector<Mode> modes = {Mode::rsp_avid, Mode::rsp_only, Mode::avid_only};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      for (Mode mode : modes) {
        const auto cfg = train_cfg(mode, seed);
        const std::string dir = run_dir(seed, mode);
        fs::create_directories(dir);
        std::map<int, double> sums;
        std::map<int, int> counts;
        auto t0 = std::chrono::steady_clock::now();
        rsplab::train::run_pretraining(
            corp, encoder_cfg(), clip_cfg(), rsplab::data::AugmentConfig(), cfg, kHash, dir,
            /*resume=*/false, /*force=*/false, [&](const rsplab::train::StepReport& r) {
              sums[r.epoch] += r.losses.l_total;
              counts[r.epoch] += 1;
            });
        if (mode == Mode::rsp_avid) {
          for (const auto& [e, s] : sums) art.epoch_loss[seed][e] = s / counts[e];
        }
        std::fprintf(stderr, "[acceptance] pretrain seed %llu %s done (%.1fs)\n",
                     static_cast<unsigned long long>(seed),
                     rsplab::train::to_string(mode).c_str(), elapsed_s(t0));
      }
      // Probes: rsp_avid across checkpoint epochs; ablations at the end.
      auto t0 = std::chrono::steady_clock::now();
      for (int epoch : {10, 20, 30}) {
        art.probe_by_epoch[seed][epoch] =
            probe_checkpoint(run_dir(seed, Mode::rsp_avid), epoch, split);
      }
      art.probe30["rsp_avid"].push_back(art.probe_by_epoch[seed][30]);
      art.probe30["rsp_only"].push_back(probe_checkpoint(run_dir(seed, Mode::rsp_only), 30, split));
      art.probe30["avid_only"].push_back(
          probe_checkpoint(run_dir(seed, Mode::avid_only), 30, split));
      {
        rsplab::model::RspNetF net(encoder_cfg());
        net.init_params(seed);  // the exact initialization the trained run started from
        const auto res =
            rsplab::eval::linear_probe(net, corp, split, clip_cfg(),
                                       rsplab::data::AugmentConfig::identity(), eval_cfg());
        art.probe_random.push_back(res.test_acc);
      }
      std::fprintf(stderr,
                   "[acceptance] probes seed %llu done (%.1fs): rand %.3f rsp_avid %.3f/%.3f/%.3f "
                   "rsp_only %.3f avid_only %.3f\n",
                   static_cast<unsigned long long>(seed), elapsed_s(t0), art.probe_random.back(),
                   art.probe_by_epoch[seed][10], art.probe_by_epoch[seed][20],
                   art.probe_by_epoch[seed][30], art.probe30["rsp_only"].back(),
                   art.probe30["avid_only"].back());
    }
    art.seed1_rsp_avid_dir = run_dir(1, Mode::rsp_avid);
    art.ok = true;
  } catch (const std::exception& e) {
    art.error = e.what();
  }
  return art;
}

// --- criterion 5: desk-scale learning signal ------------------------------

Verdict criterion5(const HeavyArtifacts& art) {
  if (!art.ok) return {false, "heavy phase failed: " + art.error};
  const double pre = mean_of(art.probe30.at("rsp_avid"));
  const double rnd = mean_of(art.probe_random);
  const double rsp = mean_of(art.probe30.at("rsp_only"));
  const double avid = mean_of(art.probe30.at("avid_only"));
  const bool gain = pre >= rnd + 0.15;
  const bool best_row = pre >= std::max(rsp, avid) - 0.02;
  return {gain && best_row,
          fmt("3-seed mean probe acc: rsp_avid=%.3f random=%.3f (gap %.3f, want >=0.15) "
              "rsp_only=%.3f avid_only=%.3f (ours >= max-0.02: %s)",
              pre, rnd, pre - rnd, rsp, avid, best_row ? "yes" : "NO")};
}

// --- criterion 6: retrieval sanity ----------------------------------------

Verdict criterion6(const HeavyArtifacts& art) {
  if (!art.ok) return {false, "heavy phase failed: " + art.error};
  const auto& corp = corpus();
  const auto ecfg = eval_cfg();
  const auto ccfg = clip_cfg();

  // Chance level: random-init encoders, every video queried against all
  // others (leave-one-out) to keep the binomial noise well under the 0.03
  // tolerance; averaged over 5 inits.
  std::vector<std::size_t> all(corp.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  double chance_sum = 0.0;
  std::size_t chance_n = 0;
  for (std::uint64_t init = 0; init < 5; ++init) {
    rsplab::model::RspNetF net(encoder_cfg());
    net.init_params(7000 + init);
    const auto feats = rsplab::eval::extract_features(corp, all, net, ccfg, ecfg);
    for (std::size_t q = 0; q < feats.size(); ++q) {
      std::vector<rsplab::eval::VideoFeature> gallery;
      gallery.reserve(feats.size() - 1);
      for (std::size_t g = 0; g < feats.size(); ++g) {
        if (g != q) gallery.push_back(feats[g]);
      }
      const auto res = rsplab::eval::retrieve_topk({feats[q]}, gallery, {1});
      chance_sum += res.accuracy.at(1);
      ++chance_n;
    }
  }
  const double chance_acc = chance_sum / static_cast<double>(chance_n);
  const double chance = 1.0 / corpus_cfg().num_appearance_classes;

  // Pretrained encoder: standard test-queries-vs-train-gallery protocol.
  const auto split = rsplab::eval::split_corpus(corp, ecfg.test_fraction, ecfg.seed);
  rsplab::model::RspNetF net(encoder_cfg());
  const auto ckpt = rsplab::ckpt::Checkpoint::load(art.seed1_rsp_avid_dir + "/" +
                                                   rsplab::ckpt::checkpoint_name(30));
  ckpt.load_into(net);
  const auto queries = rsplab::eval::extract_features(corp, split.test, net, ccfg, ecfg);
  const auto gallery = rsplab::eval::extract_features(corp, split.train, net, ccfg, ecfg);
  const auto res = rsplab::eval::retrieve_topk(queries, gallery, ecfg.k_list);

  bool monotone = true;
  double prev = -1.0;
  std::string curve;
  for (int k : ecfg.k_list) {
    const double acc = res.accuracy.at(k);
    monotone = monotone && acc >= prev;
    prev = acc;
    curve += fmt("%s%.2f", curve.empty() ? "" : "/", acc);
  }

  const bool chance_ok = std::abs(chance_acc - chance) <= 0.03;
  const bool lift_ok = res.accuracy.at(1) >= 3.0 * chance;
  return {chance_ok && lift_ok && monotone,
          fmt("random-init top-1 %.3f (chance %.2f +-0.03, 5 inits leave-one-out); pretrained "
              "top-1 %.3f (want >=%.2f); acc@{1,5,10,20,50}=%s monotone=%s",
              chance_acc, chance, res.accuracy.at(1), 3.0 * chance, curve.c_str(),
              monotone ? "yes" : "NO")};
}

// --- criterion 7: Figure-3 trend -------------------------------------------

Verdict criterion7(const HeavyArtifacts& art) {
  if (!art.ok) return {false, "heavy phase failed: " + art.error};
  // Loss attributed to the epoch-E checkpoint: mean L_total over the steps of
  // the final epoch it covers (0-based epoch E-1), averaged across seeds.
  std::map<int, double> loss_at;
  for (int e : {10, 20, 30}) {
    double s = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) s += art.epoch_loss.at(seed).at(e - 1);
    loss_at[e] = s / 3.0;
  }
  const bool non_increasing = loss_at[10] >= loss_at[20] && loss_at[20] >= loss_at[30];

  std::vector<double> epochs, accs;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (int e : {10, 20, 30}) {
      epochs.push_back(e);
      accs.push_back(art.probe_by_epoch.at(seed).at(e));
    }
  }
  const double rho = spearman(epochs, accs);
  return {non_increasing && rho > 0.0,
          fmt("3-seed mean L_total at ckpts {10,20,30}: %.4f >= %.4f >= %.4f (%s); "
              "spearman(epoch, probe acc)=%.3f over 9 points (want >0)",
              loss_at[10], loss_at[20], loss_at[30], non_increasing ? "non-increasing" : "NO",
              rho)};
}

// --- criterion 8: determinism and persistence ------------------------------

Verdict criterion8() {
  const auto& corp = corpus();
  auto cfg = train_cfg(rsplab::train::Mode::rsp_avid, 123);
  cfg.epochs = 3;
  cfg.checkpoint_every = 3;
  const std::string dir_a = std::string(kTmp) + "/det_a";
  const std::string dir_b = std::string(kTmp) + "/det_b";
  fs::create_directories(dir_a);
  fs::create_directories(dir_b);

  std::vector<double> la, lb;
  rsplab::train::Trainer ta(corp, encoder_cfg(), clip_cfg(), rsplab::data::AugmentConfig(), cfg,
                            kHash);
  ta.init();
  ta.run(dir_a, [&](const rsplab::train::StepReport& r) { la.push_back(r.losses.l_total); });
  rsplab::train::Trainer tb(corp, encoder_cfg(), clip_cfg(), rsplab::data::AugmentConfig(), cfg,
                            kHash);
  tb.init();
  tb.run(dir_b, [&](const rsplab::train::StepReport& r) { lb.push_back(r.losses.l_total); });

  double max_delta = la.size() == lb.size() ? 0.0 : 1.0;
  if (la.size() == lb.size()) {
    for (std::size_t i = 0; i < la.size(); ++i)
      max_delta = std::max(max_delta, std::abs(la[i] - lb[i]));
  }

  // Save -> load must reproduce evaluation losses exactly.
  rsplab::model::RspNetF reloaded(encoder_cfg());
  const auto c = rsplab::ckpt::Checkpoint::load(dir_a + "/" + rsplab::ckpt::checkpoint_name(3));
  c.load_into(reloaded);

  const auto ccfg = clip_cfg();
  const auto aug = rsplab::data::AugmentConfig::identity();
  std::vector<rsplab::data::Clip> clips;
  clips.push_back(
      rsplab::data::realize_clip(corp, {corp.record(0).id, 0, ccfg.length, 1}, ccfg, aug, 1));
  clips.push_back(
      rsplab::data::realize_clip(corp, {corp.record(0).id, 9, ccfg.length, 2}, ccfg, aug, 1));
  clips.push_back(
      rsplab::data::realize_clip(corp, {corp.record(1).id, 4, ccfg.length, 1}, ccfg, aug, 1));
  const TensorF batch = rsplab::model::clips_to_batch<float>(clips);

  const auto eval_losses = [&](rsplab::model::RspNetF& net) {
    auto out = net.forward(batch, false);
    const std::size_t d = out.m.dim(1);
    const std::span<const float> m0(out.m.data(), d), m1(out.m.data() + d, d),
        m2(out.m.data() + 2 * d, d);
    const std::span<const float> a0(out.a.data(), d), a1(out.a.data() + d, d);
    TensorF negatives({1, d});
    std::copy(out.a.data() + 2 * d, out.a.data() + 3 * d, negatives.data());
    const float lm = rsplab::loss::triplet_loss<float>(m0, m1, m2, 0.15f);
    const float la_ = rsplab::loss::infonce_loss<float>(a0, a1, negatives, 0.07f);
    return std::pair<float, float>(lm, la_);
  };
  const auto live = eval_losses(ta.net());
  const auto restored = eval_losses(reloaded);
  const bool exact = live.first == restored.first && live.second == restored.second;

  const bool pass = la.size() == lb.size() && max_delta <= 1e-6 && exact;
  return {pass, fmt("two identical runs: %zu steps, max per-step |dL|=%.3g (tol 1e-6); "
                    "save->load eval losses L_m %.6f/%.6f L_a %.6f/%.6f %s",
                    la.size(), max_delta, live.first, restored.first, live.second,
                    restored.second, exact ? "exact" : "DIFFER")};
}

}  // namespace

int main() {
  fs::remove_all(kTmp);
  fs::create_directories(kTmp);

  struct Row {
    int id;
    const char* name;
    Verdict v;
  };
  std::vector<Row> rows;
  const auto guard = [&](int id, const char* name, const std::function<Verdict()>& f) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::fprintf(stderr, "[acceptance] criterion %d finished in %.1fs\n", id, elapsed_s(t0));
    rows.push_back({id, name, v});
  };

  guard(1, "loss closed forms", criterion1);
  guard(2, "gradients vs finite differences", criterion2);
  guard(3, "CAM pooling identity", criterion3);
  guard(4, "sampler statistics", criterion4);
  const HeavyArtifacts art = run_heavy_phase();
  guard(5, "desk-scale learning signal", [&] { return criterion5(art); });
  guard(6, "retrieval sanity", [&] { return criterion6(art); });
  guard(7, "loss/accuracy trend", [&] { return criterion7(art); });
  guard(8, "determinism and persistence", criterion8);

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  int passed = 0;
  for (const auto& r : rows) {
    std::printf("[%d] %-34s %s  %s\n", r.id, r.name, r.v.pass ? "PASS" : "FAIL",
                r.v.detail.c_str());
    if (r.v.pass) ++passed;
  }
  std::printf("acceptance: %d/8 criteria passed\n", passed);
  return passed == 8 ? 0 : 1;
}
