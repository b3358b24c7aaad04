// Microbenchmarks for the hot paths: corpus rendering, clip realization,
// encoder forward/backward, and the two contrastive losses. Run with
// ./benchmarks/rsplab_bench (google-benchmark flags apply, e.g.
// --benchmark_filter=InfoNce).
#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "rsplab/dataset.hpp"
#include "rsplab/losses.hpp"
#include "rsplab/model.hpp"
#include "rsplab/rng.hpp"
#include "rsplab/speedshapes.hpp"
#include "rsplab/tensor.hpp"

namespace {

using rsplab::Rng;
using rsplab::TensorF;

TensorF random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, float lo = 0.0f,
                      float hi = 1.0f) {
  TensorF t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

std::vector<float> unit_vector(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = static_cast<float>(rng.normal());
    sq += static_cast<double>(x) * x;
  }
  const float inv = static_cast<float>(1.0 / std::sqrt(sq));
  for (auto& x : v) x *= inv;
  return v;
}

TensorF unit_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  TensorF t({rows, dim});
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<float> row = unit_vector(dim, seed + r);
    std::copy(row.begin(), row.end(), t.data() + r * dim);
  }
  return t;
}

rsplab::data::SpeedShapesConfig bench_corpus_cfg() {
  rsplab::data::SpeedShapesConfig cfg;
  cfg.num_videos = 8;
  cfg.num_appearance_classes = 4;
  cfg.frames_per_video = 40;
  cfg.frame_size = 64;
  cfg.seed = 21;
  return cfg;
}

const rsplab::data::Corpus& bench_corpus() {
  static rsplab::data::Corpus corpus =
      rsplab::data::generate_speedshapes_in_memory(bench_corpus_cfg(), /*clip_length=*/16,
                                                   /*max_speed=*/2);
  return corpus;
}

}  // namespace

// --- data pipeline -----------------------------------------------------

static void BM_SpeedShapesRenderVideo(benchmark::State& state) {
  const rsplab::data::SpeedShapesConfig cfg = bench_corpus_cfg();
  int idx = 0;
  for (auto _ : state) {
    auto frames = rsplab::data::render_speedshapes_video(cfg, idx % cfg.num_videos);
    benchmark::DoNotOptimize(frames.data());
    ++idx;
  }
  state.SetItemsProcessed(state.iterations() * cfg.frames_per_video);
}
BENCHMARK(BM_SpeedShapesRenderVideo)->Unit(benchmark::kMillisecond);

static void BM_RealizeClipAugmented(benchmark::State& state) {
  const auto& corpus = bench_corpus();
  rsplab::data::ClipConfig clip_cfg{16, 64, 64};
  rsplab::data::AugmentConfig aug;  // full SimCLR-style recipe
  rsplab::data::ClipSpec spec{corpus.record(0).id, 0, 16, 1};
  std::uint64_t seed = 1;
  for (auto _ : state) {
    rsplab::data::Clip clip = rsplab::data::realize_clip(corpus, spec, clip_cfg, aug, seed++);
    benchmark::DoNotOptimize(clip.pixels.data());
  }
}
BENCHMARK(BM_RealizeClipAugmented)->Unit(benchmark::kMillisecond);

static void BM_RealizeClipPlain(benchmark::State& state) {
  const auto& corpus = bench_corpus();
  rsplab::data::ClipConfig clip_cfg{16, 64, 64};
  const rsplab::data::AugmentConfig aug = rsplab::data::AugmentConfig::identity();
  rsplab::data::ClipSpec spec{corpus.record(0).id, 0, 16, 1};
  for (auto _ : state) {
    rsplab::data::Clip clip = rsplab::data::realize_clip(corpus, spec, clip_cfg, aug, 1);
    benchmark::DoNotOptimize(clip.pixels.data());
  }
}
BENCHMARK(BM_RealizeClipPlain)->Unit(benchmark::kMillisecond);

static void BM_ClipsToBatch(benchmark::State& state) {
  const auto& corpus = bench_corpus();
  rsplab::data::ClipConfig clip_cfg{16, 64, 64};
  const rsplab::data::AugmentConfig aug = rsplab::data::AugmentConfig::identity();
  std::vector<rsplab::data::Clip> clips;
  for (int i = 0; i < 8; ++i) {
    rsplab::data::ClipSpec spec{corpus.record(static_cast<std::size_t>(i)).id, 0, 16, 1};
    clips.push_back(rsplab::data::realize_clip(corpus, spec, clip_cfg, aug, 1));
  }
  for (auto _ : state) {
    TensorF batch = rsplab::model::clips_to_batch<float>(clips);
    benchmark::DoNotOptimize(batch.data());
  }
}
BENCHMARK(BM_ClipsToBatch)->Unit(benchmark::kMillisecond);

// --- model --------------------------------------------------------------

static rsplab::model::EncoderConfig desk_encoder_cfg() {
  rsplab::model::EncoderConfig cfg;  // defaults: widths {32,64,128,256}, 128-D heads
  return cfg;
}

static void BM_EncoderForward(benchmark::State& state) {
  rsplab::model::RspNetF net(desk_encoder_cfg());
  net.init_params(3);
  const TensorF x = random_tensor({1, 3, 16, 64, 64}, 5);
  for (auto _ : state) {
    auto out = net.forward(x, /*training=*/false);
    benchmark::DoNotOptimize(out.m.data());
  }
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMillisecond);

static void BM_EncoderTrainStep(benchmark::State& state) {
  rsplab::model::EncoderConfig cfg;
  cfg.widths = {16, 32};
  cfg.kernels = {3, 3};
  cfg.embed_dim = 32;
  cfg.group_norm_groups = 4;
  rsplab::model::RspNetF net(cfg);
  net.init_params(3);
  const TensorF x = random_tensor({4, 3, 8, 32, 32}, 5);
  const TensorF dm = random_tensor({4, 32}, 7, -1.0f, 1.0f);
  const TensorF da = random_tensor({4, 32}, 9, -1.0f, 1.0f);
  for (auto _ : state) {
    net.zero_grad();
    auto out = net.forward(x, /*training=*/true);
    benchmark::DoNotOptimize(out.m.data());
    net.backward(dm, da);
    benchmark::DoNotOptimize(net.named_grads().front().second->data());
  }
}
BENCHMARK(BM_EncoderTrainStep)->Unit(benchmark::kMillisecond);

// --- losses -------------------------------------------------------------

static void BM_InfoNceGrad(benchmark::State& state) {
  const std::size_t dim = 128;
  const auto k = static_cast<std::size_t>(state.range(0));
  const std::vector<float> a_i = unit_vector(dim, 11);
  const std::vector<float> a_j = unit_vector(dim, 12);
  const TensorF negatives = unit_rows(k, dim, 100);
  std::vector<float> d_i(dim), d_j(dim);
  for (auto _ : state) {
    std::fill(d_i.begin(), d_i.end(), 0.0f);
    std::fill(d_j.begin(), d_j.end(), 0.0f);
    float loss = rsplab::loss::infonce_loss_grad<float>(a_i, a_j, negatives, 0.07f, 1.0f, d_i, d_j);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k));
}
BENCHMARK(BM_InfoNceGrad)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);

static void BM_TripletGrad(benchmark::State& state) {
  const std::size_t dim = 128;
  const std::vector<float> a = unit_vector(dim, 21);
  const std::vector<float> p = unit_vector(dim, 22);
  const std::vector<float> n = unit_vector(dim, 23);
  std::vector<float> da(dim), dp(dim), dn(dim);
  for (auto _ : state) {
    std::fill(da.begin(), da.end(), 0.0f);
    std::fill(dp.begin(), dp.end(), 0.0f);
    std::fill(dn.begin(), dn.end(), 0.0f);
    float loss =
        rsplab::loss::triplet_loss_symmetric_grad<float>(a, p, n, 0.15f, 1.0f, da, dp, dn);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TripletGrad)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
