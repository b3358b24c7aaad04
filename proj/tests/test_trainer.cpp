#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include "rsplab/bank.hpp"
#include "rsplab/speedshapes.hpp"
#include "rsplab/trainer.hpp"

using namespace rsplab;
using train::Mode;
using train::NegativeBank;
using train::TrainConfig;
using train::Trainer;

namespace {

data::Corpus tiny_corpus(int videos = 6, int frames = 40) {
  data::SpeedShapesConfig cfg;
  cfg.num_videos = videos;
  cfg.num_appearance_classes = 3;
  cfg.frames_per_video = frames;
  cfg.frame_size = 32;
  cfg.seed = 11;
  return data::generate_speedshapes_in_memory(cfg, 4, 2);
}

model::EncoderConfig tiny_encoder() {
  model::EncoderConfig cfg;
  cfg.widths = {8, 16};
  cfg.kernels = {3};
  cfg.embed_dim = 8;
  cfg.group_norm_groups = 4;
  return cfg;
}

data::ClipConfig tiny_clip() {
  data::ClipConfig c;
  c.length = 4;
  c.height = 32;
  c.width = 32;
  return c;
}

TrainConfig tiny_train(int bank_size = 16) {
  TrainConfig c;
  c.batch_size = 2;
  c.epochs = 2;
  c.bank_size = bank_size;
  c.seed = 5;
  c.checkpoint_every = 1;
  return c;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("trainer_tmp_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("trainer: lr schedule endpoints and monotonicity") {
  CHECK(train::lr_schedule(0, 100, 0.1) == doctest::Approx(0.1));
  CHECK(train::lr_schedule(100, 100, 0.1) == doctest::Approx(0.0));
  CHECK(train::lr_schedule(50, 100, 0.1) == doctest::Approx(0.05));
  double prev = 1e9;
  for (int s = 0; s <= 200; ++s) {
    const double lr = train::lr_schedule(s, 200, 0.1);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
  CHECK_THROWS_AS(train::lr_schedule(101, 100, 0.1), config::ConfigError);
  CHECK_THROWS_AS(train::lr_schedule(-1, 100, 0.1), config::ConfigError);
}

TEST_CASE("trainer: config parsing, modes, validation") {
  auto raw = config::RawConfig::parse_string(
      "[train]\nbatch_size = 4\nepochs = 3\nmode = sp_avid\nnegative_source = resample\n"
      "speed_set = 1,2,4\nbank_size = 32\n");
  TrainConfig c = TrainConfig::from_config(raw, 99);
  CHECK(c.batch_size == 4);
  CHECK(c.epochs == 3);
  CHECK(c.mode == Mode::sp_avid);
  CHECK(c.negative_source == train::NegativeSource::resample);
  CHECK(c.speed_set == std::vector<int>{1, 2, 4});
  CHECK(c.seed == 99);
  CHECK_NOTHROW(raw.ensure_all_consumed());

  CHECK_THROWS_AS(train::mode_from_string("bogus"), config::ConfigError);
  CHECK(train::mode_from_string("rsp_avid") == Mode::rsp_avid);
  CHECK(train::to_string(Mode::rsp_vid) == "rsp_vid");

  TrainConfig bad = tiny_train();
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);
  bad = tiny_train();
  bad.speed_set = {2};
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);
  bad = tiny_train();
  bad.speed_set = {2, 2};
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);
  bad = tiny_train();
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);

  // Mode-effective coefficients.
  TrainConfig m = tiny_train();
  m.mode = Mode::rsp_only;
  CHECK(m.lambda_eff() == 0.0);
  CHECK(m.alpha_m() == 1.0);
  m.mode = Mode::avid_only;
  CHECK(m.lambda_eff() == 1.0);
  CHECK(m.alpha_m() == 0.0);
}

TEST_CASE("trainer: bank FIFO holds the last min(E,K) tags in order") {
  NegativeBank bank(4, 2);
  CHECK(bank.size() == 0);
  float v[2] = {1.0f, 0.0f};
  for (int e = 0; e < 7; ++e) {
    v[0] = static_cast<float>(e);
    bank.enqueue(v, e, e * 10);
  }
  CHECK(bank.size() == 4);
  CHECK(bank.full());
  CHECK(bank.tags() == std::vector<std::int64_t>{3, 4, 5, 6});
  CHECK(bank.steps() == std::vector<std::int64_t>{30, 40, 50, 60});
  TensorF snap = bank.snapshot();
  REQUIRE(snap.shape() == std::vector<std::size_t>{4, 2});
  for (int i = 0; i < 4; ++i) CHECK(snap[static_cast<std::size_t>(i) * 2] == static_cast<float>(i + 3));

  // Partial fill keeps insert order.
  NegativeBank small(8, 2);
  for (int e = 0; e < 3; ++e) {
    v[0] = static_cast<float>(e);
    small.enqueue(v, e, e);
  }
  CHECK(small.size() == 3);
  CHECK(small.tags() == std::vector<std::int64_t>{0, 1, 2});

  // Checkpoint round trip.
  ckpt::Checkpoint c;
  bank.save_to(c);
  NegativeBank back = NegativeBank::restore_from(c);
  CHECK(back.capacity() == 4);
  CHECK(back.size() == 4);
  CHECK(back.tags() == bank.tags());
  CHECK(back.steps() == bank.steps());
  CHECK(back.snapshot().vec() == snap.vec());
  ckpt::Checkpoint empty;
  CHECK_THROWS_AS(NegativeBank::restore_from(empty), img::IoError);
}

TEST_CASE("trainer: first step with zero heads gives L_a = ln(K+1) and L_m = gamma") {
  auto corpus = tiny_corpus();
  TrainConfig tc = tiny_train(1024);
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x1);
  tr.init();
  REQUIRE(tr.bank()->full());
  // Zero both projection heads: every embedding becomes the zero vector, so
  // all logits coincide. Each positive consumes the full 1024-entry bank
  // minus its own same-step enqueue -> 1023 negatives -> L_a = ln(1024).
  tr.net().head_m.weight.fill(0.0f);
  tr.net().head_a.weight.fill(0.0f);
  Rng rng(1);
  auto rep = tr.train_step({0, 1}, rng);
  REQUIRE(rep.negatives_used == std::vector<std::size_t>{1023, 1023});
  CHECK(std::fabs(rep.losses.l_a - std::log(1024.0)) <= 2e-5);
  CHECK(rep.losses.l_a == doctest::Approx(6.9315).epsilon(0.01));
  CHECK(rep.losses.l_m == doctest::Approx(tc.gamma));
  CHECK(rep.losses.l_total ==
        doctest::Approx(rep.losses.l_m + tc.lambda * rep.losses.l_a).epsilon(1e-9));
  CHECK(rep.lr == doctest::Approx(0.1));
}

TEST_CASE("trainer: deterministic loss sequences for identical seeds") {
  auto corpus = tiny_corpus();
  std::vector<double> totals[2];
  for (int run = 0; run < 2; ++run) {
    Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(),
               tiny_train(), 0x2);
    tr.init();
    Rng rng = derive_rng(5, "train_epoch", 0);
    for (int s = 0; s < 4; ++s) {
      auto rep = tr.train_step({static_cast<std::size_t>(s % 3), static_cast<std::size_t>((s + 1) % 3)}, rng);
      totals[run].push_back(rep.losses.l_total);
    }
  }
  REQUIRE(totals[0].size() == totals[1].size());
  for (std::size_t i = 0; i < totals[0].size(); ++i) {
    CHECK(std::fabs(totals[0][i] - totals[1][i]) <= 1e-6);
  }
}

TEST_CASE("trainer: a video never consumes its own same-step enqueue") {
  auto corpus = tiny_corpus();
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(),
             tiny_train(8), 0x3);
  tr.init();
  Rng rng(2);
  const std::vector<std::size_t> batch = {0, 1, 2};
  for (int s = 0; s < 6; ++s) {
    auto rep = tr.train_step(batch, rng);
    REQUIRE(rep.negative_steps.size() == 8);  // candidate pool = full bank
    REQUIRE(rep.negatives_used.size() == batch.size());
    for (std::size_t vi = 0; vi < batch.size(); ++vi) {
      // Exactly the positive's own same-step entry is withheld; same-step
      // entries from the other batch videos stay in as fresh negatives.
      std::size_t own = 0;
      for (std::size_t e = 0; e < rep.negative_steps.size(); ++e) {
        const bool same_step = rep.negative_steps[e] == rep.step;
        if (same_step) CHECK(rep.negative_tags[e] >= 0);
        if (same_step &&
            rep.negative_tags[e] == static_cast<std::int64_t>(batch[vi])) {
          ++own;
        }
      }
      CHECK(own == 1);
      CHECK(rep.negatives_used[vi] == rep.negative_steps.size() - own);
    }
  }
  // After 6 steps of 3 enqueues into capacity 8, the bank holds the last 8.
  auto steps = tr.bank()->steps();
  CHECK(steps == std::vector<std::int64_t>{3, 3, 4, 4, 4, 5, 5, 5});
  auto tags = tr.bank()->tags();
  CHECK(tags == std::vector<std::int64_t>{1, 2, 0, 1, 2, 0, 1, 2});
}

TEST_CASE("trainer: resample negatives exclude the positive video") {
  auto corpus = tiny_corpus();
  TrainConfig tc = tiny_train(8);
  tc.negative_source = train::NegativeSource::resample;
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x4);
  tr.init();
  CHECK(tr.bank() == nullptr);
  Rng rng(3);
  std::vector<std::size_t> batch = {2, 4};
  auto rep = tr.train_step(batch, rng);
  REQUIRE(rep.negative_tags.size() == 16);  // two videos times K=8
  for (int vi = 0; vi < 2; ++vi) {
    for (int k = 0; k < 8; ++k) {
      CHECK(rep.negative_tags[static_cast<std::size_t>(vi * 8 + k)] !=
            static_cast<std::int64_t>(batch[static_cast<std::size_t>(vi)]));
    }
  }
  CHECK(rep.losses.l_a > 0.0);
}

TEST_CASE("trainer: mode dispatch routes gradients to the right heads") {
  auto corpus = tiny_corpus();
  auto run_one = [&](Mode mode) {
    TrainConfig tc = tiny_train(8);
    tc.mode = mode;
    tc.weight_decay = 0.0;  // isolate loss gradients from decay
    Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x5);
    tr.init();
    auto wm = tr.net().head_m.weight.vec();
    auto wa = tr.net().head_a.weight.vec();
    Rng rng(4);
    auto rep = tr.train_step({0, 1}, rng);
    const bool m_moved = tr.net().head_m.weight.vec() != wm;
    const bool a_moved = tr.net().head_a.weight.vec() != wa;
    return std::tuple{m_moved, a_moved, rep};
  };

  {
    auto [m_moved, a_moved, rep] = run_one(Mode::rsp_avid);
    CHECK(m_moved);
    CHECK(a_moved);
    CHECK(rep.losses.l_total ==
          doctest::Approx(rep.losses.l_m + rep.losses.l_a).epsilon(1e-9));
  }
  {
    auto [m_moved, a_moved, rep] = run_one(Mode::rsp_only);
    CHECK(m_moved);
    CHECK(!a_moved);          // L_a excluded from the gradient
    CHECK(rep.losses.l_a > 0.0);  // but still computed
    CHECK(rep.losses.l_total == doctest::Approx(rep.losses.l_m).epsilon(1e-9));
  }
  {
    auto [m_moved, a_moved, rep] = run_one(Mode::avid_only);
    CHECK(!m_moved);
    CHECK(a_moved);
    CHECK(rep.losses.l_m >= 0.0);
    CHECK(rep.losses.l_total == doctest::Approx(rep.losses.l_a).epsilon(1e-9));
  }
  {
    auto [m_moved, a_moved, rep] = run_one(Mode::sp_avid);
    CHECK(m_moved);  // cross-entropy flows through the m embedding
    CHECK(a_moved);
    // Triplet never evaluated: the report carries no similarity pair.
    CHECK(rep.losses.p_pos == 0.0);
    CHECK(rep.losses.p_neg == 0.0);
  }
  {
    auto [m_moved, a_moved, rep] = run_one(Mode::rsp_vid);
    CHECK(m_moved);
    CHECK(a_moved);
  }
}

TEST_CASE("trainer: rsp_only leaves the appearance head untouched over steps") {
  auto corpus = tiny_corpus();
  TrainConfig tc = tiny_train(8);
  tc.mode = Mode::rsp_only;
  tc.weight_decay = 0.0;
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x6);
  tr.init();
  auto wa = tr.net().head_a.weight.vec();
  const int before = tr.bank()->size();
  Rng rng(7);
  for (int s = 0; s < 3; ++s) tr.train_step({0, 1}, rng);
  CHECK(tr.net().head_a.weight.vec() == wa);
  CHECK(tr.bank()->size() == before);  // bank still updated (stays full)
  // The enqueued entries must come from these steps.
  auto steps = tr.bank()->steps();
  CHECK(std::count_if(steps.begin(), steps.end(), [](std::int64_t s) { return s >= 0; }) == 6);
}

TEST_CASE("trainer: checkpoint round trip reproduces the next step exactly") {
  auto corpus = tiny_corpus();
  TrainConfig tc = tiny_train(8);
  Trainer a(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x7);
  a.init();
  Rng warm(9);
  for (int s = 0; s < 2; ++s) a.train_step({0, 1}, warm);
  ckpt::Checkpoint c = a.make_checkpoint();

  Trainer b(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x7);
  b.load_checkpoint(c);
  CHECK(b.step() == a.step());

  Rng ra(10), rb(10);
  auto rep_a = a.train_step({2, 3}, ra);
  auto rep_b = b.train_step({2, 3}, rb);
  CHECK(rep_a.losses.l_total == rep_b.losses.l_total);
  CHECK(rep_a.losses.l_m == rep_b.losses.l_m);
  CHECK(rep_a.losses.l_a == rep_b.losses.l_a);

  // Hash gate.
  Trainer c2(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x8);
  CHECK_THROWS_AS(c2.load_checkpoint(c, false), config::ConfigError);
  CHECK_NOTHROW(c2.load_checkpoint(c, true));
}

TEST_CASE("trainer: run writes the metrics stream and periodic checkpoints") {
  auto corpus = tiny_corpus();
  TrainConfig tc = tiny_train(8);
  tc.epochs = 2;
  tc.checkpoint_every = 1;
  TempDir dir("run");
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc, 0x9);
  tr.init();
  int observed = 0;
  tr.run(dir.path, [&](const train::StepReport&) { ++observed; });

  // metrics stream length = epochs * ceil(N / batch): 2 * ceil(6/2) = 6.
  std::ifstream metrics(dir.path + "/metrics.jsonl");
  REQUIRE(metrics.good());
  int lines = 0;
  std::string line, first;
  while (std::getline(metrics, line)) {
    if (lines == 0) first = line;
    ++lines;
  }
  CHECK(lines == 6);
  CHECK(observed == 6);
  CHECK(first.find("\"step\":0") != std::string::npos);
  CHECK(first.find("\"L_m\"") != std::string::npos);
  CHECK(first.find("\"L_a\"") != std::string::npos);
  CHECK(first.find("\"L_total\"") != std::string::npos);
  CHECK(first.find("\"nce_acc\"") != std::string::npos);
  CHECK(first.find("\"lr\":0.1") != std::string::npos);

  CHECK(std::filesystem::exists(dir.path + "/ckpt_epoch_0001"));
  CHECK(std::filesystem::exists(dir.path + "/ckpt_epoch_0002"));
  CHECK(tr.epoch() == 2);
}

TEST_CASE("trainer: resume matches an uninterrupted run bit for bit") {
  auto corpus = tiny_corpus();
  TempDir straight("straight"), split("split");

  TrainConfig tc4 = tiny_train(8);
  tc4.epochs = 4;
  tc4.checkpoint_every = 2;
  Trainer a(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc4, 0xa);
  a.init();
  a.run(straight.path);

  // Same full budget, interrupted right after the epoch-2 checkpoint: the lr
  // schedule spans the whole budget, so the first leg must share cfg.epochs.
  struct Interrupt {};
  Trainer b1(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc4, 0xa);
  b1.init();
  try {
    b1.run(split.path, [](const train::StepReport& rep) {
      if (rep.step == 6) throw Interrupt{};
    });
    FAIL("interrupt did not fire");
  } catch (const Interrupt&) {
  }
  Trainer b2(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc4, 0xa);
  REQUIRE(b2.resume_from(split.path));
  CHECK(b2.epoch() == 2);
  b2.run(split.path);

  auto pa = a.net().named_params();
  auto pb = b2.net().named_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].second->vec() == pb[i].second->vec());
  }

  // Fresh trainer with no checkpoints in the directory: resume returns false.
  TempDir empty("empty");
  Trainer c(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(), tc4, 0xa);
  CHECK(!c.resume_from(empty.path));
  CHECK(!c.resume_from("no_such_directory_anywhere"));
}

TEST_CASE("trainer: non-finite loss aborts with a diagnostic") {
  auto corpus = tiny_corpus();
  Trainer tr(corpus, tiny_encoder(), tiny_clip(), data::AugmentConfig::identity(),
             tiny_train(8), 0xb);
  tr.init();
  // Poison the appearance head: ReLU and the hinge comparison both filter
  // NaN, but log-sum-exp propagates it into L_a.
  tr.net().head_a.weight.fill(std::numeric_limits<float>::quiet_NaN());
  Rng rng(6);
  CHECK_THROWS_AS(tr.train_step({0, 1}, rng), train::TrainError);
}
