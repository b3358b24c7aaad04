// rsplab: operator CLI for the RSP + A-VID lab.
//
// Subcommands: gen-data, pretrain, probe, finetune, retrieve, visualize,
// report. One config file with per-command sections; flags override file
// values; every command persists a manifest describing the effective run.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsplab/checkpoint.hpp"
#include "rsplab/config.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/eval.hpp"
#include "rsplab/metrics.hpp"
#include "rsplab/model.hpp"
#include "rsplab/parallel.hpp"
#include "rsplab/plot.hpp"
#include "rsplab/speedshapes.hpp"
#include "rsplab/trainer.hpp"
#include "rsplab/visualization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rsplab;

namespace {

constexpr const char* kVersion = "rsplab 0.1.0";

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex_u64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return out;
}

// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out;
  std::int64_t seed = 0;
  bool force = false;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "INI-style config file");
  sub->add_option("--out", c.out, "output directory");
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed (overrides config seeds)");
  sub->add_flag("--force", c.force, "bypass config-hash checks");
}

// The whole config file, parsed once per command so typos anywhere fail fast.
struct Loaded {
  config::RawConfig raw = config::RawConfig::parse_string("", "<empty>");
  data::SpeedShapesConfig data;
  std::string data_root;
  data::ClipConfig clip;
  data::AugmentConfig aug;
  model::EncoderConfig enc;
  train::TrainConfig train;
  eval::EvalConfig eval_cfg;
  double viz_threshold = 0.8;
  std::uint64_t hash = 0;  // model-relevant sections: augment, clip, data, model, train
  std::uint64_t seed = 0;  // the command's primary seed, for the manifest
};

Loaded load_all(const Common& c, const std::string& mode_override,
                const std::string& seed_section) {
  config::RawConfig raw = c.config_path.empty()
                              ? config::RawConfig::parse_string("", "<defaults>")
                              : config::RawConfig::parse_file(c.config_path);
  if (c.seed_opt && c.seed_opt->count() > 0) {
    for (const char* sect : {"speedshapes", "train", "eval"}) {
      raw.override_value(sect, "seed", std::to_string(c.seed));
    }
  }
  if (!mode_override.empty()) raw.override_value("train", "mode", mode_override);

  Loaded l;
  l.data = data::SpeedShapesConfig::from_config(raw, l.data.seed);
  l.data_root = raw.get_str("data", "root", "");
  raw.mark_section_known("data");
  l.clip = data::ClipConfig::from_config(raw);
  l.aug = data::AugmentConfig::from_config(raw);
  l.enc = model::EncoderConfig::from_config(raw);
  l.train = train::TrainConfig::from_config(raw, 0);
  l.eval_cfg = eval::EvalConfig::from_config(raw, 0);
  l.viz_threshold = raw.get_real("viz", "threshold", 0.8);
  raw.mark_section_known("viz");
  raw.ensure_all_consumed();
  l.hash = config::fnv1a64(
      raw.canonical_sections({"augment", "clip", "data", "model", "speedshapes", "train"}));
  l.seed = seed_section == "data"    ? l.data.seed
           : seed_section == "train" ? l.train.seed
                                     : l.eval_cfg.seed;
  l.raw = std::move(raw);
  return l;
}

std::string resolve_out(const Common& c, const std::string& fallback) {
  return c.out.empty() ? fallback : c.out;
}

void write_manifest(const std::string& out_dir, const std::string& command, const Loaded& l,
                    const json& args, const std::string& started, bool append) {
  fs::create_directories(out_dir);
  json entry = {
      {"command", command},
      {"config_hash", hex_u64(l.hash)},
      {"seed", l.seed},
      {"version", kVersion},
      {"out_dir", out_dir},
      {"started", started},
      {"finished", iso_utc_now()},
      {"args", args},
      {"effective_config", l.raw.canonical()},
  };
  const std::string path = out_dir + "/manifest.json";
  json doc = json::array();
  if (append && fs::exists(path)) {
    std::ifstream in(path);
    json prev = json::parse(in, nullptr, false);
    if (prev.is_array()) doc = std::move(prev);
  }
  doc.push_back(std::move(entry));
  std::ofstream out(path);
  if (!out) throw img::IoError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

data::Corpus load_corpus(const Loaded& l, int max_speed) {
  if (l.data_root.empty()) {
    throw config::ConfigError("config [data] root is required for this command");
  }
  return data::Corpus::load(l.data_root, l.clip.length, max_speed, env_worker_count());
}

// Loads the checkpoint into the net (hash-gated) or random-initializes it.
// Returns the checkpoint epoch, -1 for random init.
int make_net(model::RspNetF& net, const Loaded& l, const std::string& ckpt_path, bool force) {
  if (ckpt_path.empty()) {
    net.init_params(l.eval_cfg.seed);
    return -1;
  }
  ckpt::Checkpoint c = ckpt::Checkpoint::load(ckpt_path);
  c.check_hash(l.hash, force);
  c.load_into(net);
  return c.epoch;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw img::IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string dir_label(const std::string& dir) {
  fs::path p(dir);
  if (p.filename().empty()) p = p.parent_path();
  const std::string name = p.filename().string();
  return name.empty() ? dir : name;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Common& c) {
  const std::string started = iso_utc_now();
  Loaded l = load_all(c, "", "data");
  const std::string out = resolve_out(c, l.data_root);
  if (out.empty()) {
    throw config::ConfigError("gen-data needs --out or config [data] root");
  }
  auto records = data::generate_speedshapes(l.data, out, env_worker_count());
  std::printf("generated %zu videos (%d classes, %d frames each) in %s\n", records.size(),
              l.data.num_appearance_classes, l.data.frames_per_video, out.c_str());
  write_manifest(out, "gen-data", l, json{{"out", out}}, started, false);
  return 0;
}

int cmd_pretrain(const Common& c, const std::string& mode, bool resume) {
  const std::string started = iso_utc_now();
  Loaded l = load_all(c, mode, "train");
  data::Corpus corpus = load_corpus(l, l.train.speed_set.back());
  const std::string out = resolve_out(c, "runs/pretrain");

  const std::int64_t spe =
      (static_cast<std::int64_t>(corpus.size()) + l.train.batch_size - 1) / l.train.batch_size;
  auto on_step = [&](const train::StepReport& rep) {
    if ((rep.step + 1) % spe == 0) {
      std::printf("epoch %4d/%d  lr %.5f  L_m %.5f  L_a %.5f  L_total %.5f  nce_acc %.3f\n",
                  rep.epoch + 1, l.train.epochs, rep.lr, rep.losses.l_m, rep.losses.l_a,
                  rep.losses.l_total, rep.losses.nce_acc);
      std::fflush(stdout);
    }
  };
  const std::string final_ckpt = train::run_pretraining(
      corpus, l.enc, l.clip, l.aug, l.train, l.hash, out, resume, c.force, on_step);
  std::printf("final checkpoint: %s\n", final_ckpt.c_str());
  write_manifest(out, "pretrain", l,
                 json{{"mode", train::to_string(l.train.mode)},
                      {"resume", resume},
                      {"final_checkpoint", final_ckpt}},
                 started, resume);
  return 0;
}

int cmd_probe(const Common& c, const std::string& ckpt_path, const std::string& mode,
              bool finetune) {
  const std::string started = iso_utc_now();
  Loaded l = load_all(c, mode, "eval");
  data::Corpus corpus = load_corpus(l, 1);
  const char* task = finetune ? "finetune" : "probe";
  const std::string out = resolve_out(c, std::string("runs/") + task);

  model::RspNetF net(l.enc);
  const int epoch = make_net(net, l, ckpt_path, c.force);
  eval::Split split = eval::split_corpus(corpus, l.eval_cfg.test_fraction, l.eval_cfg.seed);
  eval::ProbeResult r =
      eval::train_action_probe(net, corpus, split, l.clip, l.aug, l.eval_cfg, !finetune);

  char suffix[32];
  if (epoch >= 0) {
    std::snprintf(suffix, sizeof(suffix), "_epoch_%04d", epoch);
  } else {
    std::snprintf(suffix, sizeof(suffix), "_random");
  }
  fs::create_directories(out);
  const std::string result_path = out + "/" + task + suffix + ".json";
  write_json_file(result_path,
                  json{{"task", task},
                       {"mode", epoch >= 0 ? train::to_string(l.train.mode) : "random"},
                       {"checkpoint", ckpt_path},
                       {"ckpt_epoch", epoch},
                       {"test_acc", r.test_acc},
                       {"train_acc", r.train_acc},
                       {"num_classes", r.num_classes},
                       {"seed", l.eval_cfg.seed}});
  std::printf("%s: test_acc %.4f  train_acc %.4f  (%d classes, %zu train / %zu test videos)\n",
              task, r.test_acc, r.train_acc, r.num_classes, split.train.size(),
              split.test.size());
  std::printf("wrote %s\n", result_path.c_str());
  write_manifest(out, task, l,
                 json{{"ckpt", ckpt_path}, {"result", result_path}, {"ckpt_epoch", epoch}},
                 started, false);
  return 0;
}

int cmd_retrieve(const Common& c, const std::string& ckpt_path, const std::string& mode,
                 const std::vector<int>& k_override) {
  const std::string started = iso_utc_now();
  Loaded l = load_all(c, mode, "eval");
  if (!k_override.empty()) {
    l.eval_cfg.k_list = k_override;
    l.eval_cfg.validate();
  }
  data::Corpus corpus = load_corpus(l, 1);
  const std::string out = resolve_out(c, "runs/retrieve");

  model::RspNetF net(l.enc);
  const int epoch = make_net(net, l, ckpt_path, c.force);
  eval::Split split = eval::split_corpus(corpus, l.eval_cfg.test_fraction, l.eval_cfg.seed);
  auto queries = eval::extract_features(corpus, split.test, net, l.clip, l.eval_cfg);
  auto gallery = eval::extract_features(corpus, split.train, net, l.clip, l.eval_cfg);
  eval::RetrievalResult r = eval::retrieve_topk(queries, gallery, l.eval_cfg.k_list);

  fs::create_directories(out);
  const std::string result_path = out + "/retrieval.json";
  eval::write_retrieval_json(result_path, r, queries);
  std::printf("retrieval (%zu queries, %zu gallery, ckpt epoch %d):\n", queries.size(),
              gallery.size(), epoch);
  for (const auto& [k, acc] : r.accuracy) std::printf("  top-%-3d %.4f\n", k, acc);
  std::printf("wrote %s\n", result_path.c_str());
  write_manifest(out, "retrieve", l,
                 json{{"ckpt", ckpt_path}, {"k_list", l.eval_cfg.k_list}, {"result", result_path}},
                 started, false);
  return 0;
}

int cmd_visualize(const Common& c, const std::string& ckpt_path, const std::string& mode,
                  const std::string& task, const std::vector<std::string>& ids) {
  const std::string started = iso_utc_now();
  if (task != "rsp" && task != "avid") {
    throw config::ConfigError("visualize: --task must be rsp or avid");
  }
  if (ids.size() < 2 || ids.size() % 2 != 0) {
    throw config::ConfigError("visualize: pass an even number of video ids (pairs)");
  }
  Loaded l = load_all(c, mode, "eval");
  data::Corpus corpus = load_corpus(l, 1);
  const std::string out = resolve_out(c, "runs/visualize");

  model::RspNetF net(l.enc);
  make_net(net, l, ckpt_path, c.force);
  const TensorF& w = task == "rsp" ? net.head_m.weight : net.head_a.weight;
  const std::size_t c_dim = static_cast<std::size_t>(l.enc.feature_dim());

  json written = json::array();
  for (std::size_t p = 0; p + 1 < ids.size(); p += 2) {
    std::vector<data::Clip> clips;
    for (int side = 0; side < 2; ++side) {
      const std::size_t vi = corpus.index_of(ids[p + side]);
      const data::VideoRecord& rec = corpus.record(vi);
      const int start = eval::even_clip_starts(rec.num_frames, l.clip.length, 1)[0];
      clips.push_back(data::resize_clip(corpus.decode_clip({rec.id, start, l.clip.length, 1}),
                                        l.clip.height, l.clip.width));
    }
    auto x = model::clips_to_batch<float>(clips);
    model::ModelOut<float> mo = net.forward(x, false);
    viz::ActivationMap map = viz::similarity_activation_map(
        viz::feature_slice(mo.feature, 0),
        std::span<const float>(mo.pooled.data() + c_dim, c_dim), w, w);
    map.pair_id = sanitize_id(ids[p]) + "-" + sanitize_id(ids[p + 1]);
    viz::OverlayResult res =
        viz::render_heatmap_overlay(clips[0], map, l.viz_threshold, out, task);
    std::printf("pair (%s, %s): s %.5f  %s\n", ids[p].c_str(), ids[p + 1].c_str(), map.s,
                res.png_path.c_str());
    written.push_back(res.png_path);
    written.push_back(res.raw_path);
  }
  write_manifest(out, "visualize", l,
                 json{{"ckpt", ckpt_path}, {"task", task}, {"ids", ids}, {"files", written}},
                 started, false);
  return 0;
}

int cmd_report(const Common& c, const std::vector<std::string>& run_dirs) {
  const std::string started = iso_utc_now();
  Loaded l = load_all(c, "", "eval");
  const std::string out = resolve_out(c, "runs/report");
  fs::create_directories(out);

  struct ProbePoint {
    int epoch;
    double test_acc;
    std::string mode;
  };
  struct RunData {
    std::string label;
    std::vector<metrics::Row> rows;
    std::vector<ProbePoint> probes;  // sorted by epoch; random init = epoch 0
  };
  std::vector<RunData> runs;
  const std::regex probe_re("^(probe|finetune)_(epoch_([0-9]+)|random)\\.json$");
  for (const std::string& dir : run_dirs) {
    if (!fs::exists(dir)) throw img::IoError("run directory not found: " + dir);
    RunData rd;
    rd.label = dir_label(dir);
    if (fs::exists(dir + "/metrics.jsonl")) rd.rows = metrics::read_metrics_jsonl(dir + "/metrics.jsonl");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
      names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) {
      std::smatch m;
      if (!std::regex_match(name, m, probe_re)) continue;
      std::ifstream in(dir + "/" + name);
      json j = json::parse(in, nullptr, false);
      if (j.is_discarded()) {
        throw config::ConfigError(dir + "/" + name + ": malformed probe result");
      }
      ProbePoint p;
      p.epoch = m[2] == "random" ? 0 : std::stoi(m[3]);
      p.test_acc = j.at("test_acc").get<double>();
      p.mode = j.value("mode", "?");
      rd.probes.push_back(p);
    }
    std::sort(rd.probes.begin(), rd.probes.end(),
              [](const ProbePoint& a, const ProbePoint& b) { return a.epoch < b.epoch; });
    runs.push_back(std::move(rd));
  }

  bool wrote_any = false;
  json outputs = json::array();

  // Loss curves: one L_total per run, or the three losses for a single run.
  std::vector<plot::Series> loss_series;
  if (runs.size() == 1 && !runs[0].rows.empty()) {
    plot::Series lm{"L_m", {}}, la{"L_a", {}}, lt{"L_total", {}};
    for (const auto& r : runs[0].rows) {
      lm.points.emplace_back(static_cast<double>(r.step), r.l_m);
      la.points.emplace_back(static_cast<double>(r.step), r.l_a);
      lt.points.emplace_back(static_cast<double>(r.step), r.l_total);
    }
    loss_series = {lm, la, lt};
  } else {
    for (const RunData& rd : runs) {
      if (rd.rows.empty()) continue;
      plot::Series s{rd.label, {}};
      for (const auto& r : rd.rows) s.points.emplace_back(static_cast<double>(r.step), r.l_total);
      loss_series.push_back(std::move(s));
    }
  }
  if (!loss_series.empty()) {
    const std::string path = out + "/loss_curves.svg";
    plot::write_svg_line_chart(path, "pre-training losses", "step", "loss", loss_series);
    std::printf("wrote %s\n", path.c_str());
    outputs.push_back(path);
    wrote_any = true;
  }

  // Probe accuracy vs. pre-training epoch.
  std::vector<plot::Series> probe_series;
  for (const RunData& rd : runs) {
    if (rd.probes.empty()) continue;
    plot::Series s{rd.label, {}};
    for (const ProbePoint& p : rd.probes) {
      s.points.emplace_back(static_cast<double>(p.epoch), p.test_acc);
    }
    probe_series.push_back(std::move(s));
  }
  if (!probe_series.empty()) {
    const std::string path = out + "/probe_vs_epoch.svg";
    plot::write_svg_line_chart(path, "probe accuracy vs pre-training epoch", "epoch",
                               "test accuracy", probe_series);
    std::printf("wrote %s\n", path.c_str());
    outputs.push_back(path);
    wrote_any = true;
  }

  // Ablation table: latest probe per run plus the final total loss.
  std::string table = "| run | mode | probe test acc | final L_total |\n|---|---|---|---|\n";
  bool any_row = false;
  for (const RunData& rd : runs) {
    if (rd.rows.empty() && rd.probes.empty()) continue;
    any_row = true;
    char acc[32] = "-", lt[32] = "-";
    std::string mode = "-";
    if (!rd.probes.empty()) {
      const ProbePoint& last = rd.probes.back();
      std::snprintf(acc, sizeof(acc), "%.4f", last.test_acc);
      mode = last.mode;
    }
    if (!rd.rows.empty()) std::snprintf(lt, sizeof(lt), "%.4f", rd.rows.back().l_total);
    table += "| " + rd.label + " | " + mode + " | " + acc + " | " + lt + " |\n";
  }
  if (any_row) {
    const std::string path = out + "/ablation.md";
    std::ofstream md(path);
    if (!md) throw img::IoError("cannot write " + path);
    md << table;
    md.close();
    std::printf("wrote %s\n%s", path.c_str(), table.c_str());
    outputs.push_back(path);
    wrote_any = true;
  }

  if (!wrote_any) {
    throw config::ConfigError("report: no metrics or probe results found in the given run dirs");
  }
  write_manifest(out, "report", l, json{{"run_dirs", run_dirs}, {"outputs", outputs}}, started,
                 false);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RSP + A-VID video representation lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common c_gen, c_pre, c_probe, c_ft, c_ret, c_viz, c_rep;
  std::string mode_pre, mode_probe, mode_ft, mode_ret, mode_viz;
  std::string ckpt_probe, ckpt_ft, ckpt_ret, ckpt_viz;
  std::string viz_task = "rsp";
  std::vector<int> k_override;
  std::vector<std::string> viz_ids, report_dirs;
  bool resume = false;

  CLI::App* gen = app.add_subcommand("gen-data", "render the synthetic SpeedShapes corpus");
  add_common(gen, c_gen);

  CLI::App* pre = app.add_subcommand("pretrain", "joint RSP + A-VID pre-training");
  add_common(pre, c_pre);
  pre->add_option("--mode", mode_pre, "rsp_avid | rsp_only | avid_only | sp_avid | rsp_vid");
  pre->add_flag("--resume", resume, "continue from the newest checkpoint in --out");

  CLI::App* probe = app.add_subcommand("probe", "linear probe on frozen features");
  add_common(probe, c_probe);
  probe->add_option("--ckpt", ckpt_probe, "checkpoint to probe (omit for random init)");
  probe->add_option("--mode", mode_probe, "training mode the checkpoint was built with");

  CLI::App* ft = app.add_subcommand("finetune", "fine-tune the encoder for action recognition");
  add_common(ft, c_ft);
  ft->add_option("--ckpt", ckpt_ft, "checkpoint to start from (omit for random init)");
  ft->add_option("--mode", mode_ft, "training mode the checkpoint was built with");

  CLI::App* ret = app.add_subcommand("retrieve", "nearest-neighbour video retrieval");
  add_common(ret, c_ret);
  ret->add_option("--ckpt", ckpt_ret, "checkpoint to evaluate (omit for random init)");
  ret->add_option("--mode", mode_ret, "training mode the checkpoint was built with");
  ret->add_option("--k", k_override, "top-k depths (comma separated)")->delimiter(',');

  CLI::App* viz = app.add_subcommand("visualize", "similarity activation heatmaps");
  add_common(viz, c_viz);
  viz->add_option("--ckpt", ckpt_viz, "checkpoint to visualize (omit for random init)");
  viz->add_option("--mode", mode_viz, "training mode the checkpoint was built with");
  viz->add_option("--task", viz_task, "rsp | avid");
  viz->add_option("ids", viz_ids, "video id pairs: i1 j1 [i2 j2 ...]");

  CLI::App* rep = app.add_subcommand("report", "loss curves, probe-vs-epoch plot, ablation table");
  add_common(rep, c_rep);
  rep->add_option("dirs", report_dirs, "run directories to summarize")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(c_gen);
    if (pre->parsed()) return cmd_pretrain(c_pre, mode_pre, resume);
    if (probe->parsed()) return cmd_probe(c_probe, ckpt_probe, mode_probe, false);
    if (ft->parsed()) return cmd_probe(c_ft, ckpt_ft, mode_ft, true);
    if (ret->parsed()) return cmd_retrieve(c_ret, ckpt_ret, mode_ret, k_override);
    if (viz->parsed()) return cmd_visualize(c_viz, ckpt_viz, mode_viz, viz_task, viz_ids);
    if (rep->parsed()) return cmd_report(c_rep, report_dirs);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
