// Integration tests driving the real rsplab binary (path injected by CMake
// as RSPLAB_CLI_PATH). All artifacts live under cli_tmp_ws in the test's
// working directory; the workspace (corpus + one pretrain run) is built once
// and reused.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsplab/visualization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kWs = "cli_tmp_ws";

struct RunResult {
  int code = -1;
  std::string out;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RSPLAB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  RunResult r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string ini_path() { return std::string(kWs) + "/lab.ini"; }

// Lazily builds corpus + one 3-epoch rsp_avid run; returns false on failure.
bool ensure_workspace() {
  static int state = 0;  // 0 = not built, 1 = ok, 2 = failed
  if (state != 0) return state == 1;
  state = 2;
  fs::remove_all(kWs);
  fs::create_directories(kWs);
  std::ofstream ini(ini_path());
  ini << "[data]\n"
         "root = cli_tmp_ws/corpus\n"
         "\n"
         "[speedshapes]\n"
         "num_videos = 12\n"
         "num_appearance_classes = 3\n"
         "frames_per_video = 40\n"
         "frame_size = 32\n"
         "seed = 11\n"
         "\n"
         "[clip]\n"
         "length = 4\n"
         "height = 32\n"
         "width = 32\n"
         "\n"
         "[model]\n"
         "widths = 8,16\n"
         "kernels = 3\n"
         "embed_dim = 8\n"
         "group_norm_groups = 4\n"
         "\n"
         "[train]\n"
         "batch_size = 4\n"
         "epochs = 3\n"
         "base_lr = 0.05\n"
         "bank_size = 32\n"
         "checkpoint_every = 1\n"
         "seed = 5\n"
         "\n"
         "[eval]\n"
         "num_clips = 3\n"
         "test_fraction = 0.25\n"
         "probe_epochs = 4\n"
         "probe_batch = 4\n"
         "k_list = 1,2,5\n"
         "seed = 9\n"
         "\n"
         "[viz]\n"
         "threshold = 0.8\n";
  ini.close();
  if (run_cli("gen-data --config " + ini_path()).code != 0) return false;
  if (run_cli("pretrain --config " + ini_path() + " --out cli_tmp_ws/run_a").code != 0) {
    return false;
  }
  state = 1;
  return true;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("cli: help and bad invocations") {
  RunResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("pretrain") != std::string::npos);
  CHECK(help.out.find("visualize") != std::string::npos);
  CHECK(run_cli("").code != 0);                    // subcommand required
  CHECK(run_cli("pretrain --nope").code != 0);     // unknown flag
  CHECK(run_cli("frobnicate").code != 0);          // unknown subcommand
}

TEST_CASE("cli: gen-data writes corpus and manifest") {
  REQUIRE(ensure_workspace());
  CHECK(fs::exists("cli_tmp_ws/corpus/manifest.csv"));
  CHECK(fs::exists("cli_tmp_ws/corpus/v0000/frame_00000.png"));
  CHECK(fs::exists("cli_tmp_ws/corpus/v0011"));
  json manifest = read_json("cli_tmp_ws/corpus/manifest.json");
  REQUIRE(manifest.is_array());
  REQUIRE(manifest.size() == 1);
  CHECK(manifest[0]["command"] == "gen-data");
  CHECK(manifest[0]["seed"] == 11);
  CHECK(manifest[0]["version"].get<std::string>().find("rsplab") == 0);
  CHECK(manifest[0]["effective_config"].get<std::string>().find("[speedshapes]") !=
        std::string::npos);
}

TEST_CASE("cli: pretraining is deterministic and logs metrics") {
  REQUIRE(ensure_workspace());
  CHECK(fs::exists("cli_tmp_ws/run_a/ckpt_epoch_0003"));
  CHECK(fs::exists("cli_tmp_ws/run_a/metrics.jsonl"));

  RunResult again = run_cli("pretrain --config " + ini_path() + " --out cli_tmp_ws/run_b");
  REQUIRE(again.code == 0);
  CHECK(read_bytes("cli_tmp_ws/run_a/metrics.jsonl") ==
        read_bytes("cli_tmp_ws/run_b/metrics.jsonl"));
  CHECK(read_bytes("cli_tmp_ws/run_a/ckpt_epoch_0003") ==
        read_bytes("cli_tmp_ws/run_b/ckpt_epoch_0003"));

  // A different seed changes the stream.
  RunResult other = run_cli("pretrain --config " + ini_path() +
                            " --seed 99 --out cli_tmp_ws/run_seed99");
  REQUIRE(other.code == 0);
  CHECK(read_bytes("cli_tmp_ws/run_seed99/metrics.jsonl") !=
        read_bytes("cli_tmp_ws/run_a/metrics.jsonl"));

  // 3 epochs x 3 steps of batch 4 over 12 videos.
  std::ifstream metrics("cli_tmp_ws/run_a/metrics.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(metrics, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 9);
}

TEST_CASE("cli: resume on a finished run appends to the manifest") {
  REQUIRE(ensure_workspace());
  json before = read_json("cli_tmp_ws/run_a/manifest.json");
  RunResult r = run_cli("pretrain --config " + ini_path() + " --out cli_tmp_ws/run_a --resume");
  REQUIRE(r.code == 0);
  json after = read_json("cli_tmp_ws/run_a/manifest.json");
  CHECK(after.size() == before.size() + 1);
  CHECK(after[after.size() - 1]["args"]["resume"] == true);
}

TEST_CASE("cli: config errors carry line numbers and bad paths fail") {
  REQUIRE(ensure_workspace());
  std::ofstream bad("cli_tmp_ws/bad.ini");
  bad << "[train]\nbatch_size = not_a_number\n";
  bad.close();
  RunResult r = run_cli("pretrain --config cli_tmp_ws/bad.ini");
  CHECK(r.code != 0);
  CHECK(r.out.find("bad.ini:2") != std::string::npos);

  RunResult no_root = run_cli("pretrain");
  CHECK(no_root.code != 0);
  CHECK(no_root.out.find("[data] root") != std::string::npos);

  RunResult no_ckpt =
      run_cli("probe --config " + ini_path() + " --ckpt cli_tmp_ws/missing_ckpt");
  CHECK(no_ckpt.code != 0);
  CHECK(no_ckpt.out.find("error:") != std::string::npos);

  RunResult no_corpus = run_cli("report cli_tmp_ws/not_a_dir");
  CHECK(no_corpus.code != 0);
}

TEST_CASE("cli: probe writes result json for checkpoint and random init") {
  REQUIRE(ensure_workspace());
  RunResult with_ckpt = run_cli("probe --config " + ini_path() +
                                " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --out cli_tmp_ws/run_a");
  REQUIRE(with_ckpt.code == 0);
  json pj = read_json("cli_tmp_ws/run_a/probe_epoch_0003.json");
  CHECK(pj["task"] == "probe");
  CHECK(pj["mode"] == "rsp_avid");
  CHECK(pj["ckpt_epoch"] == 3);
  CHECK(pj["num_classes"] == 3);
  CHECK(pj["test_acc"].get<double>() >= 0.0);
  CHECK(pj["test_acc"].get<double>() <= 1.0);

  RunResult random = run_cli("probe --config " + ini_path() + " --out cli_tmp_ws/run_random");
  REQUIRE(random.code == 0);
  json rj = read_json("cli_tmp_ws/run_random/probe_random.json");
  CHECK(rj["mode"] == "random");
  CHECK(rj["ckpt_epoch"] == -1);

  // Determinism: the same probe twice gives the same numbers.
  RunResult rerun = run_cli("probe --config " + ini_path() +
                            " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --out cli_tmp_ws/run_a");
  REQUIRE(rerun.code == 0);
  CHECK(read_json("cli_tmp_ws/run_a/probe_epoch_0003.json")["test_acc"] == pj["test_acc"]);
}

TEST_CASE("cli: the config hash gates checkpoints unless forced") {
  REQUIRE(ensure_workspace());
  RunResult mismatched = run_cli("probe --config " + ini_path() +
                                 " --mode rsp_only --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003");
  CHECK(mismatched.code != 0);
  CHECK(mismatched.out.find("hash") != std::string::npos);
  RunResult forced =
      run_cli("probe --config " + ini_path() +
              " --mode rsp_only --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --force --out "
              "cli_tmp_ws/run_forced");
  CHECK(forced.code == 0);
}

TEST_CASE("cli: retrieval writes parseable rankings") {
  REQUIRE(ensure_workspace());
  RunResult r = run_cli("retrieve --config " + ini_path() +
                        " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --out cli_tmp_ws/run_a --k 1,2");
  REQUIRE(r.code == 0);
  json rj = read_json("cli_tmp_ws/run_a/retrieval.json");
  CHECK(rj["accuracy"].contains("1"));
  CHECK(rj["accuracy"].contains("2"));
  CHECK(rj["accuracy"]["1"].get<double>() <= rj["accuracy"]["2"].get<double>());
  REQUIRE(rj["queries"].size() == 3);       // 12 videos, test fraction 0.25
  CHECK(rj["queries"][0]["ranking"].size() == 9);
}

TEST_CASE("cli: visualize emits distinct rsp and avid heatmaps") {
  REQUIRE(ensure_workspace());
  const std::string base = "visualize --config " + ini_path() +
                           " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --out cli_tmp_ws/run_a "
                           "v0000 v0001 --task ";
  REQUIRE(run_cli(base + "rsp").code == 0);
  REQUIRE(run_cli(base + "avid").code == 0);
  const std::string rsp_png = "cli_tmp_ws/run_a/cam_v0000-v0001_rsp.png";
  const std::string avid_png = "cli_tmp_ws/run_a/cam_v0000-v0001_avid.png";
  REQUIRE(fs::exists(rsp_png));
  REQUIRE(fs::exists(avid_png));
  CHECK(read_bytes(rsp_png) != read_bytes(avid_png));  // head specificity

  rsplab::viz::ActivationMap map =
      rsplab::viz::read_activation_map_raw("cli_tmp_ws/run_a/cam_v0000-v0001_rsp.raw");
  CHECK(map.m.rank() == 3);
  CHECK(std::isfinite(map.s));

  CHECK(run_cli(base + "rsp v0002").code != 0);   // odd id count
  CHECK(run_cli(base + "flow").code != 0);        // bad task
  RunResult unknown = run_cli("visualize --config " + ini_path() +
                              " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 nope_id v0001");
  CHECK(unknown.code != 0);
  CHECK(unknown.out.find("nope_id") != std::string::npos);
}

TEST_CASE("cli: report aggregates runs into plots and an ablation table") {
  REQUIRE(ensure_workspace());
  // Make sure both runs carry probe results (idempotent if already written).
  REQUIRE(run_cli("probe --config " + ini_path() +
                  " --ckpt cli_tmp_ws/run_a/ckpt_epoch_0003 --out cli_tmp_ws/run_a")
              .code == 0);
  REQUIRE(run_cli("probe --config " + ini_path() + " --out cli_tmp_ws/run_random").code == 0);

  RunResult r = run_cli("report cli_tmp_ws/run_a cli_tmp_ws/run_random --out cli_tmp_ws/report");
  REQUIRE(r.code == 0);
  CHECK(fs::exists("cli_tmp_ws/report/loss_curves.svg"));
  CHECK(fs::exists("cli_tmp_ws/report/probe_vs_epoch.svg"));
  CHECK(fs::exists("cli_tmp_ws/report/ablation.md"));
  std::ifstream md("cli_tmp_ws/report/ablation.md");
  std::string table((std::istreambuf_iterator<char>(md)), std::istreambuf_iterator<char>());
  CHECK(table.find("| run_a | rsp_avid |") != std::string::npos);
  CHECK(table.find("| run_random | random |") != std::string::npos);
  CHECK(r.out.find("| run | mode |") != std::string::npos);

  // A run dir with neither metrics nor probe results is an error.
  fs::create_directories("cli_tmp_ws/empty_run");
  CHECK(run_cli("report cli_tmp_ws/empty_run").code != 0);
}
