#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsplab/config.hpp"
#include "rsplab/dataset.hpp"
#include "rsplab/image.hpp"

namespace rsplab::data {

// Synthetic corpus: each video shows one textured shape translating over a
// textured background. Appearance class = (shape kind, texture family);
// intrinsic velocity is drawn independently of class, so appearance and
// motion supervision are decoupled.
struct SpeedShapesConfig {
  int num_videos = 200;
  int num_appearance_classes = 10;
  int frames_per_video = 60;
  double velocity_min = 0.6;  // pixels/frame
  double velocity_max = 2.4;
  int frame_size = 64;
  std::uint64_t seed = 7;

  static SpeedShapesConfig from_config(const config::RawConfig& cfg, std::uint64_t default_seed);
  void validate() const;
};

// Everything sampled per video; exposed so tests can inspect distributions
// without rendering pixels.
struct VideoAttribs {
  int label = 0;
  int shape_kind = 0;   // label % 5
  int texture_id = 0;   // label / 5
  int background_id = 0;
  double radius = 0.0;
  double velocity = 0.0;   // intrinsic, pixels/frame
  double direction = 0.0;  // radians
  double x0 = 0.0, y0 = 0.0;
  double hue = 0.0, sat = 0.0, val = 0.0;  // foreground color
  double pattern_angle = 0.0;
  double pattern_phase = 0.0;
};

inline constexpr int kSpeedShapesBackgroundPool = 8;
inline constexpr int kSpeedShapesShapeKinds = 5;

VideoAttribs speedshapes_video_attribs(const SpeedShapesConfig& cfg, int video_idx);

// Backgrounds come from a small shared pool, so instance discrimination
// cannot rely on the background alone.
img::Image8 render_speedshapes_background(const SpeedShapesConfig& cfg, int background_id);

std::vector<img::Image8> render_speedshapes_video(const SpeedShapesConfig& cfg, int video_idx);

// Writes <out_dir>/<id>/frame_%05d.png for every video plus
// <out_dir>/manifest.csv; deterministic given cfg.seed. Returns the records.
std::vector<VideoRecord> generate_speedshapes(const SpeedShapesConfig& cfg,
                                              const std::string& out_dir, int workers = 1);

// Same corpus without touching disk (tests, quick experiments).
Corpus generate_speedshapes_in_memory(const SpeedShapesConfig& cfg, int clip_length, int max_speed,
                                      int workers = 1);

}  // namespace rsplab::data
