#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rsplab/config.hpp"
#include "rsplab/image.hpp"
#include "rsplab/rng.hpp"
#include "rsplab/tensor.hpp"

namespace rsplab::data {

// Raised when a sampling precondition fails (video too short, index out of
// range). Config-shaped failures raise config::ConfigError instead.
class SampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One addressable frame sequence with metadata.
struct VideoRecord {
  std::string id;
  int num_frames = 0;
  int fps = 25;
  int label = -1;      // optional class index; -1 means unlabeled
  std::string source;  // frame directory
};

// A (video, start, length, playback-speed) selection. `speed` is the frame
// stride: speed 2 plays twice as fast by skipping every other frame.
struct ClipSpec {
  std::string video_id;
  int start = 0;
  int length = 16;
  int speed = 1;
};

// Decoded pixels for a ClipSpec: [T, H, W, C] with values in [0, 1], C = 3.
struct Clip {
  ClipSpec spec;
  TensorF pixels;

  int t() const { return static_cast<int>(pixels.dim(0)); }
  int h() const { return static_cast<int>(pixels.dim(1)); }
  int w() const { return static_cast<int>(pixels.dim(2)); }
  float& at(int t, int y, int x, int c) {
    return pixels[((static_cast<std::size_t>(t) * pixels.dim(1) + static_cast<std::size_t>(y)) *
                       pixels.dim(2) +
                   static_cast<std::size_t>(x)) *
                      3 +
                  static_cast<std::size_t>(c)];
  }
  float at(int t, int y, int x, int c) const {
    return const_cast<Clip*>(this)->at(t, y, x, c);
  }
};

// Target clip geometry.
struct ClipConfig {
  int length = 16;
  int height = 64;
  int width = 64;

  static ClipConfig from_config(const config::RawConfig& cfg);
  void validate() const;
};

// Augmentation parameter ranges (SimCLR-style recipe). All zero magnitudes
// plus full-scale crop make augment the identity (after the exact resize).
struct AugmentConfig {
  bool enabled = true;
  double crop_min_scale = 0.4;  // crop area fraction lower bound, upper is 1
  double brightness = 0.4;      // factor in [1-b, 1+b]
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;             // rotation as a fraction of the color wheel
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;

  static AugmentConfig from_config(const config::RawConfig& cfg);
  static AugmentConfig identity();
  bool is_identity() const;
  void validate() const;
};

// Frame indices of a clip: [start, start+speed, ..., start+speed*(length-1)].
// Raises SampleError naming the violating index when it falls outside
// [0, num_frames).
std::vector<int> sample_clip_indices(int num_frames, int start, int length, int speed);

// Manifest I/O: CSV with header id,num_frames,fps,label.
void write_manifest(const std::string& path, const std::vector<VideoRecord>& records);
std::vector<VideoRecord> read_manifest(const std::string& path);

// An immutable frame corpus: manifest plus RAM-cached frames. Records whose
// num_frames < max_speed*(clip_length-1)+1 are rejected at load and counted.
class Corpus {
 public:
  // Loads <root>/manifest.csv and every accepted video's frames
  // (<root>/<id>/frame_%05d.png), in parallel over `workers`.
  static Corpus load(const std::string& root, int clip_length, int max_speed, int workers = 1);
  // In-memory corpus for generators and tests; frames[i] belongs to records[i].
  static Corpus from_frames(std::vector<VideoRecord> records,
                            std::vector<std::vector<img::Image8>> frames, int clip_length,
                            int max_speed);

  std::size_t size() const { return records_.size(); }
  const VideoRecord& record(std::size_t i) const { return records_.at(i); }
  std::size_t index_of(const std::string& video_id) const;
  int num_rejected() const { return num_rejected_; }
  int num_classes() const;

  const img::Image8& frame(std::size_t video_idx, int frame_idx) const;

  // Decodes the spec's frames into [T, srcH, srcW, 3] floats in [0, 1].
  Clip decode_clip(const ClipSpec& spec) const;

 private:
  std::vector<VideoRecord> records_;
  std::vector<std::vector<img::Image8>> frames_;
  std::unordered_map<std::string, std::size_t> by_id_;
  int num_rejected_ = 0;

  void build_index(int clip_length, int max_speed);
};

// --- sampling: spec level (cheap, drawn serially for determinism) ---

// Uniform start over the valid range for (length, speed).
ClipSpec sample_clip_spec(const VideoRecord& video, int length, int speed, Rng& rng);

struct TripletSpec {
  ClipSpec i, j, k;  // s_i = s_j != s_k
};

// Speeds: s_i = s_j drawn uniformly from speed_set, s_k uniform over the
// rest; starts independent and uniform.
TripletSpec sample_rsp_triplet_spec(const VideoRecord& video, int length,
                                    const std::vector<int>& speed_set, Rng& rng);

// Speeds independent and uniform over speed_set when speed_augmentation is
// on; both fixed to `fixed_speed` when off.
std::pair<ClipSpec, ClipSpec> sample_avid_pair_spec(const VideoRecord& video, int length,
                                                    const std::vector<int>& speed_set,
                                                    bool speed_augmentation, int fixed_speed,
                                                    Rng& rng);

// K specs over videos != exclude_video (with replacement), speeds per the
// speed-augmentation strategy.
std::vector<ClipSpec> sample_negative_specs(const Corpus& corpus, const std::string& exclude_video,
                                            int k, int length, const std::vector<int>& speed_set,
                                            bool speed_augmentation, int fixed_speed, Rng& rng);

// --- clip realization: decode + augment (parallel-safe per aug_seed) ---

// Exact bilinear resize to (h, w); scale 1 reproduces the input bitwise.
Clip resize_clip(const Clip& clip, int h, int w);

// Random crop+resize to (cfg h, w), color jitter, Gaussian blur; parameters
// drawn once per clip from `rng` and applied identically to every frame.
Clip augment(const Clip& clip, const ClipConfig& clip_cfg, const AugmentConfig& aug, Rng& rng);

// decode_clip + augment with an Rng seeded by aug_seed.
Clip realize_clip(const Corpus& corpus, const ClipSpec& spec, const ClipConfig& clip_cfg,
                  const AugmentConfig& aug, std::uint64_t aug_seed);

// --- sampling: clip level (the Algorithm-1-facing wrappers) ---

struct RspTriplet {
  Clip c_i, c_j, c_k;
};

RspTriplet sample_rsp_triplet(const Corpus& corpus, std::size_t video_idx,
                              const ClipConfig& clip_cfg, const std::vector<int>& speed_set,
                              const AugmentConfig& aug, Rng& rng);

std::pair<Clip, Clip> sample_avid_pair(const Corpus& corpus, std::size_t video_idx,
                                       const ClipConfig& clip_cfg,
                                       const std::vector<int>& speed_set, bool speed_augmentation,
                                       int fixed_speed, const AugmentConfig& aug, Rng& rng);

std::vector<Clip> sample_negatives(const Corpus& corpus, const std::string& exclude_video, int k,
                                   const ClipConfig& clip_cfg, const std::vector<int>& speed_set,
                                   bool speed_augmentation, int fixed_speed, const AugmentConfig& aug,
                                   Rng& rng);

}  // namespace rsplab::data
