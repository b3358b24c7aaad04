#include "rsplab/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsplab/parallel.hpp"

namespace rsplab::data {

namespace fs = std::filesystem;
using config::ConfigError;

// ---------------------------------------------------------------- configs

ClipConfig ClipConfig::from_config(const config::RawConfig& cfg) {
  ClipConfig c;
  c.length = static_cast<int>(cfg.get_int("clip", "length", c.length));
  c.height = static_cast<int>(cfg.get_int("clip", "height", c.height));
  c.width = static_cast<int>(cfg.get_int("clip", "width", c.width));
  c.validate();
  return c;
}

void ClipConfig::validate() const {
  if (length < 1) throw ConfigError("[clip] length must be >= 1");
  if (height < 8 || width < 8) throw ConfigError("[clip] height/width must be >= 8");
}

AugmentConfig AugmentConfig::from_config(const config::RawConfig& cfg) {
  AugmentConfig a;
  a.enabled = cfg.get_bool("augment", "enabled", a.enabled);
  a.crop_min_scale = cfg.get_real("augment", "crop_min_scale", a.crop_min_scale);
  a.brightness = cfg.get_real("augment", "brightness", a.brightness);
  a.contrast = cfg.get_real("augment", "contrast", a.contrast);
  a.saturation = cfg.get_real("augment", "saturation", a.saturation);
  a.hue = cfg.get_real("augment", "hue", a.hue);
  a.blur_prob = cfg.get_real("augment", "blur_prob", a.blur_prob);
  a.blur_sigma_min = cfg.get_real("augment", "blur_sigma_min", a.blur_sigma_min);
  a.blur_sigma_max = cfg.get_real("augment", "blur_sigma_max", a.blur_sigma_max);
  a.validate();
  return a;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig a;
  a.crop_min_scale = 1.0;
  a.brightness = a.contrast = a.saturation = a.hue = 0.0;
  a.blur_prob = 0.0;
  return a;
}

bool AugmentConfig::is_identity() const {
  return !enabled || (crop_min_scale >= 1.0 && brightness == 0.0 && contrast == 0.0 &&
                      saturation == 0.0 && hue == 0.0 && blur_prob == 0.0);
}

void AugmentConfig::validate() const {
  if (crop_min_scale <= 0.0 || crop_min_scale > 1.0)
    throw ConfigError("[augment] crop_min_scale must be in (0, 1]");
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0 || hue > 0.5)
    throw ConfigError("[augment] jitter strengths must be >= 0 (hue <= 0.5)");
  if (blur_prob < 0 || blur_prob > 1) throw ConfigError("[augment] blur_prob must be in [0, 1]");
  if (blur_sigma_min <= 0 || blur_sigma_max < blur_sigma_min)
    throw ConfigError("[augment] blur sigma range invalid");
}

// ----------------------------------------------------------- clip indices

std::vector<int> sample_clip_indices(int num_frames, int start, int length, int speed) {
  if (length < 1) throw SampleError("sample_clip_indices: length must be >= 1");
  if (speed < 1) throw SampleError("sample_clip_indices: speed must be >= 1");
  std::vector<int> out(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) {
    int idx = start + speed * t;
    if (idx < 0 || idx >= num_frames) {
      std::ostringstream os;
      os << "sample_clip_indices: frame index " << idx << " out of range [0, " << num_frames
         << ") for start=" << start << " length=" << length << " speed=" << speed;
      throw SampleError(os.str());
    }
    out[static_cast<std::size_t>(t)] = idx;
  }
  return out;
}

// ------------------------------------------------------------- manifest IO

void write_manifest(const std::string& path, const std::vector<VideoRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw img::IoError("cannot write manifest '" + path + "'");
  out << "id,num_frames,fps,label\n";
  for (const auto& r : records) {
    out << r.id << "," << r.num_frames << "," << r.fps << ",";
    if (r.label >= 0) out << r.label;
    out << "\n";
  }
  if (!out) throw img::IoError("write failure on manifest '" + path + "'");
}

std::vector<VideoRecord> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw img::IoError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "id,num_frames,fps,label") {
    throw img::IoError("manifest '" + path + "': expected header 'id,num_frames,fps,label'");
  }
  std::vector<VideoRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string item;
    std::istringstream row(line);
    while (std::getline(row, item, ',')) cols.push_back(item);
    if (line.back() == ',') cols.push_back("");
    if (cols.size() != 4) {
      throw img::IoError("manifest '" + path + "' line " + std::to_string(line_no) +
                         ": expected 4 columns, got " + std::to_string(cols.size()));
    }
    VideoRecord r;
    r.id = cols[0];
    try {
      r.num_frames = std::stoi(cols[1]);
      r.fps = std::stoi(cols[2]);
      r.label = cols[3].empty() ? -1 : std::stoi(cols[3]);
    } catch (const std::exception&) {
      throw img::IoError("manifest '" + path + "' line " + std::to_string(line_no) +
                         ": malformed numeric field");
    }
    if (r.id.empty() || r.num_frames < 1 || r.fps < 1) {
      throw img::IoError("manifest '" + path + "' line " + std::to_string(line_no) +
                         ": invalid record");
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ------------------------------------------------------------------ corpus

void Corpus::build_index(int clip_length, int max_speed) {
  const int min_frames = max_speed * (clip_length - 1) + 1;
  std::vector<VideoRecord> kept;
  std::vector<std::vector<img::Image8>> kept_frames;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].num_frames < min_frames) {
      ++num_rejected_;
      continue;
    }
    kept.push_back(std::move(records_[i]));
    if (!frames_.empty()) kept_frames.push_back(std::move(frames_[i]));
  }
  records_ = std::move(kept);
  frames_ = std::move(kept_frames);
  by_id_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) by_id_[records_[i].id] = i;
  if (records_.empty()) {
    throw ConfigError("corpus: no video satisfies num_frames >= " + std::to_string(min_frames));
  }
}

Corpus Corpus::load(const std::string& root, int clip_length, int max_speed, int workers) {
  Corpus c;
  c.records_ = read_manifest((fs::path(root) / "manifest.csv").string());
  for (auto& r : c.records_) r.source = (fs::path(root) / r.id).string();
  // Reject short records before paying for their frames.
  c.frames_.clear();
  c.build_index(clip_length, max_speed);
  c.frames_.resize(c.records_.size());
  parallel_for(c.records_.size(), workers, [&](std::size_t i) {
    const VideoRecord& r = c.records_[i];
    std::vector<img::Image8> video;
    video.reserve(static_cast<std::size_t>(r.num_frames));
    for (int f = 0; f < r.num_frames; ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d.png", f);
      video.push_back(img::read_png((fs::path(r.source) / name).string()));
    }
    c.frames_[i] = std::move(video);
  });
  return c;
}

Corpus Corpus::from_frames(std::vector<VideoRecord> records,
                           std::vector<std::vector<img::Image8>> frames, int clip_length,
                           int max_speed) {
  if (records.size() != frames.size()) {
    throw std::invalid_argument("Corpus::from_frames: records/frames size mismatch");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (static_cast<int>(frames[i].size()) != records[i].num_frames) {
      throw std::invalid_argument("Corpus::from_frames: frame count mismatch for '" +
                                  records[i].id + "'");
    }
  }
  Corpus c;
  c.records_ = std::move(records);
  c.frames_ = std::move(frames);
  c.build_index(clip_length, max_speed);
  return c;
}

std::size_t Corpus::index_of(const std::string& video_id) const {
  auto it = by_id_.find(video_id);
  if (it == by_id_.end()) throw SampleError("corpus: unknown video id '" + video_id + "'");
  return it->second;
}

int Corpus::num_classes() const {
  int max_label = -1;
  for (const auto& r : records_) max_label = std::max(max_label, r.label);
  return max_label + 1;
}

const img::Image8& Corpus::frame(std::size_t video_idx, int frame_idx) const {
  const VideoRecord& r = records_.at(video_idx);
  if (frame_idx < 0 || frame_idx >= r.num_frames) {
    throw SampleError("corpus: frame index " + std::to_string(frame_idx) + " out of range for '" +
                      r.id + "'");
  }
  return frames_.at(video_idx).at(static_cast<std::size_t>(frame_idx));
}

Clip Corpus::decode_clip(const ClipSpec& spec) const {
  const std::size_t vi = index_of(spec.video_id);
  const VideoRecord& r = records_[vi];
  const std::vector<int> indices =
      sample_clip_indices(r.num_frames, spec.start, spec.length, spec.speed);
  const img::Image8& first = frame(vi, indices[0]);
  const int h = first.height;
  const int w = first.width;
  Clip clip;
  clip.spec = spec;
  clip.pixels = TensorF({static_cast<std::size_t>(spec.length), static_cast<std::size_t>(h),
                         static_cast<std::size_t>(w), 3});
  float* dst = clip.pixels.data();
  const std::size_t frame_elems = static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const img::Image8& im = frame(vi, indices[t]);
    if (im.height != h || im.width != w) {
      throw SampleError("corpus: inconsistent frame sizes within video '" + spec.video_id + "'");
    }
    const std::uint8_t* src = im.pixels.data();
    float* out = dst + t * frame_elems;
    for (std::size_t p = 0; p < frame_elems; ++p) out[p] = static_cast<float>(src[p]) / 255.0f;
  }
  return clip;
}

// -------------------------------------------------------------- spec draws

namespace {

void check_speed_set(const std::vector<int>& speed_set, std::size_t min_size) {
  if (speed_set.size() < min_size) {
    throw ConfigError("speed_set needs >= " + std::to_string(min_size) + " entries");
  }
  for (int s : speed_set) {
    if (s < 1) throw ConfigError("speed_set entries must be positive integers");
  }
}

int max_start_for(const VideoRecord& video, int length, int speed) {
  const int span = speed * (length - 1) + 1;
  const int max_start = video.num_frames - span;
  if (max_start < 0) {
    throw SampleError("video '" + video.id + "' too short (" + std::to_string(video.num_frames) +
                      " frames) for length=" + std::to_string(length) +
                      " speed=" + std::to_string(speed));
  }
  return max_start;
}

}  // namespace

ClipSpec sample_clip_spec(const VideoRecord& video, int length, int speed, Rng& rng) {
  const int max_start = max_start_for(video, length, speed);
  ClipSpec spec;
  spec.video_id = video.id;
  spec.length = length;
  spec.speed = speed;
  spec.start = static_cast<int>(rng.uniform_int(0, max_start));
  return spec;
}

TripletSpec sample_rsp_triplet_spec(const VideoRecord& video, int length,
                                    const std::vector<int>& speed_set, Rng& rng) {
  check_speed_set(speed_set, 2);
  max_start_for(video, length, *std::max_element(speed_set.begin(), speed_set.end()));
  const std::size_t same = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(speed_set.size()) - 1));
  std::size_t other = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(speed_set.size()) - 2));
  if (other >= same) ++other;  // uniform over speed_set \ {speed_set[same]}
  TripletSpec t;
  t.i = sample_clip_spec(video, length, speed_set[same], rng);
  t.j = sample_clip_spec(video, length, speed_set[same], rng);
  t.k = sample_clip_spec(video, length, speed_set[other], rng);
  return t;
}

std::pair<ClipSpec, ClipSpec> sample_avid_pair_spec(const VideoRecord& video, int length,
                                                    const std::vector<int>& speed_set,
                                                    bool speed_augmentation, int fixed_speed,
                                                    Rng& rng) {
  check_speed_set(speed_set, 1);
  auto draw_speed = [&]() -> int {
    if (!speed_augmentation) return fixed_speed;
    return speed_set[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(speed_set.size()) - 1))];
  };
  const int s_i = draw_speed();
  const int s_j = draw_speed();
  ClipSpec a = sample_clip_spec(video, length, s_i, rng);
  ClipSpec b = sample_clip_spec(video, length, s_j, rng);
  return {a, b};
}

std::vector<ClipSpec> sample_negative_specs(const Corpus& corpus, const std::string& exclude_video,
                                            int k, int length, const std::vector<int>& speed_set,
                                            bool speed_augmentation, int fixed_speed, Rng& rng) {
  if (corpus.size() < 2) {
    throw ConfigError("sample_negatives: corpus must contain >= 2 videos");
  }
  if (k < 0) throw ConfigError("sample_negatives: K must be >= 0");
  check_speed_set(speed_set, 1);
  const std::size_t exclude_idx = corpus.index_of(exclude_video);
  std::vector<ClipSpec> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int n = 0; n < k; ++n) {
    // Uniform over the other videos: draw from size-1 slots, skip exclude.
    std::size_t vi = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(corpus.size()) - 2));
    if (vi >= exclude_idx) ++vi;
    int speed = fixed_speed;
    if (speed_augmentation) {
      speed = speed_set[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(speed_set.size()) - 1))];
    }
    out.push_back(sample_clip_spec(corpus.record(vi), length, speed, rng));
  }
  return out;
}

// ------------------------------------------------------------ clip wrappers

Clip realize_clip(const Corpus& corpus, const ClipSpec& spec, const ClipConfig& clip_cfg,
                  const AugmentConfig& aug, std::uint64_t aug_seed) {
  Clip raw = corpus.decode_clip(spec);
  Rng rng(aug_seed);
  return augment(raw, clip_cfg, aug, rng);
}

RspTriplet sample_rsp_triplet(const Corpus& corpus, std::size_t video_idx,
                              const ClipConfig& clip_cfg, const std::vector<int>& speed_set,
                              const AugmentConfig& aug, Rng& rng) {
  TripletSpec spec = sample_rsp_triplet_spec(corpus.record(video_idx), clip_cfg.length, speed_set, rng);
  RspTriplet out;
  out.c_i = realize_clip(corpus, spec.i, clip_cfg, aug, rng.next_u64());
  out.c_j = realize_clip(corpus, spec.j, clip_cfg, aug, rng.next_u64());
  out.c_k = realize_clip(corpus, spec.k, clip_cfg, aug, rng.next_u64());
  return out;
}

std::pair<Clip, Clip> sample_avid_pair(const Corpus& corpus, std::size_t video_idx,
                                       const ClipConfig& clip_cfg,
                                       const std::vector<int>& speed_set, bool speed_augmentation,
                                       int fixed_speed, const AugmentConfig& aug, Rng& rng) {
  auto [sa, sb] = sample_avid_pair_spec(corpus.record(video_idx), clip_cfg.length, speed_set,
                                        speed_augmentation, fixed_speed, rng);
  Clip a = realize_clip(corpus, sa, clip_cfg, aug, rng.next_u64());
  Clip b = realize_clip(corpus, sb, clip_cfg, aug, rng.next_u64());
  return {std::move(a), std::move(b)};
}

std::vector<Clip> sample_negatives(const Corpus& corpus, const std::string& exclude_video, int k,
                                   const ClipConfig& clip_cfg, const std::vector<int>& speed_set,
                                   bool speed_augmentation, int fixed_speed, const AugmentConfig& aug,
                                   Rng& rng) {
  std::vector<ClipSpec> specs = sample_negative_specs(corpus, exclude_video, k, clip_cfg.length,
                                                      speed_set, speed_augmentation, fixed_speed, rng);
  std::vector<Clip> out(specs.size());
  std::vector<std::uint64_t> seeds(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) seeds[i] = rng.next_u64();
  parallel_for(specs.size(), env_worker_count(), [&](std::size_t i) {
    out[i] = realize_clip(corpus, specs[i], clip_cfg, aug, seeds[i]);
  });
  return out;
}

}  // namespace rsplab::data
