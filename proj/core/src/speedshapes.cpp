#include "rsplab/speedshapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rsplab/parallel.hpp"
#include "rsplab/rng.hpp"

namespace rsplab::data {

namespace fs = std::filesystem;
using config::ConfigError;

SpeedShapesConfig SpeedShapesConfig::from_config(const config::RawConfig& cfg,
                                                 std::uint64_t default_seed) {
  SpeedShapesConfig c;
  c.num_videos = static_cast<int>(cfg.get_int("speedshapes", "num_videos", c.num_videos));
  c.num_appearance_classes = static_cast<int>(
      cfg.get_int("speedshapes", "num_appearance_classes", c.num_appearance_classes));
  c.frames_per_video =
      static_cast<int>(cfg.get_int("speedshapes", "frames_per_video", c.frames_per_video));
  c.velocity_min = cfg.get_real("speedshapes", "velocity_min", c.velocity_min);
  c.velocity_max = cfg.get_real("speedshapes", "velocity_max", c.velocity_max);
  c.frame_size = static_cast<int>(cfg.get_int("speedshapes", "frame_size", c.frame_size));
  c.seed = static_cast<std::uint64_t>(
      cfg.get_int("speedshapes", "seed", static_cast<std::int64_t>(default_seed)));
  c.validate();
  return c;
}

void SpeedShapesConfig::validate() const {
  if (num_videos < 1) throw ConfigError("[speedshapes] num_videos must be >= 1");
  if (num_appearance_classes < 1)
    throw ConfigError("[speedshapes] num_appearance_classes must be >= 1");
  if (frames_per_video < 2) throw ConfigError("[speedshapes] frames_per_video must be >= 2");
  if (velocity_min <= 0.0 || velocity_max < velocity_min)
    throw ConfigError("[speedshapes] velocity range invalid");
  if (frame_size < 32) throw ConfigError("[speedshapes] frame_size must be >= 32");
}

VideoAttribs speedshapes_video_attribs(const SpeedShapesConfig& cfg, int video_idx) {
  cfg.validate();
  if (video_idx < 0 || video_idx >= cfg.num_videos) {
    throw SampleError("speedshapes: video index out of range");
  }
  const double scale = cfg.frame_size / 64.0;
  Rng rng = derive_rng(cfg.seed, "ss_video", static_cast<std::uint64_t>(video_idx));
  VideoAttribs a;
  a.label = video_idx % cfg.num_appearance_classes;
  a.shape_kind = a.label % kSpeedShapesShapeKinds;
  a.texture_id = a.label / kSpeedShapesShapeKinds;
  a.radius = rng.uniform(9.0, 14.0) * scale;
  a.velocity = rng.uniform(cfg.velocity_min, cfg.velocity_max);
  a.direction = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  a.hue = rng.uniform(0.0, 1.0);
  a.sat = rng.uniform(0.65, 0.95);
  a.val = rng.uniform(0.75, 1.0);
  a.pattern_angle = 0.5 + 0.7 * a.texture_id + rng.uniform(-0.15, 0.15);
  a.pattern_phase = rng.uniform(0.0, 1.0);
  a.background_id = static_cast<int>(rng.uniform_int(0, kSpeedShapesBackgroundPool - 1));
  const double margin = a.radius + 3.0;
  a.x0 = rng.uniform(margin, cfg.frame_size - margin);
  a.y0 = rng.uniform(margin, cfg.frame_size - margin);
  return a;
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

double sd_box(double px, double py, double bx, double by) {
  return std::max(std::fabs(px) - bx, std::fabs(py) - by);
}

// Signed distance (negative inside) of the shape family, local coordinates.
double shape_sdf(int kind, double px, double py, double r) {
  switch (kind) {
    case 0:  // disc
      return std::sqrt(px * px + py * py) - r;
    case 1:  // square
      return sd_box(px, py, 0.85 * r, 0.85 * r);
    case 2: {  // equilateral triangle (scaled so the circumradius ~ r)
      const double s = 0.85 * r;
      const double k = std::sqrt(3.0);
      double x = std::fabs(px) - s;
      double y = py + s / k;
      if (x + k * y > 0.0) {
        const double nx = (x - k * y) / 2.0;
        const double ny = (-k * x - y) / 2.0;
        x = nx;
        y = ny;
      }
      x -= std::clamp(x, -2.0 * s, 0.0);
      const double len = std::sqrt(x * x + y * y);
      return y > 0.0 ? -len : (y < 0.0 ? len : 0.0);
    }
    case 3: {  // ring
      const double d = std::sqrt(px * px + py * py);
      return std::fabs(d - 0.78 * r) - 0.30 * r;
    }
    default:  // cross
      return std::min(sd_box(px, py, r, 0.38 * r), sd_box(px, py, 0.38 * r, r));
  }
}

// Texture value in [0, 1] at shape-local coordinates; family selects stripes
// (even texture ids) or a dot lattice (odd), with family-dependent period.
double texture_value(int texture_id, double angle, double phase, double scale, double lx,
                     double ly) {
  const double period = (6.0 + 2.0 * (texture_id % 3)) * scale;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  double ux = ca * lx + sa * ly;
  double uy = -sa * lx + ca * ly;
  if (texture_id % 2 == 0) {
    const double s = std::sin(2.0 * 3.14159265358979323846 * (ux / period + phase));
    // Crisp-but-antialiased stripes.
    return std::clamp(0.5 + s * 2.0, 0.0, 1.0);
  }
  ux += phase * period;
  uy += 0.37 * phase * period;
  const double cellx = ux / period - std::floor(ux / period + 0.5);
  const double celly = uy / period - std::floor(uy / period + 0.5);
  const double d = std::sqrt(cellx * cellx + celly * celly) * period;
  const double dot_r = 0.30 * period;
  return std::clamp(0.5 - (d - dot_r), 0.0, 1.0);
}

}  // namespace

img::Image8 render_speedshapes_background(const SpeedShapesConfig& cfg, int background_id) {
  const int n = cfg.frame_size;
  const int grid = 8;
  Rng rng = derive_rng(cfg.seed, "ss_bg", static_cast<std::uint64_t>(background_id));
  const double base = rng.uniform(0.35, 0.60);
  // Coarse per-cell colors, bilinearly upsampled: a muted cloudy texture.
  std::vector<double> cells(static_cast<std::size_t>((grid + 1) * (grid + 1) * 3));
  for (auto& c : cells) c = std::clamp(base + rng.uniform(-0.13, 0.13), 0.0, 1.0);
  const std::uint64_t px_seed = derive_seed(cfg.seed, "ss_bgpx", static_cast<std::uint64_t>(background_id));

  img::Image8 im = img::make_image(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double gy = static_cast<double>(y) / n * grid;
      const double gx = static_cast<double>(x) / n * grid;
      const int cy = static_cast<int>(gy);
      const int cx = static_cast<int>(gx);
      const double fy = gy - cy;
      const double fx = gx - cx;
      for (int c = 0; c < 3; ++c) {
        auto cell = [&](int yy, int xx) {
          return cells[static_cast<std::size_t>((yy * (grid + 1) + xx) * 3 + c)];
        };
        double v = (1 - fy) * ((1 - fx) * cell(cy, cx) + fx * cell(cy, cx + 1)) +
                   fy * ((1 - fx) * cell(cy + 1, cx) + fx * cell(cy + 1, cx + 1));
        // Fine per-pixel grain.
        const std::uint64_t h = mix64(px_seed ^ (static_cast<std::uint64_t>(y) << 24 ^
                                                 static_cast<std::uint64_t>(x) << 4 ^
                                                 static_cast<std::uint64_t>(c)));
        v += (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5) * 0.03;
        im.at(y, x, c) = static_cast<std::uint8_t>(
            std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return im;
}

std::vector<img::Image8> render_speedshapes_video(const SpeedShapesConfig& cfg, int video_idx) {
  const VideoAttribs a = speedshapes_video_attribs(cfg, video_idx);
  const int n = cfg.frame_size;
  const double scale = n / 64.0;
  const img::Image8 bg = render_speedshapes_background(cfg, a.background_id);
  const Rgb color_a = hsv_to_rgb(a.hue, a.sat, a.val);
  const Rgb color_b = hsv_to_rgb(a.hue + 0.5, a.sat, a.val * 0.82);

  const double margin = a.radius + 2.0;
  double px = a.x0;
  double py = a.y0;
  double vx = a.velocity * std::cos(a.direction);
  double vy = a.velocity * std::sin(a.direction);

  std::vector<img::Image8> frames;
  frames.reserve(static_cast<std::size_t>(cfg.frames_per_video));
  for (int t = 0; t < cfg.frames_per_video; ++t) {
    img::Image8 frame = bg;
    const int lo_y = std::max(0, static_cast<int>(std::floor(py - a.radius - 2)));
    const int hi_y = std::min(n - 1, static_cast<int>(std::ceil(py + a.radius + 2)));
    const int lo_x = std::max(0, static_cast<int>(std::floor(px - a.radius - 2)));
    const int hi_x = std::min(n - 1, static_cast<int>(std::ceil(px + a.radius + 2)));
    for (int y = lo_y; y <= hi_y; ++y) {
      for (int x = lo_x; x <= hi_x; ++x) {
        const double lx = x + 0.5 - px;
        const double ly = y + 0.5 - py;
        const double d = shape_sdf(a.shape_kind, lx, ly, a.radius);
        const double alpha = std::clamp(0.5 - d, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        const double tv = texture_value(a.texture_id, a.pattern_angle, a.pattern_phase, scale, lx, ly);
        const double r = color_b.r + (color_a.r - color_b.r) * tv;
        const double g = color_b.g + (color_a.g - color_b.g) * tv;
        const double b = color_b.b + (color_a.b - color_b.b) * tv;
        for (int c = 0; c < 3; ++c) {
          const double bgv = frame.at(y, x, c) / 255.0;
          const double fgv = c == 0 ? r : (c == 1 ? g : b);
          const double outv = bgv + (fgv - bgv) * alpha;
          frame.at(y, x, c) =
              static_cast<std::uint8_t>(std::lround(std::clamp(outv, 0.0, 1.0) * 255.0));
        }
      }
    }
    frames.push_back(std::move(frame));
    // Advance with reflective bounce so the shape stays fully visible.
    px += vx;
    py += vy;
    if (px < margin) { px = 2 * margin - px; vx = -vx; }
    if (px > n - margin) { px = 2 * (n - margin) - px; vx = -vx; }
    if (py < margin) { py = 2 * margin - py; vy = -vy; }
    if (py > n - margin) { py = 2 * (n - margin) - py; vy = -vy; }
  }
  return frames;
}

namespace {

std::vector<VideoRecord> make_records(const SpeedShapesConfig& cfg) {
  std::vector<VideoRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.num_videos));
  for (int v = 0; v < cfg.num_videos; ++v) {
    char id[16];
    std::snprintf(id, sizeof(id), "v%04d", v);
    VideoRecord r;
    r.id = id;
    r.num_frames = cfg.frames_per_video;
    r.fps = 25;
    r.label = speedshapes_video_attribs(cfg, v).label;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

std::vector<VideoRecord> generate_speedshapes(const SpeedShapesConfig& cfg,
                                              const std::string& out_dir, int workers) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw img::IoError("cannot create corpus directory '" + out_dir + "': " + ec.message());

  std::vector<VideoRecord> records = make_records(cfg);
  for (auto& r : records) r.source = (fs::path(out_dir) / r.id).string();

  parallel_for(records.size(), workers, [&](std::size_t v) {
    const VideoRecord& r = records[v];
    std::error_code dir_ec;
    fs::create_directories(r.source, dir_ec);
    if (dir_ec) throw img::IoError("cannot create '" + r.source + "': " + dir_ec.message());
    const std::vector<img::Image8> frames =
        render_speedshapes_video(cfg, static_cast<int>(v));
    for (std::size_t f = 0; f < frames.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d.png", static_cast<int>(f));
      img::write_png((fs::path(r.source) / name).string(), frames[f]);
    }
  });

  write_manifest((fs::path(out_dir) / "manifest.csv").string(), records);
  return records;
}

Corpus generate_speedshapes_in_memory(const SpeedShapesConfig& cfg, int clip_length, int max_speed,
                                      int workers) {
  cfg.validate();
  std::vector<VideoRecord> records = make_records(cfg);
  std::vector<std::vector<img::Image8>> frames(records.size());
  parallel_for(records.size(), workers, [&](std::size_t v) {
    frames[v] = render_speedshapes_video(cfg, static_cast<int>(v));
  });
  return Corpus::from_frames(std::move(records), std::move(frames), clip_length, max_speed);
}

}  // namespace rsplab::data
