#include <algorithm>
#include <cmath>

#include "rsplab/dataset.hpp"

namespace rsplab::data {

namespace {

// Bilinear-samples the crop rectangle (y0, x0, ch, cw) of every frame to
// (oh, ow). Scale-1 full-frame mapping reproduces the source bitwise: the
// sample coordinate lands exactly on the source pixel with weight 1.
Clip crop_resize(const Clip& clip, double y0, double x0, double ch, double cw, int oh, int ow) {
  const int t_len = clip.t();
  const int sh = clip.h();
  const int sw = clip.w();
  Clip out;
  out.spec = clip.spec;
  out.pixels = TensorF({static_cast<std::size_t>(t_len), static_cast<std::size_t>(oh),
                        static_cast<std::size_t>(ow), 3});
  const double sy = ch / static_cast<double>(oh);
  const double sx = cw / static_cast<double>(ow);
  // Per-row/column source coordinates are shared across frames and channels.
  std::vector<int> yi0(static_cast<std::size_t>(oh)), yi1(static_cast<std::size_t>(oh));
  std::vector<float> yf(static_cast<std::size_t>(oh));
  for (int oy = 0; oy < oh; ++oy) {
    double src = y0 + (oy + 0.5) * sy - 0.5;
    src = std::clamp(src, y0, y0 + ch - 1.0);
    src = std::clamp(src, 0.0, sh - 1.0);
    const double fl = std::floor(src);
    yi0[static_cast<std::size_t>(oy)] = static_cast<int>(fl);
    yi1[static_cast<std::size_t>(oy)] = std::min(static_cast<int>(fl) + 1, sh - 1);
    yf[static_cast<std::size_t>(oy)] = static_cast<float>(src - fl);
  }
  std::vector<int> xi0(static_cast<std::size_t>(ow)), xi1(static_cast<std::size_t>(ow));
  std::vector<float> xf(static_cast<std::size_t>(ow));
  for (int ox = 0; ox < ow; ++ox) {
    double src = x0 + (ox + 0.5) * sx - 0.5;
    src = std::clamp(src, x0, x0 + cw - 1.0);
    src = std::clamp(src, 0.0, sw - 1.0);
    const double fl = std::floor(src);
    xi0[static_cast<std::size_t>(ox)] = static_cast<int>(fl);
    xi1[static_cast<std::size_t>(ox)] = std::min(static_cast<int>(fl) + 1, sw - 1);
    xf[static_cast<std::size_t>(ox)] = static_cast<float>(src - fl);
  }
  for (int t = 0; t < t_len; ++t) {
    for (int oy = 0; oy < oh; ++oy) {
      const int ya = yi0[static_cast<std::size_t>(oy)];
      const int yb = yi1[static_cast<std::size_t>(oy)];
      const float wy = yf[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < ow; ++ox) {
        const int xa = xi0[static_cast<std::size_t>(ox)];
        const int xb = xi1[static_cast<std::size_t>(ox)];
        const float wx = xf[static_cast<std::size_t>(ox)];
        for (int c = 0; c < 3; ++c) {
          const float v00 = clip.at(t, ya, xa, c);
          const float v01 = clip.at(t, ya, xb, c);
          const float v10 = clip.at(t, yb, xa, c);
          const float v11 = clip.at(t, yb, xb, c);
          out.at(t, oy, ox, c) = (1.0f - wy) * ((1.0f - wx) * v00 + wx * v01) +
                                 wy * ((1.0f - wx) * v10 + wx * v11);
        }
      }
    }
  }
  return out;
}

struct JitterParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_turns = 0.0;  // fraction of the color wheel
};

void apply_jitter(Clip& clip, const JitterParams& p) {
  const bool do_b = p.brightness != 1.0;
  const bool do_c = p.contrast != 1.0;
  const bool do_s = p.saturation != 1.0;
  const bool do_h = p.hue_turns != 0.0;
  if (!do_b && !do_c && !do_s && !do_h) return;

  float* px = clip.pixels.data();
  const std::size_t n = clip.pixels.numel() / 3;
  // Contrast blends toward the clip-wide gray mean so the affine map is the
  // same on every frame.
  double gray_mean = 0.0;
  if (do_c) {
    double gray_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gray_sum += 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
    }
    gray_mean = gray_sum / static_cast<double>(n) * p.brightness;
  }

  // Hue rotation about the gray axis (YIQ-plane rotation, rounded constants;
  // only entered for a genuinely nonzero rotation).
  const double th = 2.0 * 3.14159265358979323846 * p.hue_turns;
  const double u = std::cos(th);
  const double w = std::sin(th);
  const double m[3][3] = {
      {0.299 + 0.701 * u + 0.168 * w, 0.587 - 0.587 * u + 0.330 * w, 0.114 - 0.114 * u - 0.497 * w},
      {0.299 - 0.299 * u - 0.328 * w, 0.587 + 0.413 * u + 0.035 * w, 0.114 - 0.114 * u + 0.292 * w},
      {0.299 - 0.300 * u + 1.250 * w, 0.587 - 0.588 * u - 1.050 * w, 0.114 + 0.886 * u - 0.203 * w}};

  for (std::size_t i = 0; i < n; ++i) {
    double r = px[3 * i];
    double g = px[3 * i + 1];
    double b = px[3 * i + 2];
    if (do_b) {
      r *= p.brightness;
      g *= p.brightness;
      b *= p.brightness;
    }
    if (do_c) {
      r = (r - gray_mean) * p.contrast + gray_mean;
      g = (g - gray_mean) * p.contrast + gray_mean;
      b = (b - gray_mean) * p.contrast + gray_mean;
    }
    if (do_s) {
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      r = luma + (r - luma) * p.saturation;
      g = luma + (g - luma) * p.saturation;
      b = luma + (b - luma) * p.saturation;
    }
    if (do_h) {
      const double r2 = m[0][0] * r + m[0][1] * g + m[0][2] * b;
      const double g2 = m[1][0] * r + m[1][1] * g + m[1][2] * b;
      const double b2 = m[2][0] * r + m[2][1] * g + m[2][2] * b;
      r = r2;
      g = g2;
      b = b2;
    }
    px[3 * i] = static_cast<float>(r);
    px[3 * i + 1] = static_cast<float>(g);
    px[3 * i + 2] = static_cast<float>(b);
  }
}

void apply_gaussian_blur(Clip& clip, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    total += v;
  }
  for (auto& k : kernel) k = static_cast<float>(k / total);

  const int t_len = clip.t();
  const int h = clip.h();
  const int w = clip.w();
  Clip tmp = clip;
  // Horizontal pass (clamp-to-edge), then vertical.
  for (int t = 0; t < t_len; ++t) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          float acc = 0.0f;
          for (int i = -radius; i <= radius; ++i) {
            const int xx = std::clamp(x + i, 0, w - 1);
            acc += kernel[static_cast<std::size_t>(i + radius)] * clip.at(t, y, xx, c);
          }
          tmp.at(t, y, x, c) = acc;
        }
      }
    }
  }
  for (int t = 0; t < t_len; ++t) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          float acc = 0.0f;
          for (int i = -radius; i <= radius; ++i) {
            const int yy = std::clamp(y + i, 0, h - 1);
            acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(t, yy, x, c);
          }
          clip.at(t, y, x, c) = acc;
        }
      }
    }
  }
}

}  // namespace

Clip resize_clip(const Clip& clip, int h, int w) {
  return crop_resize(clip, 0.0, 0.0, static_cast<double>(clip.h()), static_cast<double>(clip.w()),
                     h, w);
}

Clip augment(const Clip& clip, const ClipConfig& clip_cfg, const AugmentConfig& aug, Rng& rng) {
  aug.validate();
  if (aug.is_identity()) {
    return resize_clip(clip, clip_cfg.height, clip_cfg.width);
  }

  const int sh = clip.h();
  const int sw = clip.w();
  // Random resized crop: sample an area fraction and aspect ratio, retry a
  // few times if the rectangle does not fit, fall back to a center square.
  double ch = sh;
  double cw = sw;
  double y0 = 0.0;
  double x0 = 0.0;
  bool found = false;
  const double area = static_cast<double>(sh) * static_cast<double>(sw);
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double target_area = rng.uniform(aug.crop_min_scale, 1.0) * area;
    const double log_lo = std::log(3.0 / 4.0);
    const double log_hi = std::log(4.0 / 3.0);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const double want_w = std::round(std::sqrt(target_area * ratio));
    const double want_h = std::round(std::sqrt(target_area / ratio));
    if (want_w >= 1 && want_h >= 1 && want_w <= sw && want_h <= sh) {
      cw = want_w;
      ch = want_h;
      x0 = static_cast<double>(rng.uniform_int(0, static_cast<std::int64_t>(sw - cw)));
      y0 = static_cast<double>(rng.uniform_int(0, static_cast<std::int64_t>(sh - ch)));
      found = true;
    }
  }
  if (!found) {
    const double side = std::min(sh, sw);
    ch = cw = side;
    y0 = std::floor((sh - side) / 2.0);
    x0 = std::floor((sw - side) / 2.0);
  }
  Clip out = crop_resize(clip, y0, x0, ch, cw, clip_cfg.height, clip_cfg.width);

  JitterParams jp;
  jp.brightness = rng.uniform(std::max(0.0, 1.0 - aug.brightness), 1.0 + aug.brightness);
  jp.contrast = rng.uniform(std::max(0.0, 1.0 - aug.contrast), 1.0 + aug.contrast);
  jp.saturation = rng.uniform(std::max(0.0, 1.0 - aug.saturation), 1.0 + aug.saturation);
  jp.hue_turns = rng.uniform(-aug.hue, aug.hue);
  apply_jitter(out, jp);

  if (aug.blur_prob > 0.0 && rng.bernoulli(aug.blur_prob)) {
    apply_gaussian_blur(out, rng.uniform(aug.blur_sigma_min, aug.blur_sigma_max));
  }

  for (auto& v : out.pixels.vec()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace rsplab::data
