#include "rsplab/visualization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rsplab/config.hpp"
#include "rsplab/image.hpp"

namespace rsplab::viz {

using config::ConfigError;

ActivationMap similarity_activation_map(const TensorF& f_i, std::span<const float> x_j,
                                        const TensorF& w_i, const TensorF& w_j) {
  if (f_i.rank() != 4) throw ConfigError("activation map: F_i must be [C, H', W', T']");
  if (w_i.rank() != 2 || w_j.rank() != 2) {
    throw ConfigError("activation map: head weights must be [E, C]");
  }
  const std::size_t c_dim = f_i.dim(0);
  if (w_i.dim(1) != c_dim) throw ConfigError("activation map: W_i columns must match F_i channels");
  if (w_j.dim(1) != x_j.size()) throw ConfigError("activation map: W_j columns must match x_j");
  if (w_i.dim(0) != w_j.dim(0)) throw ConfigError("activation map: W_i and W_j embed dims differ");

  const std::size_t e_dim = w_i.dim(0);
  // proj = W_j x_j, then v = W_i^T proj.
  std::vector<double> proj(e_dim, 0.0);
  for (std::size_t e = 0; e < e_dim; ++e) {
    const float* row = w_j.data() + e * x_j.size();
    double acc = 0.0;
    for (std::size_t c = 0; c < x_j.size(); ++c) acc += static_cast<double>(row[c]) * x_j[c];
    proj[e] = acc;
  }
  std::vector<double> v(c_dim, 0.0);
  for (std::size_t e = 0; e < e_dim; ++e) {
    const float* row = w_i.data() + e * c_dim;
    for (std::size_t c = 0; c < c_dim; ++c) v[c] += static_cast<double>(row[c]) * proj[e];
  }

  const std::size_t h = f_i.dim(1), w = f_i.dim(2), t = f_i.dim(3);
  const std::size_t positions = h * w * t;
  ActivationMap out;
  out.m = TensorF({h, w, t});
  double s = 0.0;
  for (std::size_t c = 0; c < c_dim; ++c) {
    const float* plane = f_i.data() + c * positions;
    double channel_sum = 0.0;
    for (std::size_t p = 0; p < positions; ++p) {
      out.m[p] += static_cast<float>(v[c] * plane[p]);
      channel_sum += plane[p];
    }
    s += v[c] * (channel_sum / static_cast<double>(positions));  // v . mean(F_i)
  }
  out.s = s;
  return out;
}

TensorF feature_slice(const TensorF& feature, std::size_t n) {
  if (feature.rank() != 5) throw ConfigError("feature_slice: expected [N, C, T', H', W']");
  if (n >= feature.dim(0)) throw ConfigError("feature_slice: sample index out of range");
  const std::size_t c_dim = feature.dim(1), t = feature.dim(2), h = feature.dim(3),
                    w = feature.dim(4);
  TensorF out({c_dim, h, w, t});
  const float* src = feature.data() + n * c_dim * t * h * w;
  for (std::size_t c = 0; c < c_dim; ++c) {
    for (std::size_t tt = 0; tt < t; ++tt) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out[((c * h + y) * w + x) * t + tt] = src[((c * t + tt) * h + y) * w + x];
        }
      }
    }
  }
  return out;
}

namespace {

// Bilinear upsample of one [h, w] plane to (oh, ow), half-pixel centers.
std::vector<float> upsample_plane(const float* plane, int h, int w, int oh, int ow) {
  std::vector<float> out(static_cast<std::size_t>(oh) * ow);
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double top = plane[y0 * w + x0] * (1.0 - wx) + plane[y0 * w + x1] * wx;
      const double bot = plane[y1 * w + x0] * (1.0 - wx) + plane[y1 * w + x1] * wx;
      out[static_cast<std::size_t>(y) * ow + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

double quantile(std::vector<float> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

// Classic jet approximation on [0, 1].
void jet(float u, float rgb[3]) {
  rgb[0] = std::clamp(1.5f - std::fabs(4.0f * u - 3.0f), 0.0f, 1.0f);
  rgb[1] = std::clamp(1.5f - std::fabs(4.0f * u - 2.0f), 0.0f, 1.0f);
  rgb[2] = std::clamp(1.5f - std::fabs(4.0f * u - 1.0f), 0.0f, 1.0f);
}

struct Rect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  long area = 0;
};

// Bounding box of the largest 4-connected true region.
Rect largest_region(const std::vector<char>& mask, int h, int w) {
  std::vector<char> seen(mask.size(), 0);
  Rect best;
  std::vector<int> stack;
  for (int start = 0; start < h * w; ++start) {
    if (!mask[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    Rect r{start % w, start / w, start % w, start / w, 0};
    stack.push_back(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int y = p / w, x = p % w;
      ++r.area;
      r.x0 = std::min(r.x0, x);
      r.x1 = std::max(r.x1, x);
      r.y0 = std::min(r.y0, y);
      r.y1 = std::max(r.y1, y);
      const int neighbors[4] = {p - w, p + w, p - 1, p + 1};
      const bool ok[4] = {y > 0, y < h - 1, x > 0, x < w - 1};
      for (int k = 0; k < 4; ++k) {
        if (ok[k] && mask[static_cast<std::size_t>(neighbors[k])] &&
            !seen[static_cast<std::size_t>(neighbors[k])]) {
          seen[static_cast<std::size_t>(neighbors[k])] = 1;
          stack.push_back(neighbors[k]);
        }
      }
    }
    if (r.area > best.area) best = r;
  }
  return best;
}

void draw_rect(img::Image8& im, int x0, int y0, int x1, int y1) {
  for (int x = x0; x <= x1; ++x) {
    for (int c = 0; c < 3; ++c) {
      im.at(y0, x, c) = c == 1 ? 255 : 0;
      im.at(y1, x, c) = c == 1 ? 255 : 0;
    }
  }
  for (int y = y0; y <= y1; ++y) {
    for (int c = 0; c < 3; ++c) {
      im.at(y, x0, c) = c == 1 ? 255 : 0;
      im.at(y, x1, c) = c == 1 ? 255 : 0;
    }
  }
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr char kRawMagic[8] = {'R', 'S', 'P', 'L', 'C', 'A', 'M', '1'};

}  // namespace

OverlayResult render_heatmap_overlay(const data::Clip& clip, const ActivationMap& map,
                                     double threshold_quantile, const std::string& out_dir,
                                     const std::string& task) {
  if (map.m.rank() != 3) throw ConfigError("render: map must be [H', W', T']");
  if (threshold_quantile < 0.0 || threshold_quantile > 1.0) {
    throw ConfigError("render: threshold quantile must lie in [0, 1]");
  }
  if (clip.t() < 1) throw ConfigError("render: empty clip");
  const int mh = static_cast<int>(map.m.dim(0));
  const int mw = static_cast<int>(map.m.dim(1));
  const int mt = static_cast<int>(map.m.dim(2));

  // Min-max normalize over the whole clip's map.
  const auto [mn_it, mx_it] = std::minmax_element(map.m.vec().begin(), map.m.vec().end());
  const float mn = *mn_it, mx = *mx_it;
  const bool constant = !(mx > mn);
  if (constant) {
    std::fprintf(stderr, "warning: activation map for pair %s is constant; full-frame region\n",
                 map.pair_id.c_str());
  }
  std::vector<float> norm(map.m.numel());
  for (std::size_t i = 0; i < norm.size(); ++i) {
    norm[i] = constant ? 1.0f : (map.m[i] - mn) / (mx - mn);
  }

  // Middle frame and its map slice (nearest temporal assignment).
  const int mid = clip.t() / 2;
  const int slice = std::min(mt - 1, mid * mt / clip.t());
  std::vector<float> plane(static_cast<std::size_t>(mh) * mw);
  for (int y = 0; y < mh; ++y) {
    for (int x = 0; x < mw; ++x) {
      plane[static_cast<std::size_t>(y) * mw + x] =
          norm[(static_cast<std::size_t>(y) * mw + x) * mt + slice];
    }
  }
  const int fh = clip.h(), fw = clip.w();
  std::vector<float> up = upsample_plane(plane.data(), mh, mw, fh, fw);

  const double threshold = quantile(norm, threshold_quantile);
  std::vector<char> mask(up.size());
  bool any = false;
  for (std::size_t i = 0; i < up.size(); ++i) {
    mask[i] = up[i] > threshold;
    any = any || mask[i];
  }

  img::Image8 overlay = img::make_image(fh, fw);
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      float rgb[3];
      jet(up[static_cast<std::size_t>(y) * fw + x], rgb);
      for (int c = 0; c < 3; ++c) {
        const float blended = 0.5f * clip.at(mid, y, x, c) + 0.5f * rgb[c];
        overlay.at(y, x, c) =
            static_cast<std::uint8_t>(std::lround(std::clamp(blended, 0.0f, 1.0f) * 255.0f));
      }
    }
  }

  OverlayResult res;
  if (constant) {
    res.has_rect = true;
    res.x0 = 0;
    res.y0 = 0;
    res.x1 = fw - 1;
    res.y1 = fh - 1;
  } else if (any) {
    const Rect r = largest_region(mask, fh, fw);
    res.has_rect = true;
    res.x0 = r.x0;
    res.y0 = r.y0;
    res.x1 = r.x1;
    res.y1 = r.y1;
  }
  if (res.has_rect) draw_rect(overlay, res.x0, res.y0, res.x1, res.y1);

  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/cam_" + map.pair_id + "_" + task;
  res.png_path = base + ".png";
  res.raw_path = base + ".raw";
  img::write_png(res.png_path, overlay);

  std::ofstream raw(res.raw_path, std::ios::binary);
  if (!raw) throw img::IoError("cannot write " + res.raw_path);
  raw.write(kRawMagic, sizeof(kRawMagic));
  write_pod(raw, static_cast<std::int32_t>(mh));
  write_pod(raw, static_cast<std::int32_t>(mw));
  write_pod(raw, static_cast<std::int32_t>(mt));
  write_pod(raw, map.s);
  raw.write(reinterpret_cast<const char*>(map.m.data()),
            static_cast<std::streamsize>(map.m.numel() * sizeof(float)));
  if (!raw) throw img::IoError("failed writing " + res.raw_path);
  return res;
}

ActivationMap read_activation_map_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw img::IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kRawMagic, sizeof(magic)) != 0) {
    throw img::IoError(path + " is not an activation map dump");
  }
  const auto h = read_pod<std::int32_t>(in);
  const auto w = read_pod<std::int32_t>(in);
  const auto t = read_pod<std::int32_t>(in);
  if (!in || h < 1 || w < 1 || t < 1) throw img::IoError(path + " has a corrupt header");
  ActivationMap m;
  m.s = read_pod<double>(in);
  m.m = TensorF({static_cast<std::size_t>(h), static_cast<std::size_t>(w),
                 static_cast<std::size_t>(t)});
  in.read(reinterpret_cast<char*>(m.m.data()),
          static_cast<std::streamsize>(m.m.numel() * sizeof(float)));
  if (!in) throw img::IoError(path + " is truncated");
  return m;
}

}  // namespace rsplab::viz
