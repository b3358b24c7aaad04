#pragma once

#include <span>
#include <string>

#include "rsplab/dataset.hpp"
#include "rsplab/tensor.hpp"

namespace rsplab::viz {

// Per-position decomposition of a pair similarity score over the last
// convolutional map. Because the pooled feature is the mean over positions,
// mean(M_s) recovers s exactly (to float round-off).
struct ActivationMap {
  TensorF m;            // [H', W', T']
  std::string pair_id;  // "<clip_i>_<clip_j>"
  double s = 0.0;
};

// v = W_i^T (W_j x_j); M_s[h, w, t] = v . F_i[:, h, w, t]; s = v . mean(F_i).
// Maps are computed on pre-normalization projections so the decomposition is
// exact; the displayed s differs from the training similarity by a positive
// scale, which leaves the argmax over positions unchanged.
//   f_i: [C, H', W', T']   x_j: [C]   w_i, w_j: [E, C]
ActivationMap similarity_activation_map(const TensorF& f_i, std::span<const float> x_j,
                                        const TensorF& w_i, const TensorF& w_j);

// Transposes sample n of a model feature batch [N, C, T', H', W'] into the
// [C, H', W', T'] layout the map expects.
TensorF feature_slice(const TensorF& feature, std::size_t n);

struct OverlayResult {
  std::string png_path;
  std::string raw_path;
  // Inclusive pixel bounds of the largest 4-connected region above the
  // threshold, at frame resolution. has_rect is false when nothing exceeds
  // the threshold (e.g. quantile 1.0).
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool has_rect = false;
};

// Renders the clip's middle frame blended with the map slice covering it
// (nearest temporal assignment, bilinear spatial upsampling). The map is
// min-max normalized over the whole clip; the threshold is the given
// quantile of the normalized map, and the largest connected region strictly
// above it is outlined. An all-constant map yields a full-frame rectangle
// and a logged warning. Writes <out>/cam_<pair_id>_<task>.png and a raw
// dump (dims + s + float32 map) beside it.
OverlayResult render_heatmap_overlay(const data::Clip& clip, const ActivationMap& map,
                                     double threshold_quantile, const std::string& out_dir,
                                     const std::string& task);

// Reads back a .raw dump written by render_heatmap_overlay.
ActivationMap read_activation_map_raw(const std::string& path);

}  // namespace rsplab::viz
