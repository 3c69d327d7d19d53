#include "dvseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dvseg/stats.hpp"

namespace dvseg {

void PatchSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    const int t = target_shape[a];
    if (t < 16 || (t & (t - 1)) != 0) {
      throw ConfigError("patch target_shape components must be powers of two "
                        ">= 16, got " +
                        shape_string(target_shape));
    }
  }
  if (background_threshold < 0.0f || background_threshold > 1.0f) {
    throw ConfigError("background_threshold must lie in [0,1]");
  }
}

double percentile(Eigen::Ref<const Eigen::ArrayXf> values, double q) {
  return percentile_of(
      std::vector<float>(values.data(), values.data() + values.size()), q);
}

Volume minmax_normalize(const Volume& v, double clip_lo, double clip_hi) {
  if (!(clip_lo < clip_hi) || clip_lo < 0.0 || clip_hi > 100.0) {
    throw ValidationError("clip percentiles must satisfy 0 <= lo < hi <= 100");
  }
  Volume out = v;
  const double lo = percentile(v.data.array(), clip_lo);
  const double hi = percentile(v.data.array(), clip_hi);
  if (!(hi > lo)) {
    warn("volume " + v.id + " has constant intensity after clipping; "
         "normalizing to all zeros");
    out.data.array().setZero();
    return out;
  }
  const auto flo = static_cast<float>(lo);
  const auto fhi = static_cast<float>(hi);
  out.data.array() = (v.data.array().max(flo).min(fhi) - flo) / (fhi - flo);
  return out;
}

Grid3<float> rescale_unit(const Grid3<float>& g) {
  const float lo = g.array().minCoeff();
  const float hi = g.array().maxCoeff();
  Grid3<float> out(g.shape());
  if (!(hi > lo)) {
    warn("rescale_unit: constant field, returning zeros");
    return out;
  }
  out.array() = (g.array() - lo) / (hi - lo);
  return out;
}

namespace {

// Pick the window origin on one axis: center the whole source when padding
// is needed or when there is no foreground, otherwise center on the
// foreground box without introducing padding the source can avoid.
int place_axis(int src, int target, int lo, int hi, bool empty_box,
               bool* overflow) {
  if (target >= src) {
    return -(target - src) / 2;  // pad; source ends up centered
  }
  if (empty_box) {
    return (src - target) / 2;  // centered crop of the original
  }
  const int center = (lo + hi) / 2;
  int start = center - target / 2;
  const int extent = hi - lo + 1;
  if (extent > target) {
    *overflow = true;  // center-crop the box
    return std::clamp(start, 0, src - target);
  }
  // Keep the full box inside the window and the window inside the source.
  const int min_start = std::max(0, hi + 1 - target);
  const int max_start = std::min(lo, src - target);
  return std::clamp(start, min_start, max_start);
}

}  // namespace

CropResult crop_or_pad(const Volume& v, const LabelMask* mask,
                       const PatchSpec& spec) {
  spec.validate();
  if (mask != nullptr && mask->shape() != v.shape()) {
    throw ValidationError("crop_or_pad: mask shape " +
                          shape_string(mask->shape()) +
                          " does not match volume shape " +
                          shape_string(v.shape()));
  }

  const Eigen::Vector3i src = v.shape();
  Eigen::Vector3i lo = src;  // inclusive bbox; initialized empty
  Eigen::Vector3i hi(-1, -1, -1);
  for (int k = 0; k < src.z(); ++k) {
    for (int j = 0; j < src.y(); ++j) {
      for (int i = 0; i < src.x(); ++i) {
        if (v.data(i, j, k) > spec.background_threshold) {
          lo = lo.cwiseMin(Eigen::Vector3i(i, j, k));
          hi = hi.cwiseMax(Eigen::Vector3i(i, j, k));
        }
      }
    }
  }
  const bool empty_box = hi.x() < 0;

  PatchTransform tf;
  tf.original_shape = src;
  tf.patch_shape = spec.target_shape;
  bool overflow = false;
  for (int a = 0; a < 3; ++a) {
    tf.window_start[a] = place_axis(src[a], spec.target_shape[a], lo[a], hi[a],
                                    empty_box, &overflow);
  }
  if (overflow) {
    warn("crop_or_pad: foreground bounding box exceeds the patch on at least "
         "one axis; center-cropping (case " + v.id + ")");
  }

  CropResult result;
  result.volume.spacing = v.spacing;
  result.volume.affine = v.affine;
  result.volume.id = v.id;
  result.volume.data = Grid3<float>(spec.target_shape);
  Grid3<std::uint8_t> out_labels;
  if (mask != nullptr) {
    out_labels = Grid3<std::uint8_t>(spec.target_shape);
  }

  const Eigen::Vector3i t = spec.target_shape;
  for (int k = 0; k < t.z(); ++k) {
    const int sk = tf.window_start.z() + k;
    if (sk < 0 || sk >= src.z()) continue;
    for (int j = 0; j < t.y(); ++j) {
      const int sj = tf.window_start.y() + j;
      if (sj < 0 || sj >= src.y()) continue;
      for (int i = 0; i < t.x(); ++i) {
        const int si = tf.window_start.x() + i;
        if (si < 0 || si >= src.x()) continue;
        result.volume.data(i, j, k) = v.data(si, sj, sk);
        if (mask != nullptr) {
          out_labels(i, j, k) = mask->labels(si, sj, sk);
        }
      }
    }
  }

  if (mask != nullptr) {
    LabelMask m;
    m.labels = std::move(out_labels);
    m.spacing = mask->spacing;
    m.affine = mask->affine;
    m.id = mask->id;
    result.mask = std::move(m);
  }
  result.transform = tf;
  return result;
}

LabelMask PatchTransform::invert(const LabelMask& patch_labels) const {
  if (patch_labels.shape() != patch_shape) {
    throw ValidationError("PatchTransform::invert: patch shape mismatch");
  }
  LabelMask out;
  out.labels = Grid3<std::uint8_t>(original_shape);
  out.spacing = patch_labels.spacing;
  out.affine = patch_labels.affine;
  out.id = patch_labels.id;
  for (int k = 0; k < patch_shape.z(); ++k) {
    const int ok = window_start.z() + k;
    if (ok < 0 || ok >= original_shape.z()) continue;
    for (int j = 0; j < patch_shape.y(); ++j) {
      const int oj = window_start.y() + j;
      if (oj < 0 || oj >= original_shape.y()) continue;
      for (int i = 0; i < patch_shape.x(); ++i) {
        const int oi = window_start.x() + i;
        if (oi < 0 || oi >= original_shape.x()) continue;
        out.labels(oi, oj, ok) = patch_labels.labels(i, j, k);
      }
    }
  }
  return out;
}

OneHotMask one_hot(const LabelMask& m, int num_classes) {
  OneHotMask out(num_classes, m.shape());
  for (Eigen::Index v = 0; v < m.labels.size(); ++v) {
    const int label = m.labels[v];
    if (label >= num_classes) {
      throw ValidationError("one_hot: label " + std::to_string(label) +
                            " >= class count " + std::to_string(num_classes));
    }
    out.values()(label, v) = 1.0f;
  }
  return out;
}

LabelMask argmax_labels(const ProbabilityMap& p) {
  if (p.channels() < 1) {
    throw ValidationError("argmax_labels: no channels");
  }
  LabelMask out;
  out.labels = Grid3<std::uint8_t>(p.shape());
  for (Eigen::Index v = 0; v < p.voxels(); ++v) {
    const auto col = p.values().col(v);
    if (std::abs(col.sum() - 1.0f) > 1e-4f) {
      throw ValidationError(
          "argmax_labels: voxel probabilities do not sum to 1 (got " +
          std::to_string(col.sum()) + ")");
    }
    int best = 0;
    float best_p = col[0];
    for (int c = 1; c < p.channels(); ++c) {
      if (col[c] > best_p) {  // strict: ties keep the lowest index
        best_p = col[c];
        best = c;
      }
    }
    out.labels[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace dvseg
