#pragma once

#include <optional>
#include <utility>

#include "dvseg/volume.hpp"

namespace dvseg {

/// Linear-interpolation percentile (the numpy convention) of unsorted values.
/// q in [0,100].
double percentile(Eigen::Ref<const Eigen::ArrayXf> values, double q);

/// Clip intensities to the [clip_lo, clip_hi] percentiles, then rescale the
/// clipped range to [0,1]. A constant (or fully clipped-to-constant) volume
/// comes back all zeros with a warning instead of dividing by zero.
Volume minmax_normalize(const Volume& v, double clip_lo = 0.5,
                        double clip_hi = 99.5);

/// Rescale any finite field linearly to [0,1] (used for the high-frequency
/// view before it enters the second network). Constant input maps to zeros.
Grid3<float> rescale_unit(const Grid3<float>& g);

/// Crop/pad to spec.target_shape, centered on the bounding box of voxels
/// strictly above spec.background_threshold. Padding is zero-filled. The same
/// window is applied to the optional mask. Returns the transform needed to
/// map patch-space predictions back onto the original geometry.
struct CropResult {
  Volume volume;
  std::optional<LabelMask> mask;
  PatchTransform transform;
};
CropResult crop_or_pad(const Volume& v, const LabelMask* mask,
                       const PatchSpec& spec);

/// One-hot encode labels into K channels; throws if any label >= K.
OneHotMask one_hot(const LabelMask& m, int num_classes = kNumClasses);

/// Argmax over channels, ties broken toward the lowest class index. The
/// per-voxel channel sums must be within 1e-4 of 1.
LabelMask argmax_labels(const ProbabilityMap& p);

}  // namespace dvseg
