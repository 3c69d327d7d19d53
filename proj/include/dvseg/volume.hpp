#pragma once

#include <string>

#include "dvseg/grid.hpp"

namespace dvseg {

// Class labels used throughout. 0 = background, 1 = left structure,
// 2 = right structure. The left/right assignment is a documented convention
// and can be overridden through the label_map config key.
inline constexpr int kNumClasses = 3;
inline constexpr std::uint8_t kBackgroundLabel = 0;
inline constexpr std::uint8_t kLeftLabel = 1;
inline constexpr std::uint8_t kRightLabel = 2;

/// 3D scalar image with voxel spacing (mm) and voxel-to-world affine.
struct Volume {
  Grid3<float> data;
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  Eigen::Matrix4d affine{Eigen::Matrix4d::Identity()};
  std::string id;

  const Eigen::Vector3i& shape() const { return data.shape(); }
};

/// Integer-labeled segmentation mask paired with a Volume.
struct LabelMask {
  Grid3<std::uint8_t> labels;
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  Eigen::Matrix4d affine{Eigen::Matrix4d::Identity()};
  std::string id;

  const Eigen::Vector3i& shape() const { return labels.shape(); }
};

/// K-channel one-hot encoding of a LabelMask; every voxel column sums to 1.
using OneHotMask = ChannelGrid<float>;

/// Per-voxel class probabilities; every voxel column is a simplex.
using ProbabilityMap = ChannelGrid<float>;

/// Per-voxel critic confidence in [0,1].
using ConfidenceMap = Grid3<float>;

/// Fixed-size patch contract for the networks.
struct PatchSpec {
  Eigen::Vector3i target_shape{128, 128, 128};
  // Applied to normalized intensities; voxels strictly above it count as
  // foreground when locating the crop window.
  float background_threshold = 0.0f;

  void validate() const;
};

/// Geometry bookkeeping for crop_or_pad so predictions can be mapped back to
/// the original volume. window_start may be negative (padding on that side).
struct PatchTransform {
  Eigen::Vector3i original_shape{0, 0, 0};
  Eigen::Vector3i window_start{0, 0, 0};
  Eigen::Vector3i patch_shape{0, 0, 0};

  /// Place patch-space labels back into the original geometry; voxels outside
  /// the window become background.
  LabelMask invert(const LabelMask& patch_labels) const;
};

}  // namespace dvseg
