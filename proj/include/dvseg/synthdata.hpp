#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "dvseg/volume.hpp"

namespace dvseg {

/// Phantom: two ellipsoids with centers mirrored across the midsagittal
/// (first-axis) plane, on a flat background, plus smoothed additive noise.
/// Edges stay sharp; only the noise field is smoothed, so the label support
/// is recoverable by thresholding when the noise is off.
struct PhantomSpec {
  Eigen::Vector3i shape{64, 64, 64};
  Eigen::Vector3d left_center{20.0, 32.0, 32.0};  // voxel coordinates
  Eigen::Vector3d semi_axes{7.0, 9.0, 8.0};       // voxels
  double background_level = 0.05;
  double left_contrast = 0.9;
  double right_contrast = 0.75;
  double noise_sigma = 0.02;
  double noise_smoothing = 1.0;  // gaussian sigma (voxels) applied to noise
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  Eigen::Vector3d right_center() const {
    return {static_cast<double>(shape.x() - 1) - left_center.x(),
            left_center.y(), left_center.z()};
  }

  /// Both ellipsoids inside the volume, disjoint, left of right.
  void validate() const;
};

/// Deterministic per seed. Label 1 is exactly the left ellipsoid interior,
/// label 2 the right.
std::pair<Volume, LabelMask> generate(const PhantomSpec& spec);

struct DatasetSpec {
  int count = 16;
  PhantomSpec base;
  // Per-case jitter, uniform in +/- these amounts (mirrored centers move
  // together; semi-axes stay >= 3 voxels).
  double center_jitter = 3.0;
  double axes_jitter = 1.5;
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string id;
  PhantomSpec spec;
};

/// Writes <id>_img.nii.gz / <id>_lbl.nii.gz pairs plus manifest.json.
std::vector<ManifestEntry> generate_dataset(
    const DatasetSpec& spec, const std::filesystem::path& out_dir);

/// Reads manifest.json back (ids only are needed by most callers).
std::vector<std::string> read_manifest_ids(const std::filesystem::path& out_dir);

}  // namespace dvseg
