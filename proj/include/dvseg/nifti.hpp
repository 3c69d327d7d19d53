#pragma once

#include <filesystem>

#include "dvseg/volume.hpp"

namespace dvseg {

/// Load a single-channel 3D NIfTI-1 image (.nii or .nii.gz).
///
/// Intensities are returned unchanged (scl_slope/scl_inter applied when the
/// header requests it). The affine comes from the sform when present, the
/// qform otherwise, and falls back to diag(spacing).
/// Throws IoError (unreadable), FormatError (not NIfTI-1 / 4D multi-channel),
/// ValidationError (non-finite voxels, non-positive spacing).
Volume load_volume(const std::filesystem::path& path);

/// Load an integer label mask. Values must be integral and within
/// [0, max_label]; anything else raises ValidationError.
LabelMask load_labels(const std::filesystem::path& path, int max_label = kNumClasses - 1);

/// Write float32 NIfTI-1 (gzip-compressed when the path ends in .gz).
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Write uint8 NIfTI-1 labels with the source volume's spacing and affine.
void save_labels(const LabelMask& m, const std::filesystem::path& path);

}  // namespace dvseg
