#pragma once

#include <vector>

#include "dvseg/volume.hpp"

namespace dvseg {

/// Conventions (these differ across toolkits, so they are fixed here):
///  - boundary voxels: mask voxels with at least one face-adjacent
///    (6-connectivity) background neighbor; the volume faces count as
///    background;
///  - distances: Euclidean between voxel centers in physical mm
///    (index deltas scaled by spacing);
///  - HD95: max of the two directed 95th percentiles, linear interpolation;
///  - RVE: | |P| - |G| | / |G| on physical volumes;
///  - a structure missing from the prediction scores dsc 0, rve 1, and the
///    patch diagonal (mm) for all distance metrics, and is flagged.
struct StructureMetrics {
  double dsc = 0.0;
  double hd = 0.0;
  double hd95 = 0.0;
  double assd = 0.0;
  double rve = 0.0;
  bool flagged = false;  // empty-structure sentinel applied
};

struct CaseReport {
  std::string case_id;
  StructureMetrics left;
  StructureMetrics right;
  StructureMetrics average;  // arithmetic mean of left/right, per metric
};

using BinaryMask = Grid3<std::uint8_t>;

/// 2|P∩G| / (|P|+|G|); defined as 1.0 when both masks are empty.
double dsc(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary voxels of a mask under the 6-connectivity rule above.
std::vector<Eigen::Vector3i> boundary_voxels(const BinaryMask& mask);

struct SurfaceDistances {
  std::vector<double> pred_to_gt;  // mm, one per pred-boundary voxel
  std::vector<double> gt_to_pred;
};

/// Directed nearest-boundary distances both ways. Throws EmptyStructureError
/// (carrying "pred" or "gt") if either mask has no voxels.
SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt,
                                   const Eigen::Vector3d& spacing);

double hd(const SurfaceDistances& d);
double hd95(const SurfaceDistances& d);
double assd(const SurfaceDistances& d);

/// Relative volume error against ground truth. Throws EmptyStructureError if
/// the ground-truth mask is empty.
double rve(const BinaryMask& pred, const BinaryMask& gt,
           const Eigen::Vector3d& spacing);

/// Exact squared Euclidean distance transform of `sources` (true = source)
/// with per-axis physical spacing. Non-reachable voxels (no sources at all)
/// come back as +inf.
Grid3<double> squared_distance_transform(const Grid3<std::uint8_t>& sources,
                                         const Eigen::Vector3d& spacing);

/// Per-structure metrics for labels 1 (left) and 2 (right), plus their mean.
CaseReport evaluate_case(const LabelMask& pred, const LabelMask& gt);

}  // namespace dvseg
