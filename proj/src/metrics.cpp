#include "dvseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "dvseg/stats.hpp"

namespace dvseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Index count_on(const BinaryMask& m) {
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) n += (m[i] != 0);
  return n;
}

// 1D lower-envelope pass of the squared distance transform, with samples at
// physical positions i*step. f holds the incoming squared costs and receives
// the output. Entries with f = +inf contribute no parabola.
void edt_pass_1d(std::vector<double>& f, double step) {
  const int n = static_cast<int>(f.size());
  static thread_local std::vector<int> v;
  static thread_local std::vector<double> z, out;
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  out.assign(static_cast<std::size_t>(n), kInf);

  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == kInf) continue;
    const double xq = q * step;
    while (k >= 0) {
      const double xv = v[static_cast<std::size_t>(k)] * step;
      const double s = ((f[static_cast<std::size_t>(q)] + xq * xq) -
                        (f[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])] + xv * xv)) /
                       (2.0 * xq - 2.0 * xv);
      if (s > z[static_cast<std::size_t>(k)]) {
        z[static_cast<std::size_t>(k) + 1] = s;
        break;
      }
      --k;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    } else {
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k) + 1] = kInf;
    }
  }
  if (k < 0) return;  // row has no sources

  int seg = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = q * step;
    while (z[static_cast<std::size_t>(seg) + 1] < xq) ++seg;
    const double xv = v[static_cast<std::size_t>(seg)] * step;
    out[static_cast<std::size_t>(q)] =
        (xq - xv) * (xq - xv) + f[static_cast<std::size_t>(v[static_cast<std::size_t>(seg)])];
  }
  f = out;
}

}  // namespace

Grid3<double> squared_distance_transform(const Grid3<std::uint8_t>& sources,
                                         const Eigen::Vector3d& spacing) {
  const Eigen::Vector3i s = sources.shape();
  Grid3<double> d(s);
  for (Eigen::Index i = 0; i < sources.size(); ++i) {
    d[i] = sources[i] != 0 ? 0.0 : kInf;
  }

  std::vector<double> line;
  line.resize(static_cast<std::size_t>(s.x()));
  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      const Eigen::Index base = d.index(0, j, k);
      for (int i = 0; i < s.x(); ++i) line[static_cast<std::size_t>(i)] = d[base + i];
      edt_pass_1d(line, spacing.x());
      for (int i = 0; i < s.x(); ++i) d[base + i] = line[static_cast<std::size_t>(i)];
    }
  }
  line.resize(static_cast<std::size_t>(s.y()));
  for (int k = 0; k < s.z(); ++k) {
    for (int i = 0; i < s.x(); ++i) {
      for (int j = 0; j < s.y(); ++j) line[static_cast<std::size_t>(j)] = d(i, j, k);
      edt_pass_1d(line, spacing.y());
      for (int j = 0; j < s.y(); ++j) d(i, j, k) = line[static_cast<std::size_t>(j)];
    }
  }
  line.resize(static_cast<std::size_t>(s.z()));
  for (int j = 0; j < s.y(); ++j) {
    for (int i = 0; i < s.x(); ++i) {
      for (int k = 0; k < s.z(); ++k) line[static_cast<std::size_t>(k)] = d(i, j, k);
      edt_pass_1d(line, spacing.z());
      for (int k = 0; k < s.z(); ++k) d(i, j, k) = line[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

double dsc(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) {
    throw ValidationError("dsc: shape mismatch");
  }
  Eigen::Index p = 0, g = 0, both = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool bp = pred[i] != 0;
    const bool bg = gt[i] != 0;
    p += bp;
    g += bg;
    both += bp && bg;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<Eigen::Vector3i> boundary_voxels(const BinaryMask& mask) {
  const Eigen::Vector3i s = mask.shape();
  std::vector<Eigen::Vector3i> out;
  auto background = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= s.x() || j >= s.y() || k >= s.z()) {
      return true;  // volume faces count as background
    }
    return mask(i, j, k) == 0;
  };
  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      for (int i = 0; i < s.x(); ++i) {
        if (mask(i, j, k) == 0) continue;
        if (background(i - 1, j, k) || background(i + 1, j, k) ||
            background(i, j - 1, k) || background(i, j + 1, k) ||
            background(i, j, k - 1) || background(i, j, k + 1)) {
          out.emplace_back(i, j, k);
        }
      }
    }
  }
  return out;
}

SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt,
                                   const Eigen::Vector3d& spacing) {
  if (!pred.same_shape(gt)) {
    throw ValidationError("surface_distances: shape mismatch");
  }
  if (count_on(pred) == 0) {
    throw EmptyStructureError("pred", "surface_distances: empty prediction mask");
  }
  if (count_on(gt) == 0) {
    throw EmptyStructureError("gt", "surface_distances: empty ground-truth mask");
  }

  const std::vector<Eigen::Vector3i> pb = boundary_voxels(pred);
  const std::vector<Eigen::Vector3i> gb = boundary_voxels(gt);

  auto rasterize = [&](const std::vector<Eigen::Vector3i>& pts) {
    Grid3<std::uint8_t> g(pred.shape());
    for (const auto& p : pts) g(p.x(), p.y(), p.z()) = 1;
    return g;
  };
  const Grid3<double> dist_to_gt =
      squared_distance_transform(rasterize(gb), spacing);
  const Grid3<double> dist_to_pred =
      squared_distance_transform(rasterize(pb), spacing);

  SurfaceDistances d;
  d.pred_to_gt.reserve(pb.size());
  for (const auto& p : pb) {
    d.pred_to_gt.push_back(std::sqrt(dist_to_gt(p.x(), p.y(), p.z())));
  }
  d.gt_to_pred.reserve(gb.size());
  for (const auto& p : gb) {
    d.gt_to_pred.push_back(std::sqrt(dist_to_pred(p.x(), p.y(), p.z())));
  }
  return d;
}

double hd(const SurfaceDistances& d) {
  const double a = *std::max_element(d.pred_to_gt.begin(), d.pred_to_gt.end());
  const double b = *std::max_element(d.gt_to_pred.begin(), d.gt_to_pred.end());
  return std::max(a, b);
}

double hd95(const SurfaceDistances& d) {
  return std::max(percentile_of(d.pred_to_gt, 95.0),
                  percentile_of(d.gt_to_pred, 95.0));
}

double assd(const SurfaceDistances& d) {
  const double total =
      std::accumulate(d.pred_to_gt.begin(), d.pred_to_gt.end(), 0.0) +
      std::accumulate(d.gt_to_pred.begin(), d.gt_to_pred.end(), 0.0);
  return total / static_cast<double>(d.pred_to_gt.size() + d.gt_to_pred.size());
}

double rve(const BinaryMask& pred, const BinaryMask& gt,
           const Eigen::Vector3d& spacing) {
  if (!pred.same_shape(gt)) {
    throw ValidationError("rve: shape mismatch");
  }
  const double voxel = spacing.prod();
  const double vol_p = static_cast<double>(count_on(pred)) * voxel;
  const double vol_g = static_cast<double>(count_on(gt)) * voxel;
  if (vol_g == 0.0) {
    throw EmptyStructureError("gt", "rve: empty ground-truth mask");
  }
  return std::abs(vol_p - vol_g) / vol_g;
}

namespace {

BinaryMask select_label(const LabelMask& m, std::uint8_t label) {
  BinaryMask out(m.shape());
  for (Eigen::Index i = 0; i < m.labels.size(); ++i) {
    out[i] = m.labels[i] == label ? 1 : 0;
  }
  return out;
}

StructureMetrics structure_metrics(const BinaryMask& pred, const BinaryMask& gt,
                                   const Eigen::Vector3d& spacing) {
  StructureMetrics sm;
  const bool pred_empty = count_on(pred) == 0;
  const bool gt_empty = count_on(gt) == 0;
  if (pred_empty && gt_empty) {
    // Agreement on absence.
    sm.dsc = 1.0;
    sm.flagged = true;
    return sm;
  }
  if (pred_empty || gt_empty) {
    const Eigen::Vector3d extent =
        pred.shape().cast<double>().cwiseProduct(spacing);
    sm.dsc = 0.0;
    sm.rve = 1.0;
    sm.hd = sm.hd95 = sm.assd = extent.norm();  // patch-diagonal sentinel
    sm.flagged = true;
    return sm;
  }
  sm.dsc = dsc(pred, gt);
  const SurfaceDistances d = surface_distances(pred, gt, spacing);
  sm.hd = hd(d);
  sm.hd95 = hd95(d);
  sm.assd = assd(d);
  sm.rve = rve(pred, gt, spacing);
  return sm;
}

}  // namespace

CaseReport evaluate_case(const LabelMask& pred, const LabelMask& gt) {
  if (pred.shape() != gt.shape()) {
    throw ValidationError("evaluate_case: prediction shape " +
                          shape_string(pred.shape()) +
                          " does not match ground truth " +
                          shape_string(gt.shape()));
  }
  CaseReport r;
  r.case_id = gt.id;
  r.left = structure_metrics(select_label(pred, kLeftLabel),
                             select_label(gt, kLeftLabel), gt.spacing);
  r.right = structure_metrics(select_label(pred, kRightLabel),
                              select_label(gt, kRightLabel), gt.spacing);
  r.average.dsc = 0.5 * (r.left.dsc + r.right.dsc);
  r.average.hd = 0.5 * (r.left.hd + r.right.hd);
  r.average.hd95 = 0.5 * (r.left.hd95 + r.right.hd95);
  r.average.assd = 0.5 * (r.left.assd + r.right.assd);
  r.average.rve = 0.5 * (r.left.rve + r.right.rve);
  r.average.flagged = r.left.flagged || r.right.flagged;
  return r;
}

}  // namespace dvseg
