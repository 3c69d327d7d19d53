// Independent reference implementations used only by tests. These stay
// deliberately naive (triple-sum DFTs, all-pairs distance scans) so they
// share no code path with the library.
#pragma once

#include <complex>
#include <vector>

#include "dvseg/grid.hpp"

namespace oracle {

using dvseg::Grid3;
using Cplx = std::complex<double>;

// Direct triple-sum DFT, returned in the centered layout (DC at floor(n/2)).
inline Grid3<Cplx> dft3_centered(const Grid3<double>& f) {
  const Eigen::Vector3i s = f.shape();
  Grid3<Cplx> out(s);
  const double two_pi = 2.0 * M_PI;
  for (int w = 0; w < s.z(); ++w) {
    for (int v = 0; v < s.y(); ++v) {
      for (int u = 0; u < s.x(); ++u) {
        // centered bin (u,v,w) corresponds to frequency index (u - cx) mod nx
        const int fu = (u - s.x() / 2 + s.x()) % s.x();
        const int fv = (v - s.y() / 2 + s.y()) % s.y();
        const int fw = (w - s.z() / 2 + s.z()) % s.z();
        Cplx acc(0.0, 0.0);
        for (int k = 0; k < s.z(); ++k) {
          for (int j = 0; j < s.y(); ++j) {
            for (int i = 0; i < s.x(); ++i) {
              const double angle =
                  -two_pi * (static_cast<double>(fu) * i / s.x() +
                             static_cast<double>(fv) * j / s.y() +
                             static_cast<double>(fw) * k / s.z());
              acc += f(i, j, k) * Cplx(std::cos(angle), std::sin(angle));
            }
          }
        }
        out(u, v, w) = acc;
      }
    }
  }
  return out;
}

// Masked reconstruction: zero the centered bins where mask == 0, then invert
// by the direct sum with the 1/N factor. Returns the real part.
inline Grid3<double> masked_inverse(const Grid3<Cplx>& centered_spectrum,
                                    const Grid3<std::uint8_t>& mask) {
  const Eigen::Vector3i s = centered_spectrum.shape();
  const double n = static_cast<double>(s.prod());
  const double two_pi = 2.0 * M_PI;
  Grid3<double> out(s);
  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      for (int i = 0; i < s.x(); ++i) {
        Cplx acc(0.0, 0.0);
        for (int w = 0; w < s.z(); ++w) {
          for (int v = 0; v < s.y(); ++v) {
            for (int u = 0; u < s.x(); ++u) {
              if (mask(u, v, w) == 0) continue;
              const int fu = (u - s.x() / 2 + s.x()) % s.x();
              const int fv = (v - s.y() / 2 + s.y()) % s.y();
              const int fw = (w - s.z() / 2 + s.z()) % s.z();
              const double angle =
                  two_pi * (static_cast<double>(fu) * i / s.x() +
                            static_cast<double>(fv) * j / s.y() +
                            static_cast<double>(fw) * k / s.z());
              acc += centered_spectrum(u, v, w) *
                     Cplx(std::cos(angle), std::sin(angle));
            }
          }
        }
        out(i, j, k) = acc.real() / n;
      }
    }
  }
  return out;
}

// Boundary voxels: mask voxel with a face-adjacent background neighbor,
// array faces counting as background. Written independently of the library.
inline std::vector<Eigen::Vector3i> boundary(const Grid3<std::uint8_t>& m) {
  const Eigen::Vector3i s = m.shape();
  std::vector<Eigen::Vector3i> out;
  const int steps[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                           {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      for (int i = 0; i < s.x(); ++i) {
        if (m(i, j, k) == 0) continue;
        bool edge = false;
        for (const auto& d : steps) {
          const int ii = i + d[0], jj = j + d[1], kk = k + d[2];
          if (ii < 0 || jj < 0 || kk < 0 || ii >= s.x() || jj >= s.y() ||
              kk >= s.z() || m(ii, jj, kk) == 0) {
            edge = true;
            break;
          }
        }
        if (edge) out.emplace_back(i, j, k);
      }
    }
  }
  return out;
}

// All-pairs directed nearest distances in physical units.
inline std::vector<double> directed_distances(
    const std::vector<Eigen::Vector3i>& from,
    const std::vector<Eigen::Vector3i>& to, const Eigen::Vector3d& spacing) {
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const Eigen::Vector3d d =
          (a - b).cast<double>().cwiseProduct(spacing);
      best = std::min(best, d.norm());
    }
    out.push_back(best);
  }
  return out;
}

// Percentile with the linear-interpolation convention, re-derived here.
inline double percentile95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double rank = 0.95 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace oracle
