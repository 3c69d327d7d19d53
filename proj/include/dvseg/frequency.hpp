#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>
#include <string>
#include <vector>

#include "dvseg/volume.hpp"

namespace dvseg {

/// Centered (zero-frequency-at-center) amplitude/phase split of a 3D DFT.
/// Always double precision regardless of the input scalar.
struct SpectralDecomposition {
  Grid3<double> amplitude;          // |FFT|, >= 0
  Grid3<double> phase;              // angle(FFT) in (-pi, pi]
  Eigen::Vector3i shape{0, 0, 0};
};

enum class FilterGeometry {
  kRadial,    // zero inside a sphere in normalized frequency space
  kCubic,     // zero inside a cube (max-axis coordinate)
  kIdentity,  // all-pass; exists as the identity test fixture only
};

FilterGeometry parse_filter_geometry(const std::string& name);
std::string filter_geometry_name(FilterGeometry g);

/// Binary high-pass mask in the centered layout. Frequency coordinates are
/// normalized by the Nyquist radius (half the axis length), so cutoff is a
/// fraction in [0,1). A bin is zeroed exactly when its normalized radius
/// (radial) or max-axis coordinate (cubic) is <= cutoff; cutoff 0 therefore
/// still removes the DC bin.
struct HighPassFilter {
  double cutoff = 0.0;
  FilterGeometry geometry = FilterGeometry::kRadial;
  Grid3<std::uint8_t> mask;

  double pass_fraction() const {
    return mask.size() == 0
               ? 1.0
               : mask.array().template cast<double>().sum() /
                     static_cast<double>(mask.size());
  }
};

HighPassFilter build_filter(const Eigen::Vector3i& shape, double cutoff,
                            FilterGeometry geometry = FilterGeometry::kRadial);

namespace detail {

using Cplx = std::complex<double>;

/// In-place 1D transforms along every axis. Forward is unnormalized; inverse
/// carries the full 1/N factor.
void fft3_inplace(Grid3<Cplx>& g, bool inverse);

/// Cyclic shift moving DC to the center bin (floor(n/2) per axis), and back.
Grid3<Cplx> fftshift(const Grid3<Cplx>& g, bool inverse);

template <typename Scalar>
Grid3<Cplx> forward_centered(const Grid3<Scalar>& v) {
  Grid3<Cplx> spec(v.shape());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    spec[i] = Cplx(static_cast<double>(v[i]), 0.0);
  }
  fft3_inplace(spec, /*inverse=*/false);
  return fftshift(spec, /*inverse=*/false);
}

}  // namespace detail

/// Amplitude/phase of the centered spectrum. Input must be finite.
template <typename Scalar>
SpectralDecomposition spectral_decompose(const Grid3<Scalar>& v) {
  if (!v.array().isFinite().all()) {
    throw ValidationError("spectral_decompose: input contains non-finite voxels");
  }
  const Grid3<detail::Cplx> spec = detail::forward_centered(v);
  SpectralDecomposition d;
  d.shape = v.shape();
  d.amplitude = Grid3<double>(v.shape());
  d.phase = Grid3<double>(v.shape());
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    d.amplitude[i] = std::abs(spec[i]);
    d.phase[i] = std::arg(spec[i]);
  }
  return d;
}

/// Zero the masked amplitude bins, keep the phase, and transform back.
/// The imaginary residue of the inverse transform must stay below
/// 1e-5 * max|input| and is discarded.
template <typename Scalar>
Grid3<Scalar> apply_high_pass(const Grid3<Scalar>& v,
                              const HighPassFilter& filter) {
  if (filter.mask.shape() != v.shape()) {
    throw ValidationError("apply_high_pass: filter shape " +
                          shape_string(filter.mask.shape()) +
                          " does not match volume shape " +
                          shape_string(v.shape()));
  }
  Grid3<detail::Cplx> spec = detail::forward_centered(v);
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    if (filter.mask[i] == 0) spec[i] = detail::Cplx(0.0, 0.0);
  }
  Grid3<detail::Cplx> back = detail::fftshift(spec, /*inverse=*/true);
  detail::fft3_inplace(back, /*inverse=*/true);

  const double max_abs =
      v.array().template cast<double>().abs().maxCoeff();
  double max_imag = 0.0;
  Grid3<Scalar> out(v.shape());
  for (Eigen::Index i = 0; i < back.size(); ++i) {
    max_imag = std::max(max_imag, std::abs(back[i].imag()));
    out[i] = static_cast<Scalar>(back[i].real());
  }
  if (max_imag > 1e-5 * std::max(max_abs, 1e-30)) {
    throw Error("apply_high_pass: imaginary residue " +
                std::to_string(max_imag) + " exceeds tolerance");
  }
  return out;
}

/// The spec-level operations on Volume. Spacing/affine/id carry over.
SpectralDecomposition decompose(const Volume& v);
Volume high_frequency_view(const Volume& v, const HighPassFilter& filter);

/// Voxelwise |v - vhat|.
Volume difference_map(const Volume& v, const Volume& vhat);

}  // namespace dvseg
