#include "dvseg/frequency.hpp"

namespace dvseg {

FilterGeometry parse_filter_geometry(const std::string& name) {
  if (name == "radial") return FilterGeometry::kRadial;
  if (name == "cubic") return FilterGeometry::kCubic;
  if (name == "identity") return FilterGeometry::kIdentity;
  throw ConfigError("unknown filter geometry '" + name +
                    "' (expected radial, cubic, or identity)");
}

std::string filter_geometry_name(FilterGeometry g) {
  switch (g) {
    case FilterGeometry::kRadial: return "radial";
    case FilterGeometry::kCubic: return "cubic";
    case FilterGeometry::kIdentity: return "identity";
  }
  return "?";
}

HighPassFilter build_filter(const Eigen::Vector3i& shape, double cutoff,
                            FilterGeometry geometry) {
  if (cutoff < 0.0 || cutoff >= 1.0) {
    throw ValidationError("filter cutoff must lie in [0,1), got " +
                          std::to_string(cutoff));
  }
  if (shape.minCoeff() < 1) {
    throw ValidationError("filter shape must be positive");
  }
  HighPassFilter f;
  f.cutoff = cutoff;
  f.geometry = geometry;
  f.mask = Grid3<std::uint8_t>(shape);
  if (geometry == FilterGeometry::kIdentity) {
    f.mask.array().setConstant(1);
    return f;
  }
  // Normalized centered coordinate per axis: (index - floor(n/2)) / (n/2).
  for (int k = 0; k < shape.z(); ++k) {
    const double fz = (k - shape.z() / 2) / (shape.z() / 2.0);
    for (int j = 0; j < shape.y(); ++j) {
      const double fy = (j - shape.y() / 2) / (shape.y() / 2.0);
      for (int i = 0; i < shape.x(); ++i) {
        const double fx = (i - shape.x() / 2) / (shape.x() / 2.0);
        double coord;
        if (geometry == FilterGeometry::kRadial) {
          coord = std::sqrt(fx * fx + fy * fy + fz * fz);
        } else {
          coord = std::max({std::abs(fx), std::abs(fy), std::abs(fz)});
        }
        f.mask(i, j, k) = coord <= cutoff ? 0 : 1;
      }
    }
  }
  return f;
}

namespace detail {

void fft3_inplace(Grid3<Cplx>& g, bool inverse) {
  const Eigen::Vector3i s = g.shape();
  Eigen::FFT<double> fft;
  std::vector<Cplx> line, spectrum;

  // Axis 0 lines are contiguous; axes 1 and 2 are gathered through a buffer.
  line.resize(static_cast<std::size_t>(s.x()));
  spectrum.resize(line.size());
  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      const Eigen::Index base = g.index(0, j, k);
      for (int i = 0; i < s.x(); ++i) line[static_cast<std::size_t>(i)] = g[base + i];
      if (inverse) {
        fft.inv(spectrum, line);
      } else {
        fft.fwd(spectrum, line);
      }
      for (int i = 0; i < s.x(); ++i) g[base + i] = spectrum[static_cast<std::size_t>(i)];
    }
  }

  line.resize(static_cast<std::size_t>(s.y()));
  spectrum.resize(line.size());
  for (int k = 0; k < s.z(); ++k) {
    for (int i = 0; i < s.x(); ++i) {
      for (int j = 0; j < s.y(); ++j) line[static_cast<std::size_t>(j)] = g(i, j, k);
      if (inverse) {
        fft.inv(spectrum, line);
      } else {
        fft.fwd(spectrum, line);
      }
      for (int j = 0; j < s.y(); ++j) g(i, j, k) = spectrum[static_cast<std::size_t>(j)];
    }
  }

  line.resize(static_cast<std::size_t>(s.z()));
  spectrum.resize(line.size());
  for (int j = 0; j < s.y(); ++j) {
    for (int i = 0; i < s.x(); ++i) {
      for (int k = 0; k < s.z(); ++k) line[static_cast<std::size_t>(k)] = g(i, j, k);
      if (inverse) {
        fft.inv(spectrum, line);
      } else {
        fft.fwd(spectrum, line);
      }
      for (int k = 0; k < s.z(); ++k) g(i, j, k) = spectrum[static_cast<std::size_t>(k)];
    }
  }
}

Grid3<Cplx> fftshift(const Grid3<Cplx>& g, bool inverse) {
  const Eigen::Vector3i s = g.shape();
  Eigen::Vector3i shift(s.x() / 2, s.y() / 2, s.z() / 2);
  if (inverse) {
    shift = s - shift;  // undoes the forward shift for odd sizes too
  }
  Grid3<Cplx> out(s);
  for (int k = 0; k < s.z(); ++k) {
    const int dk = (k + shift.z()) % s.z();
    for (int j = 0; j < s.y(); ++j) {
      const int dj = (j + shift.y()) % s.y();
      for (int i = 0; i < s.x(); ++i) {
        const int di = (i + shift.x()) % s.x();
        out(di, dj, dk) = g(i, j, k);
      }
    }
  }
  return out;
}

}  // namespace detail

SpectralDecomposition decompose(const Volume& v) {
  return spectral_decompose(v.data);
}

Volume high_frequency_view(const Volume& v, const HighPassFilter& filter) {
  Volume out = v;
  out.data = apply_high_pass(v.data, filter);
  return out;
}

Volume difference_map(const Volume& v, const Volume& vhat) {
  if (vhat.shape() != v.shape()) {
    throw ValidationError("difference_map: shape mismatch");
  }
  Volume out = v;
  out.data.array() = (v.data.array() - vhat.data.array()).abs();
  return out;
}

}  // namespace dvseg
