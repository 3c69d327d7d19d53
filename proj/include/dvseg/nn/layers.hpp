#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "dvseg/grid.hpp"

namespace dvseg::nn {

/// View over one parameter tensor and its gradient accumulator. Networks
/// expose their state as an ordered list of these so optimizers and
/// checkpoints never need to know the layer structure.
template <typename Scalar>
struct ParamBlock {
  Scalar* value = nullptr;
  Scalar* grad = nullptr;
  Eigen::Index size = 0;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline Eigen::Vector3i conv_output_shape(const Eigen::Vector3i& in, int kernel,
                                         int stride, int pad) {
  Eigen::Vector3i out;
  for (int a = 0; a < 3; ++a) {
    const int numer = in[a] + 2 * pad - kernel;
    if (numer < 0 || numer % stride != 0) {
      throw ValidationError("conv: input extent " + std::to_string(in[a]) +
                            " incompatible with kernel " +
                            std::to_string(kernel) + " stride " +
                            std::to_string(stride) + " pad " +
                            std::to_string(pad));
    }
    out[a] = numer / stride + 1;
  }
  return out;
}

/// Dense 3D convolution, implemented as blocked im2col + GEMM. The input is
/// cached by value so backward can rebuild patch blocks instead of holding
/// the full patch matrix in memory.
template <typename Scalar>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(int in_channels, int out_channels, int kernel, int stride, int pad)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        kernel_(kernel),
        stride_(stride),
        pad_(pad),
        weight_(Matrix<Scalar>::Zero(out_channels,
                                     static_cast<Eigen::Index>(in_channels) *
                                         kernel * kernel * kernel)),
        bias_(Vector<Scalar>::Zero(out_channels)),
        weight_grad_(Matrix<Scalar>::Zero(weight_.rows(), weight_.cols())),
        bias_grad_(Vector<Scalar>::Zero(out_channels)) {}

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

  void init_he(std::mt19937_64& rng) {
    // fan-in per output element; transposed placement is handled by the
    // dedicated layer below.
    const double fan_in =
        static_cast<double>(in_channels_) * kernel_ * kernel_ * kernel_;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (Eigen::Index i = 0; i < weight_.size(); ++i) {
      weight_.data()[i] = static_cast<Scalar>(dist(rng));
    }
    bias_.setZero();
  }

  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    if (x.channels() != in_channels_) {
      throw ValidationError("conv: expected " + std::to_string(in_channels_) +
                            " channels, got " + std::to_string(x.channels()));
    }
    input_ = x;
    out_shape_ = conv_output_shape(x.shape(), kernel_, stride_, pad_);
    ChannelGrid<Scalar> y(out_channels_, out_shape_);
    const Eigen::Index total = y.voxels();
    Matrix<Scalar> patches(weight_.cols(), std::min<Eigen::Index>(kBlock, total));
    for (Eigen::Index start = 0; start < total; start += kBlock) {
      const Eigen::Index count = std::min<Eigen::Index>(kBlock, total - start);
      fill_patches(x, start, count, patches);
      y.values().middleCols(start, count).noalias() =
          weight_ * patches.leftCols(count);
      y.values().middleCols(start, count).colwise() += bias_;
    }
    return y;
  }

  /// Accumulates weight/bias gradients and returns dL/dinput.
  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dy) {
    ChannelGrid<Scalar> dx(in_channels_, input_.shape());
    const Eigen::Index total = dy.voxels();
    Matrix<Scalar> patches(weight_.cols(), std::min<Eigen::Index>(kBlock, total));
    Matrix<Scalar> dpatches(weight_.cols(), std::min<Eigen::Index>(kBlock, total));
    bias_grad_ += dy.values().rowwise().sum();
    for (Eigen::Index start = 0; start < total; start += kBlock) {
      const Eigen::Index count = std::min<Eigen::Index>(kBlock, total - start);
      fill_patches(input_, start, count, patches);
      weight_grad_.noalias() +=
          dy.values().middleCols(start, count) * patches.leftCols(count).transpose();
      dpatches.leftCols(count).noalias() =
          weight_.transpose() * dy.values().middleCols(start, count);
      scatter_patches(dpatches, start, count, dx);
    }
    return dx;
  }

  void clear_cache() { input_ = ChannelGrid<Scalar>(); }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(ParamBlock<Scalar>{weight_.data(), weight_grad_.data(), weight_.size()});
    fn(ParamBlock<Scalar>{bias_.data(), bias_grad_.data(), bias_.size()});
  }

  static Eigen::Index parameter_count(int in_channels, int out_channels,
                                      int kernel) {
    return static_cast<Eigen::Index>(out_channels) * in_channels * kernel *
               kernel * kernel +
           out_channels;
  }

 private:
  static constexpr Eigen::Index kBlock = 4096;

  void fill_patches(const ChannelGrid<Scalar>& x, Eigen::Index start,
                    Eigen::Index count, Matrix<Scalar>& patches) const {
    const Eigen::Vector3i in = x.shape();
    const Eigen::Vector3i out = out_shape_;
    for (Eigen::Index c = 0; c < count; ++c) {
      const Eigen::Index v = start + c;
      const int ox = static_cast<int>(v % out.x());
      const int oy = static_cast<int>((v / out.x()) % out.y());
      const int oz = static_cast<int>(v / (static_cast<Eigen::Index>(out.x()) * out.y()));
      Eigen::Index row = 0;
      for (int dz = 0; dz < kernel_; ++dz) {
        const int sz = oz * stride_ - pad_ + dz;
        for (int dyk = 0; dyk < kernel_; ++dyk) {
          const int sy = oy * stride_ - pad_ + dyk;
          for (int dxk = 0; dxk < kernel_; ++dxk, row += in_channels_) {
            const int sx = ox * stride_ - pad_ + dxk;
            if (sx < 0 || sy < 0 || sz < 0 || sx >= in.x() || sy >= in.y() ||
                sz >= in.z()) {
              patches.col(c).segment(row, in_channels_).setZero();
            } else {
              patches.col(c).segment(row, in_channels_) =
                  x.values().col(x.voxel_index(sx, sy, sz));
            }
          }
        }
      }
    }
  }

  void scatter_patches(const Matrix<Scalar>& dpatches, Eigen::Index start,
                       Eigen::Index count, ChannelGrid<Scalar>& dx) const {
    const Eigen::Vector3i in = dx.shape();
    const Eigen::Vector3i out = out_shape_;
    for (Eigen::Index c = 0; c < count; ++c) {
      const Eigen::Index v = start + c;
      const int ox = static_cast<int>(v % out.x());
      const int oy = static_cast<int>((v / out.x()) % out.y());
      const int oz = static_cast<int>(v / (static_cast<Eigen::Index>(out.x()) * out.y()));
      Eigen::Index row = 0;
      for (int dz = 0; dz < kernel_; ++dz) {
        const int sz = oz * stride_ - pad_ + dz;
        for (int dyk = 0; dyk < kernel_; ++dyk) {
          const int sy = oy * stride_ - pad_ + dyk;
          for (int dxk = 0; dxk < kernel_; ++dxk, row += in_channels_) {
            const int sx = ox * stride_ - pad_ + dxk;
            if (sx < 0 || sy < 0 || sz < 0 || sx >= in.x() || sy >= in.y() ||
                sz >= in.z()) {
              continue;
            }
            dx.values().col(dx.voxel_index(sx, sy, sz)) +=
                dpatches.col(c).segment(row, in_channels_);
          }
        }
      }
    }
  }

  int in_channels_ = 0;
  int out_channels_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  int pad_ = 0;
  Matrix<Scalar> weight_;
  Vector<Scalar> bias_;
  Matrix<Scalar> weight_grad_;
  Vector<Scalar> bias_grad_;
  ChannelGrid<Scalar> input_;
  Eigen::Vector3i out_shape_{0, 0, 0};
};

/// 2x up-convolution (kernel 2, stride 2): every input voxel emits one 2x2x2
/// output block, so placement is a pure reshape on both sides of the GEMM.
template <typename Scalar>
class TransposedConv3d {
 public:
  TransposedConv3d() = default;
  TransposedConv3d(int in_channels, int out_channels)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        weight_(Matrix<Scalar>::Zero(static_cast<Eigen::Index>(out_channels) * 8,
                                     in_channels)),
        bias_(Vector<Scalar>::Zero(out_channels)),
        weight_grad_(Matrix<Scalar>::Zero(weight_.rows(), weight_.cols())),
        bias_grad_(Vector<Scalar>::Zero(out_channels)) {}

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

  void init_he(std::mt19937_64& rng) {
    // each output voxel receives exactly in_channels contributions
    std::normal_distribution<double> dist(
        0.0, std::sqrt(2.0 / static_cast<double>(in_channels_)));
    for (Eigen::Index i = 0; i < weight_.size(); ++i) {
      weight_.data()[i] = static_cast<Scalar>(dist(rng));
    }
    bias_.setZero();
  }

  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    if (x.channels() != in_channels_) {
      throw ValidationError("tconv: channel mismatch");
    }
    in_shape_ = x.shape();
    const Eigen::Vector3i out = in_shape_ * 2;
    // columns: (out_channels * 8) taps per input voxel
    const Matrix<Scalar> taps = weight_ * x.values();
    ChannelGrid<Scalar> y(out_channels_, out);
    for (Eigen::Index v = 0; v < x.voxels(); ++v) {
      const int ix = static_cast<int>(v % in_shape_.x());
      const int iy = static_cast<int>((v / in_shape_.x()) % in_shape_.y());
      const int iz = static_cast<int>(v / (static_cast<Eigen::Index>(in_shape_.x()) * in_shape_.y()));
      Eigen::Index row = 0;
      for (int dz = 0; dz < 2; ++dz) {
        for (int dyk = 0; dyk < 2; ++dyk) {
          for (int dxk = 0; dxk < 2; ++dxk, row += out_channels_) {
            y.values().col(y.voxel_index(2 * ix + dxk, 2 * iy + dyk,
                                         2 * iz + dz)) =
                taps.col(v).segment(row, out_channels_) + bias_;
          }
        }
      }
    }
    input_ = x;
    return y;
  }

  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dy) {
    Matrix<Scalar> dtaps(weight_.rows(), input_.voxels());
    for (Eigen::Index v = 0; v < input_.voxels(); ++v) {
      const int ix = static_cast<int>(v % in_shape_.x());
      const int iy = static_cast<int>((v / in_shape_.x()) % in_shape_.y());
      const int iz = static_cast<int>(v / (static_cast<Eigen::Index>(in_shape_.x()) * in_shape_.y()));
      Eigen::Index row = 0;
      for (int dz = 0; dz < 2; ++dz) {
        for (int dyk = 0; dyk < 2; ++dyk) {
          for (int dxk = 0; dxk < 2; ++dxk, row += out_channels_) {
            const auto col = dy.values().col(dy.voxel_index(
                2 * ix + dxk, 2 * iy + dyk, 2 * iz + dz));
            dtaps.col(v).segment(row, out_channels_) = col;
            bias_grad_ += col;
          }
        }
      }
    }
    weight_grad_.noalias() += dtaps * input_.values().transpose();
    ChannelGrid<Scalar> dx(in_channels_, in_shape_);
    dx.values().noalias() = weight_.transpose() * dtaps;
    return dx;
  }

  void clear_cache() { input_ = ChannelGrid<Scalar>(); }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(ParamBlock<Scalar>{weight_.data(), weight_grad_.data(), weight_.size()});
    fn(ParamBlock<Scalar>{bias_.data(), bias_grad_.data(), bias_.size()});
  }

  static Eigen::Index parameter_count(int in_channels, int out_channels) {
    return static_cast<Eigen::Index>(out_channels) * 8 * in_channels +
           out_channels;
  }

 private:
  int in_channels_ = 0;
  int out_channels_ = 0;
  Matrix<Scalar> weight_;
  Vector<Scalar> bias_;
  Matrix<Scalar> weight_grad_;
  Vector<Scalar> bias_grad_;
  ChannelGrid<Scalar> input_;
  Eigen::Vector3i in_shape_{0, 0, 0};
};

/// Per-channel PReLU.
template <typename Scalar>
class PReLU {
 public:
  PReLU() = default;
  explicit PReLU(int channels)
      : slope_(Vector<Scalar>::Constant(channels, Scalar(0.25))),
        slope_grad_(Vector<Scalar>::Zero(channels)) {}

  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    input_ = x;
    ChannelGrid<Scalar> y = x;
    for (Eigen::Index v = 0; v < y.voxels(); ++v) {
      for (int c = 0; c < y.channels(); ++c) {
        const Scalar z = y.values()(c, v);
        if (z < Scalar(0)) y.values()(c, v) = slope_[c] * z;
      }
    }
    return y;
  }

  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dy) {
    ChannelGrid<Scalar> dx = dy;
    for (Eigen::Index v = 0; v < dx.voxels(); ++v) {
      for (int c = 0; c < dx.channels(); ++c) {
        const Scalar z = input_.values()(c, v);
        if (z < Scalar(0)) {
          slope_grad_[c] += dy.values()(c, v) * z;
          dx.values()(c, v) *= slope_[c];
        }
      }
    }
    return dx;
  }

  void clear_cache() { input_ = ChannelGrid<Scalar>(); }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn(ParamBlock<Scalar>{slope_.data(), slope_grad_.data(), slope_.size()});
  }

 private:
  Vector<Scalar> slope_;
  Vector<Scalar> slope_grad_;
  ChannelGrid<Scalar> input_;
};

/// Channel softmax per voxel.
template <typename Scalar>
ChannelGrid<Scalar> softmax(const ChannelGrid<Scalar>& logits) {
  ChannelGrid<Scalar> y = logits;
  for (Eigen::Index v = 0; v < y.voxels(); ++v) {
    auto col = y.values().col(v);
    col.array() -= col.maxCoeff();
    col.array() = col.array().exp();
    col /= col.sum();
  }
  return y;
}

/// dL/dlogits from dL/dprobs, given the softmax output.
template <typename Scalar>
ChannelGrid<Scalar> softmax_backward(const ChannelGrid<Scalar>& probs,
                                     const ChannelGrid<Scalar>& dprobs) {
  ChannelGrid<Scalar> dz = dprobs;
  for (Eigen::Index v = 0; v < dz.voxels(); ++v) {
    const auto p = probs.values().col(v);
    auto g = dz.values().col(v);
    const Scalar dot = g.dot(p);
    g = p.cwiseProduct(g - Vector<Scalar>::Constant(p.size(), dot));
  }
  return dz;
}

template <typename Scalar>
ChannelGrid<Scalar> sigmoid(const ChannelGrid<Scalar>& z) {
  ChannelGrid<Scalar> y = z;
  y.values() =
      y.values().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  return y;
}

template <typename Scalar>
ChannelGrid<Scalar> sigmoid_backward(const ChannelGrid<Scalar>& out,
                                     const ChannelGrid<Scalar>& dout) {
  ChannelGrid<Scalar> dz = dout;
  dz.values().array() *=
      out.values().array() * (Scalar(1) - out.values().array());
  return dz;
}

/// Trilinear upsampling by an integer factor (align_corners = false).
template <typename Scalar>
class TrilinearUpsample {
 public:
  TrilinearUpsample() = default;
  explicit TrilinearUpsample(int factor) : factor_(factor) {}

  struct Tap {
    int i0, i1;
    Scalar t;  // weight of i1
  };

  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    in_shape_ = x.shape();
    const Eigen::Vector3i out = in_shape_ * factor_;
    ChannelGrid<Scalar> y(x.channels(), out);
    const auto tx = axis_taps(in_shape_.x(), out.x());
    const auto ty = axis_taps(in_shape_.y(), out.y());
    const auto tz = axis_taps(in_shape_.z(), out.z());
    for (int k = 0; k < out.z(); ++k) {
      for (int j = 0; j < out.y(); ++j) {
        for (int i = 0; i < out.x(); ++i) {
          auto dst = y.values().col(y.voxel_index(i, j, k));
          dst.setZero();
          for (int c2 = 0; c2 < 2; ++c2) {
            const int sz = c2 == 0 ? tz[k].i0 : tz[k].i1;
            const Scalar wz = c2 == 0 ? Scalar(1) - tz[k].t : tz[k].t;
            for (int c1 = 0; c1 < 2; ++c1) {
              const int sy = c1 == 0 ? ty[j].i0 : ty[j].i1;
              const Scalar wy = c1 == 0 ? Scalar(1) - ty[j].t : ty[j].t;
              for (int c0 = 0; c0 < 2; ++c0) {
                const int sx = c0 == 0 ? tx[i].i0 : tx[i].i1;
                const Scalar wx = c0 == 0 ? Scalar(1) - tx[i].t : tx[i].t;
                dst += wz * wy * wx *
                       x.values().col(x.voxel_index(sx, sy, sz));
              }
            }
          }
        }
      }
    }
    return y;
  }

  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dy) {
    ChannelGrid<Scalar> dx(dy.channels(), in_shape_);
    const Eigen::Vector3i out = dy.shape();
    const auto tx = axis_taps(in_shape_.x(), out.x());
    const auto ty = axis_taps(in_shape_.y(), out.y());
    const auto tz = axis_taps(in_shape_.z(), out.z());
    for (int k = 0; k < out.z(); ++k) {
      for (int j = 0; j < out.y(); ++j) {
        for (int i = 0; i < out.x(); ++i) {
          const auto src = dy.values().col(dy.voxel_index(i, j, k));
          for (int c2 = 0; c2 < 2; ++c2) {
            const int sz = c2 == 0 ? tz[k].i0 : tz[k].i1;
            const Scalar wz = c2 == 0 ? Scalar(1) - tz[k].t : tz[k].t;
            for (int c1 = 0; c1 < 2; ++c1) {
              const int sy = c1 == 0 ? ty[j].i0 : ty[j].i1;
              const Scalar wy = c1 == 0 ? Scalar(1) - ty[j].t : ty[j].t;
              for (int c0 = 0; c0 < 2; ++c0) {
                const int sx = c0 == 0 ? tx[i].i0 : tx[i].i1;
                const Scalar wx = c0 == 0 ? Scalar(1) - tx[i].t : tx[i].t;
                dx.values().col(dx.voxel_index(sx, sy, sz)) +=
                    wz * wy * wx * src;
              }
            }
          }
        }
      }
    }
    return dx;
  }

  int factor() const { return factor_; }

 private:
  std::vector<Tap> axis_taps(int in, int out) const {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::max(0.0, std::min(src, static_cast<double>(in - 1)));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, in - 1);
      taps[static_cast<std::size_t>(o)] = {i0, i1,
                                           static_cast<Scalar>(src - i0)};
    }
    return taps;
  }

  int factor_ = 2;
  Eigen::Vector3i in_shape_{0, 0, 0};
};

/// Concatenate along channels.
template <typename Scalar>
ChannelGrid<Scalar> concat_channels(const ChannelGrid<Scalar>& a,
                                    const ChannelGrid<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ValidationError("concat_channels: shape mismatch");
  }
  ChannelGrid<Scalar> out(a.channels() + b.channels(), a.shape());
  out.values().topRows(a.channels()) = a.values();
  out.values().bottomRows(b.channels()) = b.values();
  return out;
}

}  // namespace dvseg::nn
