#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <sstream>

#include "dvseg/common.hpp"

namespace dvseg {

/// Dense 3D scalar field. Storage is a flat Eigen array in x-fastest order
/// (NIfTI layout): flat = i + nx * (j + ny * k).
template <typename Scalar>
class Grid3 {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Grid3() : shape_(0, 0, 0) {}

  explicit Grid3(const Eigen::Vector3i& shape)
      : shape_(shape),
        data_(Array::Zero(static_cast<Eigen::Index>(shape.x()) * shape.y() *
                          shape.z())) {}

  Grid3(const Eigen::Vector3i& shape, Array data)
      : shape_(shape), data_(std::move(data)) {
    if (data_.size() != static_cast<Eigen::Index>(shape_.x()) * shape_.y() *
                            shape_.z()) {
      throw ValidationError("Grid3: data size does not match shape");
    }
  }

  const Eigen::Vector3i& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Eigen::Index index(int i, int j, int k) const {
    return static_cast<Eigen::Index>(i) +
           static_cast<Eigen::Index>(shape_.x()) *
               (static_cast<Eigen::Index>(j) +
                static_cast<Eigen::Index>(shape_.y()) * k);
  }

  Scalar& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  Scalar operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

  Scalar& operator[](Eigen::Index flat) { return data_[flat]; }
  Scalar operator[](Eigen::Index flat) const { return data_[flat]; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }

  bool same_shape(const Grid3& other) const { return shape_ == other.shape_; }

  template <typename Other>
  Grid3<Other> cast() const {
    return Grid3<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Eigen::Vector3i shape_;
  Array data_;
};

/// K-channel field over a 3D grid. Stored as a channels x voxels matrix
/// (column-major), so the channel vector of one voxel is contiguous.
template <typename Scalar>
class ChannelGrid {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ChannelGrid() : shape_(0, 0, 0) {}

  ChannelGrid(int channels, const Eigen::Vector3i& shape)
      : shape_(shape),
        values_(Matrix::Zero(channels, static_cast<Eigen::Index>(shape.x()) *
                                           shape.y() * shape.z())) {}

  ChannelGrid(const Eigen::Vector3i& shape, Matrix values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.cols() != static_cast<Eigen::Index>(shape_.x()) * shape_.y() *
                              shape_.z()) {
      throw ValidationError("ChannelGrid: column count does not match shape");
    }
  }

  int channels() const { return static_cast<int>(values_.rows()); }
  Eigen::Index voxels() const { return values_.cols(); }
  const Eigen::Vector3i& shape() const { return shape_; }

  Eigen::Index voxel_index(int i, int j, int k) const {
    return static_cast<Eigen::Index>(i) +
           static_cast<Eigen::Index>(shape_.x()) *
               (static_cast<Eigen::Index>(j) +
                static_cast<Eigen::Index>(shape_.y()) * k);
  }

  Scalar& operator()(int c, int i, int j, int k) {
    return values_(c, voxel_index(i, j, k));
  }
  Scalar operator()(int c, int i, int j, int k) const {
    return values_(c, voxel_index(i, j, k));
  }

  Matrix& values() { return values_; }
  const Matrix& values() const { return values_; }

  /// Copy of channel c as a scalar field.
  Grid3<Scalar> channel(int c) const {
    return Grid3<Scalar>(shape_, values_.row(c).transpose().array());
  }

  void set_channel(int c, const Grid3<Scalar>& g) {
    if (g.shape() != shape_) {
      throw ValidationError("ChannelGrid::set_channel: shape mismatch");
    }
    values_.row(c) = g.array().matrix().transpose();
  }

  template <typename Other>
  ChannelGrid<Other> cast() const {
    return ChannelGrid<Other>(shape_, values_.template cast<Other>());
  }

 private:
  Eigen::Vector3i shape_;
  Matrix values_;
};

inline std::string shape_string(const Eigen::Vector3i& s) {
  std::ostringstream os;
  os << s.x() << "x" << s.y() << "x" << s.z();
  return os.str();
}

}  // namespace dvseg
