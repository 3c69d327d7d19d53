#pragma once

#include <cmath>
#include <vector>

#include "dvseg/nn/layers.hpp"

namespace dvseg::nn {

/// Cosine annealing from lr0 to lr_min over `total` epochs:
/// lr(e) = lr_min + 0.5 (lr0 - lr_min) (1 + cos(pi e / total)).
inline double cosine_lr(double lr0, int epoch, int total_epochs,
                        double lr_min = 0.0) {
  if (total_epochs <= 1) return lr0;
  const double t =
      static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(M_PI * t));
}

/// SGD with classical momentum: m <- mu m + g; w <- w - lr m.
template <typename Scalar>
class SgdMomentum {
 public:
  SgdMomentum() = default;
  SgdMomentum(double momentum, Eigen::Index total_size)
      : momentum_(momentum), velocity_(Vector<Scalar>::Zero(total_size)) {}

  template <typename Net>
  void step(Net& net, double lr) {
    Eigen::Index offset = 0;
    net.visit_params([&](const ParamBlock<Scalar>& b) {
      auto v = velocity_.segment(offset, b.size);
      Eigen::Map<Vector<Scalar>> w(b.value, b.size);
      Eigen::Map<const Vector<Scalar>> g(b.grad, b.size);
      v = static_cast<Scalar>(momentum_) * v + g;
      w -= static_cast<Scalar>(lr) * v;
      offset += b.size;
    });
  }

  Vector<Scalar>& state() { return velocity_; }
  const Vector<Scalar>& state() const { return velocity_; }

 private:
  double momentum_ = 0.9;
  Vector<Scalar> velocity_;
};

/// AdamW (decoupled weight decay).
template <typename Scalar>
class AdamW {
 public:
  AdamW() = default;
  AdamW(Eigen::Index total_size, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 1e-2)
      : beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        weight_decay_(weight_decay),
        m_(Vector<Scalar>::Zero(total_size)),
        v_(Vector<Scalar>::Zero(total_size)) {}

  template <typename Net>
  void step(Net& net, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    Eigen::Index offset = 0;
    net.visit_params([&](const ParamBlock<Scalar>& b) {
      auto m = m_.segment(offset, b.size);
      auto v = v_.segment(offset, b.size);
      Eigen::Map<Vector<Scalar>> w(b.value, b.size);
      Eigen::Map<const Vector<Scalar>> g(b.grad, b.size);
      m = static_cast<Scalar>(beta1_) * m +
          static_cast<Scalar>(1.0 - beta1_) * g;
      v.array() = static_cast<Scalar>(beta2_) * v.array() +
                  static_cast<Scalar>(1.0 - beta2_) * g.array().square();
      w.array() -= static_cast<Scalar>(lr) *
                   ((m.array() / static_cast<Scalar>(bc1)) /
                        ((v.array() / static_cast<Scalar>(bc2)).sqrt() +
                         static_cast<Scalar>(eps_)) +
                    static_cast<Scalar>(weight_decay_) * w.array());
      offset += b.size;
    });
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  Vector<Scalar>& first_moment() { return m_; }
  Vector<Scalar>& second_moment() { return v_; }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  double weight_decay_ = 1e-2;
  Vector<Scalar> m_;
  Vector<Scalar> v_;
  long t_ = 0;
};

}  // namespace dvseg::nn
