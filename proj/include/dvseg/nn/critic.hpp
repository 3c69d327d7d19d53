#pragma once

#include "dvseg/nn/layers.hpp"

namespace dvseg::nn {

struct CriticConfig {
  int in_channels = kNumClasses;
  int base_width = 16;
  int levels = 4;  // one full-resolution stage + (levels-1) strided stages

  int width(int level) const { return base_width << level; }
  int downsampling() const { return 1 << (levels - 1); }

  void validate() const {
    if (in_channels < 1 || base_width < 1 || levels < 2) {
      throw ConfigError("invalid critic configuration");
    }
  }

  Eigen::Index parameter_count() const {
    Eigen::Index total =
        Conv3d<float>::parameter_count(in_channels, width(0), 3) + width(0);
    for (int l = 1; l < levels; ++l) {
      total += Conv3d<float>::parameter_count(width(l - 1), width(l), 3) +
               width(l);
    }
    total += Conv3d<float>::parameter_count(width(levels - 1), 1, 1);
    return total;
  }
};

/// Fully convolutional per-voxel critic: a strided conv encoder, a 1-channel
/// projection at the coarsest resolution, trilinear upsampling back to the
/// input resolution, and a sigmoid. Maps a K-channel mask to a confidence
/// map in (0,1) at full resolution.
template <typename Scalar>
class Critic {
 public:
  Critic() = default;

  explicit Critic(const CriticConfig& cfg)
      : cfg_(cfg), upsample_(cfg.downsampling()) {
    cfg.validate();
    stages_.emplace_back(cfg.in_channels, cfg.width(0), 3, 1, 1);
    acts_.emplace_back(cfg.width(0));
    for (int l = 1; l < cfg.levels; ++l) {
      stages_.emplace_back(cfg.width(l - 1), cfg.width(l), 3, 2, 1);
      acts_.emplace_back(cfg.width(l));
    }
    proj_ = Conv3d<Scalar>(cfg.width(cfg.levels - 1), 1, 1, 1, 0);
  }

  const CriticConfig& config() const { return cfg_; }

  void init_params(std::uint64_t seed) {
    auto rng = std::mt19937_64(seed);
    for (auto& s : stages_) s.init_he(rng);
    proj_.init_he(rng);
  }

  /// Confidence map at the input resolution. Increments the call counter
  /// used by the inference-isolation checks.
  Grid3<Scalar> forward(const ChannelGrid<Scalar>& p) {
    ++forward_calls_;
    const int div = cfg_.downsampling();
    for (int a = 0; a < 3; ++a) {
      if (p.shape()[a] % div != 0) {
        throw ValidationError("critic: input extent not divisible by " +
                              std::to_string(div));
      }
    }
    if (p.channels() != cfg_.in_channels) {
      throw ValidationError("critic: expected " +
                            std::to_string(cfg_.in_channels) +
                            " channels, got " + std::to_string(p.channels()));
    }
    ChannelGrid<Scalar> h = p;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      h = acts_[i].forward(stages_[i].forward(h));
    }
    coarse_shape_ = h.shape();
    h = proj_.forward(h);
    out_ = sigmoid(upsample_.forward(h));
    return out_.channel(0);
  }

  /// Shape of the projection input (testing hook for the upsampling contract).
  const Eigen::Vector3i& coarsest_shape() const { return coarse_shape_; }

  /// Takes dL/dconfidence and returns dL/dinput; accumulates param grads.
  ChannelGrid<Scalar> backward(const Grid3<Scalar>& dconf) {
    ChannelGrid<Scalar> dout(1, dconf.shape());
    dout.values().row(0) = dconf.array().matrix().transpose();
    ChannelGrid<Scalar> dh = upsample_.backward(sigmoid_backward(out_, dout));
    dh = proj_.backward(dh);
    for (std::size_t i = stages_.size(); i-- > 0;) {
      dh = stages_[i].backward(acts_[i].backward(dh));
    }
    return dh;
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      stages_[i].visit_params(fn);
      acts_[i].visit_params(fn);
    }
    proj_.visit_params(fn);
  }

  Eigen::Index parameter_count() {
    Eigen::Index n = 0;
    visit_params([&](const ParamBlock<Scalar>& b) { n += b.size; });
    return n;
  }

  void zero_grad() {
    visit_params([](const ParamBlock<Scalar>& b) {
      Eigen::Map<Vector<Scalar>>(b.grad, b.size).setZero();
    });
  }

  long forward_call_count() const { return forward_calls_; }
  void reset_call_count() { forward_calls_ = 0; }

 private:
  CriticConfig cfg_;
  std::vector<Conv3d<Scalar>> stages_;
  std::vector<PReLU<Scalar>> acts_;
  Conv3d<Scalar> proj_;
  TrilinearUpsample<Scalar> upsample_;
  ChannelGrid<Scalar> out_;
  Eigen::Vector3i coarse_shape_{0, 0, 0};
  long forward_calls_ = 0;
};

}  // namespace dvseg::nn
