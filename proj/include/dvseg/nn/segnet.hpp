#pragma once

#include <optional>

#include "dvseg/nn/layers.hpp"

namespace dvseg::nn {

/// Residual conv stage: (n-1) activated convs, a final conv, a residual add
/// (1x1x1 projection when channel counts differ), and a closing PReLU.
template <typename Scalar>
class ResStage {
 public:
  ResStage() = default;
  ResStage(int in_channels, int out_channels, int num_convs) {
    convs_.reserve(static_cast<std::size_t>(num_convs));
    acts_.reserve(static_cast<std::size_t>(num_convs));
    for (int i = 0; i < num_convs; ++i) {
      const int cin = i == 0 ? in_channels : out_channels;
      convs_.emplace_back(cin, out_channels, 3, 1, 1);
      acts_.emplace_back(out_channels);
    }
    if (in_channels != out_channels) {
      proj_.emplace(in_channels, out_channels, 1, 1, 0);
    }
  }

  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    ChannelGrid<Scalar> h = x;
    for (std::size_t i = 0; i + 1 < convs_.size(); ++i) {
      h = acts_[i].forward(convs_[i].forward(h));
    }
    h = convs_.back().forward(h);
    if (proj_) {
      h.values() += proj_->forward(x).values();
    } else {
      h.values() += x.values();
    }
    return acts_.back().forward(h);
  }

  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dy) {
    ChannelGrid<Scalar> dh = acts_.back().backward(dy);
    ChannelGrid<Scalar> dres =
        proj_ ? proj_->backward(dh) : dh;  // identity skip passes dh through
    ChannelGrid<Scalar> d = convs_.back().backward(dh);
    for (std::size_t i = convs_.size() - 1; i-- > 0;) {
      d = convs_[i].backward(acts_[i].backward(d));
    }
    d.values() += dres.values();
    return d;
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    for (auto& c : convs_) c.visit_params(fn);
    for (auto& a : acts_) a.visit_params(fn);
    if (proj_) proj_->visit_params(fn);
  }

  void init(std::mt19937_64& rng) {
    for (auto& c : convs_) c.init_he(rng);
    if (proj_) proj_->init_he(rng);
  }

 private:
  std::vector<Conv3d<Scalar>> convs_;
  std::vector<PReLU<Scalar>> acts_;
  std::optional<Conv3d<Scalar>> proj_;
};

struct SegNetConfig {
  int in_channels = 1;
  int num_classes = kNumClasses;
  int base_width = 16;
  int levels = 4;
  int max_convs_per_stage = 3;  // stage at level l runs min(l+1, max) convs

  int width(int level) const { return base_width << level; }
  int downsampling() const { return 1 << (levels - 1); }
  int stage_convs(int level) const {
    return std::min(level + 1, max_convs_per_stage);
  }

  void validate() const {
    if (in_channels < 1 || num_classes < 2 || base_width < 1 || levels < 2 ||
        max_convs_per_stage < 1) {
      throw ConfigError("invalid segmentation network configuration");
    }
  }

  /// Closed-form trainable parameter count (documented; asserted in tests).
  Eigen::Index parameter_count() const {
    auto stage = [&](int cin, int cout, int n) {
      Eigen::Index p = Conv3d<float>::parameter_count(cin, cout, 3);
      p += static_cast<Eigen::Index>(n - 1) *
           Conv3d<float>::parameter_count(cout, cout, 3);
      p += static_cast<Eigen::Index>(n) * cout;  // PReLU slopes
      if (cin != cout) p += Conv3d<float>::parameter_count(cin, cout, 1);
      return p;
    };
    Eigen::Index total = 0;
    for (int l = 0; l < levels; ++l) {
      total += stage(l == 0 ? in_channels : width(l), width(l), stage_convs(l));
    }
    for (int l = 0; l < levels - 1; ++l) {
      total += Conv3d<float>::parameter_count(width(l), width(l + 1), 2) +
               width(l + 1);  // down conv + PReLU
      total += TransposedConv3d<float>::parameter_count(width(l + 1), width(l)) +
               width(l);  // up conv + PReLU
      total += stage(2 * width(l), width(l), stage_convs(l));  // decoder
    }
    total += Conv3d<float>::parameter_count(width(0), num_classes, 1);  // head
    return total;
  }
};

/// Volumetric encoder-decoder segmentation network with residual stages,
/// 2x strided down/up transitions, skip concatenation, and a softmax head.
/// forward() caches activations; backward() consumes them and accumulates
/// parameter gradients.
template <typename Scalar>
class SegNet {
 public:
  SegNet() = default;

  explicit SegNet(const SegNetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int L = cfg.levels;
    for (int l = 0; l < L; ++l) {
      enc_.emplace_back(l == 0 ? cfg.in_channels : cfg.width(l), cfg.width(l),
                        cfg.stage_convs(l));
    }
    for (int l = 0; l < L - 1; ++l) {
      down_.emplace_back(cfg.width(l), cfg.width(l + 1), 2, 2, 0);
      down_act_.emplace_back(cfg.width(l + 1));
      up_.emplace_back(cfg.width(l + 1), cfg.width(l));
      up_act_.emplace_back(cfg.width(l));
      dec_.emplace_back(2 * cfg.width(l), cfg.width(l), cfg.stage_convs(l));
    }
    head_ = Conv3d<Scalar>(cfg.width(0), cfg.num_classes, 1, 1, 0);
  }

  const SegNetConfig& config() const { return cfg_; }

  void init_params(std::uint64_t seed) {
    auto rng = std::mt19937_64(seed);
    for (auto& s : enc_) s.init(rng);
    for (std::size_t l = 0; l < down_.size(); ++l) {
      down_[l].init_he(rng);
      up_[l].init_he(rng);
      dec_[l].init(rng);
    }
    head_.init_he(rng);
  }

  /// Per-voxel class probabilities (softmax head).
  ChannelGrid<Scalar> forward(const ChannelGrid<Scalar>& x) {
    const int div = cfg_.downsampling();
    for (int a = 0; a < 3; ++a) {
      if (x.shape()[a] % div != 0) {
        throw ValidationError("segnet: input extent " +
                              std::to_string(x.shape()[a]) +
                              " not divisible by " + std::to_string(div));
      }
    }
    const int L = cfg_.levels;
    skips_.assign(static_cast<std::size_t>(L), ChannelGrid<Scalar>());
    ChannelGrid<Scalar> h = enc_[0].forward(x);
    skips_[0] = h;
    for (int l = 1; l < L; ++l) {
      h = down_act_[static_cast<std::size_t>(l - 1)].forward(
          down_[static_cast<std::size_t>(l - 1)].forward(h));
      h = enc_[static_cast<std::size_t>(l)].forward(h);
      skips_[static_cast<std::size_t>(l)] = h;
    }
    for (int l = L - 2; l >= 0; --l) {
      const auto lu = static_cast<std::size_t>(l);
      h = up_act_[lu].forward(up_[lu].forward(h));
      h = dec_[lu].forward(concat_channels(h, skips_[lu]));
    }
    probs_ = softmax(head_.forward(h));
    return probs_;
  }

  /// Takes dL/dprobabilities, chains through the softmax internally, and
  /// returns dL/dinput.
  ChannelGrid<Scalar> backward(const ChannelGrid<Scalar>& dprobs) {
    const int L = cfg_.levels;
    ChannelGrid<Scalar> dh = head_.backward(softmax_backward(probs_, dprobs));
    std::vector<ChannelGrid<Scalar>> dskip(static_cast<std::size_t>(L));
    for (int l = 0; l < L - 1; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const ChannelGrid<Scalar> dc = dec_[lu].backward(dh);
      const int w = cfg_.width(l);
      ChannelGrid<Scalar> du(w, dc.shape());
      du.values() = dc.values().topRows(w);
      dskip[lu] = ChannelGrid<Scalar>(w, dc.shape());
      dskip[lu].values() = dc.values().bottomRows(w);
      dh = up_[lu].backward(up_act_[lu].backward(du));
    }
    ChannelGrid<Scalar> g = dh;  // gradient at the bottleneck stage output
    for (int l = L - 1; l >= 1; --l) {
      const auto lu = static_cast<std::size_t>(l);
      ChannelGrid<Scalar> d = enc_[lu].backward(g);
      d = down_[lu - 1].backward(down_act_[lu - 1].backward(d));
      g = dskip[lu - 1];
      g.values() += d.values();
    }
    return enc_[0].backward(g);
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    // Fixed traversal order; checkpoints and optimizer state rely on it.
    for (auto& s : enc_) s.visit_params(fn);
    for (std::size_t l = 0; l < down_.size(); ++l) {
      down_[l].visit_params(fn);
      down_act_[l].visit_params(fn);
      up_[l].visit_params(fn);
      up_act_[l].visit_params(fn);
      dec_[l].visit_params(fn);
    }
    head_.visit_params(fn);
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

 private:
  SegNetConfig cfg_;
  std::vector<ResStage<Scalar>> enc_;
  std::vector<Conv3d<Scalar>> down_;
  std::vector<PReLU<Scalar>> down_act_;
  std::vector<TransposedConv3d<Scalar>> up_;
  std::vector<PReLU<Scalar>> up_act_;
  std::vector<ResStage<Scalar>> dec_;
  Conv3d<Scalar> head_;
  std::vector<ChannelGrid<Scalar>> skips_;
  ChannelGrid<Scalar> probs_;
};

}  // namespace dvseg::nn
