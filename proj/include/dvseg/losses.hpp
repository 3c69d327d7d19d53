#pragma once

#include <cmath>

#include "dvseg/grid.hpp"

namespace dvseg {

/// Reduction over voxels for the adversarial / masked / critic terms. The
/// equations are written as sums; kSum keeps them literal (and is what the
/// closed-form tests pin down), kMean divides by the voxel count so the
/// published loss weights behave the same at any patch size. Cross-entropy
/// is always a voxel mean and Dice a class mean.
enum class Reduction { kSum, kMean };

struct LossWeights {
  double lambda_m = 0.3;
  double lambda_c = 0.01;
  double threshold = 0.2;  // confidence cut for the masked term
  double dice_smooth = 1e-5;

  void validate() const {
    if (lambda_m < 0.0 || lambda_c < 0.0) {
      throw ConfigError("loss weights must be non-negative");
    }
    if (threshold <= 0.0 || threshold >= 1.0) {
      throw ConfigError("mask threshold must lie strictly inside (0,1)");
    }
    if (dice_smooth <= 0.0) {
      throw ConfigError("dice smoothing must be positive");
    }
  }
};

struct LossBreakdown {
  double seg_ce = 0.0;
  double seg_dice = 0.0;
  double adv = 0.0;
  double masked = 0.0;
  double total = 0.0;
  double critic = 0.0;  // separate phase; not part of total
};

namespace loss_detail {

// Floor for probabilities entering logs.
constexpr double kLogFloor = 1e-12;

template <typename Scalar>
void check_pair(const ChannelGrid<Scalar>& p, const ChannelGrid<Scalar>& y) {
  if (p.shape() != y.shape() || p.channels() != y.channels()) {
    throw ValidationError("loss: probability/target shape mismatch");
  }
}

}  // namespace loss_detail

/// Voxel-mean cross-entropy -<y, log p>. Zero iff p puts mass 1 on the true
/// class everywhere. If dp is given, the gradient w.r.t. p is ACCUMULATED
/// into it (callers compose several terms into one buffer).
template <typename Scalar>
double ce_loss(const ChannelGrid<Scalar>& p, const ChannelGrid<Scalar>& y,
               ChannelGrid<Scalar>* dp = nullptr) {
  loss_detail::check_pair(p, y);
  const double n = static_cast<double>(p.voxels());
  double total = 0.0;
  for (Eigen::Index v = 0; v < p.voxels(); ++v) {
    for (int c = 0; c < p.channels(); ++c) {
      const double yv = y.values()(c, v);
      if (yv == 0.0) continue;
      const double pv = p.values()(c, v);
      const double safe = std::max(pv, loss_detail::kLogFloor);
      total -= yv * std::log(safe);
      if (dp != nullptr && pv > loss_detail::kLogFloor) {
        dp->values()(c, v) -= static_cast<Scalar>(yv / (safe * n));
      }
    }
  }
  return total / n;
}

/// Class-mean soft Dice loss with smoothing eps in numerator and denominator.
template <typename Scalar>
double dice_loss(const ChannelGrid<Scalar>& p, const ChannelGrid<Scalar>& y,
                 double eps = 1e-5, ChannelGrid<Scalar>* dp = nullptr) {
  loss_detail::check_pair(p, y);
  const int classes = p.channels();
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    const auto pc = p.values().row(c).template cast<double>();
    const auto yc = y.values().row(c).template cast<double>();
    const double inter = (pc.array() * yc.array()).sum();
    const double numer = 2.0 * inter + eps;
    const double denom = yc.sum() + pc.sum() + eps;
    total += 1.0 - numer / denom;
    if (dp != nullptr) {
      // d/dp[v] (1 - n/d) = -(2 y[v] d - n) / d^2   (p >= 0, so d'nom = 1)
      const double inv_d2 = 1.0 / (denom * denom);
      for (Eigen::Index v = 0; v < p.voxels(); ++v) {
        const double g =
            -(2.0 * y.values()(c, v) * denom - numer) * inv_d2 / classes;
        dp->values()(c, v) += static_cast<Scalar>(g);
      }
    }
  }
  return total / classes;
}

/// Adversarial term -sum log(conf): low when the critic is convinced the
/// prediction looks real. Gradients flow to the map itself (and from there
/// through the critic into the segmentation network; the critic's own
/// parameters are refreshed in its separate phase).
template <typename Scalar>
double adv_loss(const Grid3<Scalar>& conf, Grid3<Scalar>* dconf = nullptr,
                Reduction reduction = Reduction::kSum) {
  const double scale =
      reduction == Reduction::kSum ? 1.0 : 1.0 / static_cast<double>(conf.size());
  double total = 0.0;
  for (Eigen::Index v = 0; v < conf.size(); ++v) {
    const double cv = conf[v];
    if (cv < 0.0 || cv > 1.0) {
      throw ValidationError("adv_loss: confidence outside [0,1]");
    }
    const double safe = std::max(cv, loss_detail::kLogFloor);
    total -= std::log(safe);
    if (dconf != nullptr && cv > loss_detail::kLogFloor) {
      (*dconf)[v] -= static_cast<Scalar>(scale / safe);
    }
  }
  return total * scale;
}

/// Masked spatial cross-entropy: -sum over voxels whose confidence strictly
/// exceeds T of <y, log p>. The confidence map acts as a constant; no
/// gradient flows through the indicator. kMean divides by the total voxel
/// count (so conf==1 reproduces the mean CE up to the voxel-mean factor).
template <typename Scalar>
double masked_ce_loss(const ChannelGrid<Scalar>& p, const ChannelGrid<Scalar>& y,
                      const Grid3<Scalar>& conf, double threshold,
                      ChannelGrid<Scalar>* dp = nullptr,
                      Reduction reduction = Reduction::kSum) {
  loss_detail::check_pair(p, y);
  if (conf.shape() != p.shape()) {
    throw ValidationError("masked_ce_loss: confidence shape mismatch");
  }
  const double scale =
      reduction == Reduction::kSum ? 1.0 : 1.0 / static_cast<double>(p.voxels());
  double total = 0.0;
  for (Eigen::Index v = 0; v < p.voxels(); ++v) {
    if (!(conf[v] > threshold)) continue;
    for (int c = 0; c < p.channels(); ++c) {
      const double yv = y.values()(c, v);
      if (yv == 0.0) continue;
      const double pv = p.values()(c, v);
      const double safe = std::max(pv, loss_detail::kLogFloor);
      total -= yv * std::log(safe);
      if (dp != nullptr && pv > loss_detail::kLogFloor) {
        dp->values()(c, v) -= static_cast<Scalar>(scale * yv / safe);
      }
    }
  }
  return total * scale;
}

/// Critic objective, minimized: the negation of the maximum-likelihood form.
/// real maps are the critic's response to ground truth (label 1), fake maps
/// its response to detached predictions (label 0), one pair per view.
template <typename Scalar>
double critic_loss(const Grid3<Scalar>& real_1, const Grid3<Scalar>& fake_1,
                   const Grid3<Scalar>& real_2, const Grid3<Scalar>& fake_2,
                   Grid3<Scalar>* dreal_1 = nullptr,
                   Grid3<Scalar>* dfake_1 = nullptr,
                   Grid3<Scalar>* dreal_2 = nullptr,
                   Grid3<Scalar>* dfake_2 = nullptr,
                   Reduction reduction = Reduction::kSum) {
  auto real_term = [&](const Grid3<Scalar>& m, Grid3<Scalar>* dm) {
    const double scale =
        reduction == Reduction::kSum ? 1.0 : 1.0 / static_cast<double>(m.size());
    double t = 0.0;
    for (Eigen::Index v = 0; v < m.size(); ++v) {
      const double safe = std::max(static_cast<double>(m[v]),
                                   loss_detail::kLogFloor);
      t -= std::log(safe);
      if (dm != nullptr && m[v] > loss_detail::kLogFloor) {
        (*dm)[v] -= static_cast<Scalar>(scale / safe);
      }
    }
    return t * scale;
  };
  auto fake_term = [&](const Grid3<Scalar>& m, Grid3<Scalar>* dm) {
    const double scale =
        reduction == Reduction::kSum ? 1.0 : 1.0 / static_cast<double>(m.size());
    double t = 0.0;
    for (Eigen::Index v = 0; v < m.size(); ++v) {
      const double one_minus = 1.0 - static_cast<double>(m[v]);
      const double safe = std::max(one_minus, loss_detail::kLogFloor);
      t -= std::log(safe);
      if (dm != nullptr && one_minus > loss_detail::kLogFloor) {
        (*dm)[v] += static_cast<Scalar>(scale / safe);
      }
    }
    return t * scale;
  };
  return real_term(real_1, dreal_1) + fake_term(fake_1, dfake_1) +
         real_term(real_2, dreal_2) + fake_term(fake_2, dfake_2);
}

/// One view's multi-task objective: CE + Dice + lambda_m * masked +
/// lambda_c * adv. The gradient w.r.t. the probability map lands in dp
/// (CE + Dice + masked parts); the adversarial part is returned through
/// dconf_adv because it must travel through the critic first.
template <typename Scalar>
LossBreakdown total_view_loss(const ChannelGrid<Scalar>& p,
                              const ChannelGrid<Scalar>& y,
                              const Grid3<Scalar>& conf_adv,
                              const Grid3<Scalar>& conf_mask,
                              const LossWeights& w,
                              Reduction reduction = Reduction::kSum,
                              ChannelGrid<Scalar>* dp = nullptr,
                              Grid3<Scalar>* dconf_adv = nullptr) {
  w.validate();
  LossBreakdown b;
  b.seg_ce = ce_loss(p, y, dp);
  b.seg_dice = dice_loss(p, y, w.dice_smooth, dp);
  if (w.lambda_m > 0.0) {
    ChannelGrid<Scalar> dmask;
    ChannelGrid<Scalar>* dmask_ptr = nullptr;
    if (dp != nullptr) {
      dmask = ChannelGrid<Scalar>(p.channels(), p.shape());
      dmask_ptr = &dmask;
    }
    b.masked =
        masked_ce_loss(p, y, conf_mask, w.threshold, dmask_ptr, reduction);
    if (dp != nullptr) {
      dp->values() += static_cast<Scalar>(w.lambda_m) * dmask.values();
    }
  } else {
    b.masked = masked_ce_loss<Scalar>(p, y, conf_mask, w.threshold, nullptr,
                                      reduction);
  }
  if (w.lambda_c > 0.0 && dconf_adv != nullptr) {
    Grid3<Scalar> dadv(conf_adv.shape());
    b.adv = adv_loss(conf_adv, &dadv, reduction);
    dconf_adv->array() += static_cast<Scalar>(w.lambda_c) * dadv.array();
  } else {
    b.adv = adv_loss<Scalar>(conf_adv, nullptr, reduction);
  }
  b.total = b.seg_ce + b.seg_dice + w.lambda_m * b.masked + w.lambda_c * b.adv;
  return b;
}

}  // namespace dvseg
