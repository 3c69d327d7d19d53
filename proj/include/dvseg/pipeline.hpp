#pragma once

#include <filesystem>
#include <vector>

#include "dvseg/checkpoint.hpp"
#include "dvseg/losses.hpp"
#include "dvseg/nn/optim.hpp"
#include "dvseg/preprocess.hpp"

namespace dvseg {

/// Everything `train` needs. Defaults follow the published setup where one
/// exists (batch 4, SGD 0.01/momentum 0.9, AdamW 1e-4, cosine annealing,
/// split 0.76, lambda_m 0.3, lambda_c 0.01, T 0.2, cutoff 0.10, 128^3
/// patches); the rest (epochs, reduction, widths) are documented choices.
struct TrainConfig {
  int batch_size = 4;
  double seg_lr = 0.01;
  double seg_momentum = 0.9;
  double critic_lr = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 0;
  double cutoff = 0.10;
  FilterGeometry geometry = FilterGeometry::kRadial;
  double split_fraction = 0.76;
  LossWeights weights;
  // Reduction for the adversarial/masked/critic sums during training. kMean
  // keeps the published weights patch-size independent; the loss functions
  // themselves default to the literal sums.
  Reduction loss_reduction = Reduction::kMean;
  // Masked term gated by the peer view's confidence instead of the own one.
  bool peer_mask = false;
  // Train without the critic (plain supervised); used by the decoupling
  // checks and available as a baseline.
  bool critic_enabled = true;
  nn::SegNetConfig model;
  nn::CriticConfig critic;
  PatchSpec patch;
  double clip_lo = 0.5;
  double clip_hi = 99.5;
  int workers = 2;

  void validate() const;
  std::uint64_t arch_hash() const {
    return architecture_hash(model, critic, patch, cutoff, geometry, clip_lo,
                             clip_hi);
  }
};

struct Views {
  Volume x1;  // the preprocessed original
  Volume x2;  // rescaled high-frequency companion
};

/// Second-view synthesis on an already preprocessed patch: x2 is the
/// high-pass filtered volume rescaled to [0,1].
Views make_views(const Volume& preprocessed, double cutoff,
                 FilterGeometry geometry);

/// One case, fully prepared for the networks.
struct TrainCase {
  std::string id;
  ChannelGrid<float> x1;      // 1 x patch
  ChannelGrid<float> x2;      // 1 x patch
  OneHotMask y;               // K x patch
  LabelMask original_labels;  // ground truth at original geometry
  PatchTransform transform;
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  Eigen::Matrix4d affine{Eigen::Matrix4d::Identity()};
};

TrainCase prepare_case(const Volume& raw, const LabelMask& labels,
                       const TrainConfig& cfg);

/// Load <id>_img.nii.gz / <id>_lbl.nii.gz pairs listed in dir/manifest.json.
std::vector<TrainCase> load_training_cases(const std::filesystem::path& dir,
                                           const TrainConfig& cfg);

struct StepLosses {
  LossBreakdown view1;
  LossBreakdown view2;
  double critic = 0.0;
};

/// Owns the two segmentation networks, the critic, and their optimizers.
/// One train_step performs exactly three parameter updates, in order:
/// F1 (total view-1 loss), F2 (total view-2 loss), critic (critic loss on
/// detached step-start predictions from both views plus ground truths).
class DualViewTrainer {
 public:
  explicit DualViewTrainer(const TrainConfig& cfg);

  StepLosses train_step(const std::vector<const TrainCase*>& batch,
                        double lr_seg, double lr_critic);

  /// Single-phase entry points (testing and analysis).
  LossBreakdown seg_phase(int view, const std::vector<const TrainCase*>& batch,
                          double lr);
  double critic_phase(const std::vector<const TrainCase*>& batch, double lr);
  StepLosses evaluate_batch(const std::vector<const TrainCase*>& batch);

  nn::SegNet<float>& f1() { return f1_; }
  nn::SegNet<float>& f2() { return f2_; }
  nn::Critic<float>& critic() { return critic_; }
  const TrainConfig& config() const { return cfg_; }

  Checkpoint make_checkpoint(int epoch, double best_val_dsc);
  void restore(const Checkpoint& ckpt);

 private:
  struct ViewOutcome {
    LossBreakdown mean;
    std::vector<ChannelGrid<float>> predictions;  // detached, per sample
  };
  ViewOutcome run_seg_view(int view, const std::vector<const TrainCase*>& batch,
                           bool update, double lr,
                           const std::vector<ChannelGrid<float>>* peer_preds);
  double run_critic(const std::vector<const TrainCase*>& batch,
                    const std::vector<ChannelGrid<float>>& preds1,
                    const std::vector<ChannelGrid<float>>& preds2, bool update,
                    double lr);
  std::vector<ChannelGrid<float>> detached_predictions(
      int view, const std::vector<const TrainCase*>& batch);

  TrainConfig cfg_;
  nn::SegNet<float> f1_;
  nn::SegNet<float> f2_;
  nn::Critic<float> critic_;
  nn::SgdMomentum<float> opt1_;
  nn::SgdMomentum<float> opt2_;
  nn::AdamW<float> critic_opt_;
};

struct EpochValidation {
  double dsc_view1 = 0.0;
  double dsc_view2 = 0.0;
  double dsc_ensemble = 0.0;
};

/// Mean validation DSC (mean of left/right, then over cases) per view and
/// for the ensemble, computed on geometry-inverted full volumes.
EpochValidation validate_cases(nn::SegNet<float>& f1, nn::SegNet<float>& f2,
                               const std::vector<const TrainCase*>& cases,
                               int workers);

struct FitResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path train_log_path;
  std::filesystem::path val_log_path;
  double best_val_dsc = 0.0;
  int best_epoch = -1;
  std::vector<EpochValidation> val_history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Full co-training run: deterministic split, per-epoch cosine learning
/// rates, alternating updates, per-epoch validation, keep-best checkpointing.
/// Logs one CSV row per step (train_log.csv) and per epoch (val_log.csv).
FitResult fit(const std::vector<TrainCase>& cases, const TrainConfig& cfg,
              const std::filesystem::path& out_dir);

struct PredictOutput {
  LabelMask labels;              // original geometry
  ProbabilityMap probabilities;  // original geometry; background fills padding
};

/// Dual-view ensembled inference from a checkpoint. The critic is loaded but
/// never evaluated; the instrumented call counter stays observable.
class InferenceEngine {
 public:
  explicit InferenceEngine(const Checkpoint& ckpt);

  PredictOutput predict(const Volume& raw);

  long critic_forward_calls() const { return critic_.forward_call_count(); }
  std::vector<float> critic_params() { return extract_params(critic_); }

 private:
  Checkpoint meta_;  // architecture + preprocessing settings (params cleared)
  nn::SegNet<float> f1_;
  nn::SegNet<float> f2_;
  nn::Critic<float> critic_;
};

}  // namespace dvseg
