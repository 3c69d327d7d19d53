#include "dvseg/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "dvseg/metrics.hpp"
#include "dvseg/nifti.hpp"
#include "dvseg/synthdata.hpp"

namespace dvseg {

namespace {

ChannelGrid<float> as_input(const Grid3<float>& g) {
  ChannelGrid<float> c(1, g.shape());
  c.values().row(0) = g.array().matrix().transpose();
  return c;
}

void check_finite(double v, const std::string& term) {
  if (!std::isfinite(v)) {
    throw Error("non-finite loss term: " + term);
  }
}

void check_breakdown(const LossBreakdown& b, const std::string& view) {
  check_finite(b.seg_ce, view + " cross-entropy");
  check_finite(b.seg_dice, view + " dice");
  check_finite(b.adv, view + " adversarial");
  check_finite(b.masked, view + " masked cross-entropy");
  check_finite(b.total, view + " total");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double mean_structure_dsc(const LabelMask& pred, const LabelMask& gt) {
  const double left = dsc(select_label(pred, kLeftLabel),
                          select_label(gt, kLeftLabel));
  const double right = dsc(select_label(pred, kRightLabel),
                           select_label(gt, kRightLabel));
  return 0.5 * (left + right);
}

LabelMask labels_at_original(const ChannelGrid<float>& probs,
                             const TrainCase& tc) {
  LabelMask patch = argmax_labels(probs);
  patch.spacing = tc.spacing;
  patch.affine = tc.affine;
  patch.id = tc.id;
  return tc.transform.invert(patch);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(seg_lr > 0.0) || !(critic_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (seg_momentum < 0.0 || seg_momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0,1)");
  }
  if (!(split_fraction > 0.0) || !(split_fraction < 1.0)) {
    throw ConfigError("split_fraction must lie strictly inside (0,1)");
  }
  if (cutoff < 0.0 || cutoff >= 1.0) {
    throw ConfigError("cutoff must lie in [0,1)");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
  weights.validate();
  model.validate();
  critic.validate();
  patch.validate();
  if (model.num_classes != critic.in_channels) {
    throw ConfigError("critic in_channels must equal the class count");
  }
  const int div = std::max(model.downsampling(), critic.downsampling());
  for (int a = 0; a < 3; ++a) {
    if (patch.target_shape[a] % div != 0) {
      throw ConfigError("patch extent " +
                        std::to_string(patch.target_shape[a]) +
                        " is not divisible by the network downsampling " +
                        std::to_string(div));
    }
  }
}

Views make_views(const Volume& preprocessed, double cutoff,
                 FilterGeometry geometry) {
  Views v;
  v.x1 = preprocessed;
  const HighPassFilter filter =
      build_filter(preprocessed.shape(), cutoff, geometry);
  v.x2 = high_frequency_view(preprocessed, filter);
  v.x2.data = rescale_unit(v.x2.data);
  return v;
}

TrainCase prepare_case(const Volume& raw, const LabelMask& labels,
                       const TrainConfig& cfg) {
  if (labels.shape() != raw.shape()) {
    throw ValidationError("case " + raw.id +
                          ": label shape does not match the image");
  }
  const Volume norm = minmax_normalize(raw, cfg.clip_lo, cfg.clip_hi);
  CropResult cr = crop_or_pad(norm, &labels, cfg.patch);
  const Views views = make_views(cr.volume, cfg.cutoff, cfg.geometry);

  TrainCase tc;
  tc.id = raw.id;
  tc.x1 = as_input(views.x1.data);
  tc.x2 = as_input(views.x2.data);
  tc.y = one_hot(*cr.mask, cfg.model.num_classes);
  tc.original_labels = labels;
  tc.transform = cr.transform;
  tc.spacing = raw.spacing;
  tc.affine = raw.affine;
  return tc;
}

std::vector<TrainCase> load_training_cases(const std::filesystem::path& dir,
                                           const TrainConfig& cfg) {
  std::vector<TrainCase> cases;
  for (const auto& id : read_manifest_ids(dir)) {
    const Volume img = load_volume(dir / (id + "_img.nii.gz"));
    const LabelMask lbl = load_labels(dir / (id + "_lbl.nii.gz"));
    cases.push_back(prepare_case(img, lbl, cfg));
  }
  return cases;
}

DualViewTrainer::DualViewTrainer(const TrainConfig& cfg)
    : cfg_(cfg),
      f1_(cfg.model),
      f2_(cfg.model),
      critic_(cfg.critic) {
  cfg_.validate();
  f1_.init_params(derive_seed(cfg.seed, "init.f1"));
  f2_.init_params(derive_seed(cfg.seed, "init.f2"));
  critic_.init_params(derive_seed(cfg.seed, "init.critic"));
  opt1_ = nn::SgdMomentum<float>(cfg.seg_momentum, f1_.parameter_count());
  opt2_ = nn::SgdMomentum<float>(cfg.seg_momentum, f2_.parameter_count());
  critic_opt_ = nn::AdamW<float>(critic_.parameter_count());
}

std::vector<ChannelGrid<float>> DualViewTrainer::detached_predictions(
    int view, const std::vector<const TrainCase*>& batch) {
  nn::SegNet<float>& net = view == 1 ? f1_ : f2_;
  std::vector<ChannelGrid<float>> preds;
  preds.reserve(batch.size());
  for (const TrainCase* tc : batch) {
    preds.push_back(net.forward(view == 1 ? tc->x1 : tc->x2));
  }
  return preds;
}

DualViewTrainer::ViewOutcome DualViewTrainer::run_seg_view(
    int view, const std::vector<const TrainCase*>& batch, bool update,
    double lr, const std::vector<ChannelGrid<float>>* peer_preds) {
  nn::SegNet<float>& net = view == 1 ? f1_ : f2_;
  const std::string tag = view == 1 ? "view1" : "view2";
  net.zero_grad();

  // Confidence forwards run on a private copy so the shared critic's caches
  // and gradient buffers stay untouched until its own phase.
  nn::Critic<float> critic_local = critic_;

  ViewOutcome out;
  out.predictions.reserve(batch.size());
  LossBreakdown sum;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const TrainCase& tc = *batch[s];
    const ChannelGrid<float>& x = view == 1 ? tc.x1 : tc.x2;
    const ChannelGrid<float> p = net.forward(x);

    LossBreakdown b;
    ChannelGrid<float> dp(p.channels(), p.shape());
    if (cfg_.critic_enabled) {
      Grid3<float> conf_mask;
      if (cfg_.peer_mask) {
        if (peer_preds == nullptr || peer_preds->size() != batch.size()) {
          throw Error("peer_mask enabled but peer predictions missing");
        }
        conf_mask = critic_local.forward((*peer_preds)[s]);
      }
      // conf_adv last: its activations must stay cached for the backward.
      const Grid3<float> conf_adv = critic_local.forward(p);
      if (!cfg_.peer_mask) conf_mask = conf_adv;

      Grid3<float> dconf(conf_adv.shape());
      b = total_view_loss(p, tc.y, conf_adv, conf_mask, cfg_.weights,
                          cfg_.loss_reduction, update ? &dp : nullptr,
                          update && cfg_.weights.lambda_c > 0.0 ? &dconf
                                                                : nullptr);
      if (update && cfg_.weights.lambda_c > 0.0) {
        dp.values() += critic_local.backward(dconf).values();
      }
    } else {
      b.seg_ce = ce_loss(p, tc.y, update ? &dp : nullptr);
      b.seg_dice =
          dice_loss(p, tc.y, cfg_.weights.dice_smooth, update ? &dp : nullptr);
      b.total = b.seg_ce + b.seg_dice;
    }
    check_breakdown(b, tag);
    if (update) {
      net.backward(dp);
    }
    out.predictions.push_back(p);
    sum.seg_ce += b.seg_ce;
    sum.seg_dice += b.seg_dice;
    sum.adv += b.adv;
    sum.masked += b.masked;
    sum.total += b.total;
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  if (update) {
    net.visit_params([&](const nn::ParamBlock<float>& blk) {
      Eigen::Map<nn::Vector<float>>(blk.grad, blk.size) *=
          static_cast<float>(inv);
    });
    (view == 1 ? opt1_ : opt2_).step(net, lr);
  }
  out.mean.seg_ce = sum.seg_ce * inv;
  out.mean.seg_dice = sum.seg_dice * inv;
  out.mean.adv = sum.adv * inv;
  out.mean.masked = sum.masked * inv;
  out.mean.total = sum.total * inv;
  return out;
}

double DualViewTrainer::run_critic(const std::vector<const TrainCase*>& batch,
                                   const std::vector<ChannelGrid<float>>& preds1,
                                   const std::vector<ChannelGrid<float>>& preds2,
                                   bool update, double lr) {
  if (!cfg_.critic_enabled) return 0.0;
  critic_.zero_grad();
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const TrainCase& tc = *batch[s];
    // Pass 1: collect the maps (the critic cache only survives one forward).
    const Grid3<float> real = critic_.forward(tc.y);
    const Grid3<float> fake1 = critic_.forward(preds1[s]);
    const Grid3<float> fake2 = critic_.forward(preds2[s]);

    Grid3<float> dreal(real.shape()), dfake1(real.shape()), dfake2(real.shape());
    // Both view terms share the same ground truth, so its gradient
    // accumulates twice into dreal.
    const double loss =
        critic_loss(real, fake1, real, fake2, update ? &dreal : nullptr,
                    update ? &dfake1 : nullptr, update ? &dreal : nullptr,
                    update ? &dfake2 : nullptr, cfg_.loss_reduction);
    check_finite(loss, "critic");
    total += loss;

    if (update) {
      // Pass 2: re-forward each map and backpropagate its gradient. The
      // prediction maps are detached values, so nothing reaches F1/F2.
      critic_.forward(tc.y);
      critic_.backward(dreal);
      critic_.forward(preds1[s]);
      critic_.backward(dfake1);
      critic_.forward(preds2[s]);
      critic_.backward(dfake2);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (update) {
    critic_.visit_params([&](const nn::ParamBlock<float>& blk) {
      Eigen::Map<nn::Vector<float>>(blk.grad, blk.size) *=
          static_cast<float>(inv);
    });
    critic_opt_.step(critic_, lr);
  }
  return total * inv;
}

StepLosses DualViewTrainer::train_step(
    const std::vector<const TrainCase*>& batch, double lr_seg,
    double lr_critic) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");

  // Peer confidences come from step-start parameters of the other view.
  std::vector<ChannelGrid<float>> peer1, peer2;
  const bool need_peer = cfg_.peer_mask && cfg_.critic_enabled;
  if (need_peer) {
    peer2 = detached_predictions(2, batch);  // gates view 1
    peer1 = detached_predictions(1, batch);  // gates view 2
  }

  ViewOutcome o1, o2;
  if (cfg_.workers >= 2) {
    std::exception_ptr err1, err2;
    std::thread t1([&] {
      try {
        o1 = run_seg_view(1, batch, true, lr_seg, need_peer ? &peer2 : nullptr);
      } catch (...) {
        err1 = std::current_exception();
      }
    });
    std::thread t2([&] {
      try {
        o2 = run_seg_view(2, batch, true, lr_seg, need_peer ? &peer1 : nullptr);
      } catch (...) {
        err2 = std::current_exception();
      }
    });
    t1.join();
    t2.join();
    if (err1) std::rethrow_exception(err1);
    if (err2) std::rethrow_exception(err2);
  } else {
    o1 = run_seg_view(1, batch, true, lr_seg, need_peer ? &peer2 : nullptr);
    o2 = run_seg_view(2, batch, true, lr_seg, need_peer ? &peer1 : nullptr);
  }

  StepLosses out;
  out.view1 = o1.mean;
  out.view2 = o2.mean;
  out.critic = run_critic(batch, o1.predictions, o2.predictions, true,
                          lr_critic);
  return out;
}

LossBreakdown DualViewTrainer::seg_phase(
    int view, const std::vector<const TrainCase*>& batch, double lr) {
  std::vector<ChannelGrid<float>> peer;
  const bool need_peer = cfg_.peer_mask && cfg_.critic_enabled;
  if (need_peer) peer = detached_predictions(view == 1 ? 2 : 1, batch);
  return run_seg_view(view, batch, true, lr, need_peer ? &peer : nullptr).mean;
}

double DualViewTrainer::critic_phase(const std::vector<const TrainCase*>& batch,
                                     double lr) {
  const auto preds1 = detached_predictions(1, batch);
  const auto preds2 = detached_predictions(2, batch);
  return run_critic(batch, preds1, preds2, true, lr);
}

StepLosses DualViewTrainer::evaluate_batch(
    const std::vector<const TrainCase*>& batch) {
  std::vector<ChannelGrid<float>> peer1, peer2;
  const bool need_peer = cfg_.peer_mask && cfg_.critic_enabled;
  if (need_peer) {
    peer2 = detached_predictions(2, batch);
    peer1 = detached_predictions(1, batch);
  }
  StepLosses out;
  ViewOutcome o1 =
      run_seg_view(1, batch, false, 0.0, need_peer ? &peer2 : nullptr);
  ViewOutcome o2 =
      run_seg_view(2, batch, false, 0.0, need_peer ? &peer1 : nullptr);
  out.view1 = o1.mean;
  out.view2 = o2.mean;
  out.critic = run_critic(batch, o1.predictions, o2.predictions, false, 0.0);
  return out;
}

Checkpoint DualViewTrainer::make_checkpoint(int epoch, double best_val_dsc) {
  Checkpoint c;
  c.config_hash = cfg_.arch_hash();
  c.epoch = static_cast<std::uint32_t>(epoch);
  c.best_val_dsc = best_val_dsc;
  c.model = cfg_.model;
  c.critic = cfg_.critic;
  c.patch = cfg_.patch;
  c.cutoff = cfg_.cutoff;
  c.geometry = cfg_.geometry;
  c.clip_lo = cfg_.clip_lo;
  c.clip_hi = cfg_.clip_hi;
  c.f1_params = extract_params(f1_);
  c.f2_params = extract_params(f2_);
  c.critic_params = extract_params(critic_);
  auto to_vec = [](const nn::Vector<float>& v) {
    return std::vector<float>(v.data(), v.data() + v.size());
  };
  c.f1_velocity = to_vec(opt1_.state());
  c.f2_velocity = to_vec(opt2_.state());
  c.critic_adam_m = to_vec(critic_opt_.first_moment());
  c.critic_adam_v = to_vec(critic_opt_.second_moment());
  c.critic_steps = critic_opt_.step_count();
  return c;
}

void DualViewTrainer::restore(const Checkpoint& ckpt) {
  if (ckpt.config_hash != cfg_.arch_hash()) {
    throw ConfigError("checkpoint config-hash does not match this trainer");
  }
  load_params(f1_, ckpt.f1_params);
  load_params(f2_, ckpt.f2_params);
  load_params(critic_, ckpt.critic_params);
  auto from_vec = [](nn::Vector<float>& dst, const std::vector<float>& src,
                     const char* what) {
    if (static_cast<std::size_t>(dst.size()) != src.size()) {
      throw FormatError(std::string("checkpoint: bad state size for ") + what);
    }
    std::copy(src.begin(), src.end(), dst.data());
  };
  from_vec(opt1_.state(), ckpt.f1_velocity, "f1 velocity");
  from_vec(opt2_.state(), ckpt.f2_velocity, "f2 velocity");
  from_vec(critic_opt_.first_moment(), ckpt.critic_adam_m, "critic m");
  from_vec(critic_opt_.second_moment(), ckpt.critic_adam_v, "critic v");
  critic_opt_.set_step_count(ckpt.critic_steps);
}

EpochValidation validate_cases(nn::SegNet<float>& f1, nn::SegNet<float>& f2,
                               const std::vector<const TrainCase*>& cases,
                               int workers) {
  if (cases.empty()) {
    throw ValidationError("validation requires at least one case");
  }
  struct CaseScore {
    double v1 = 0.0, v2 = 0.0, ens = 0.0;
  };
  std::vector<CaseScore> scores(cases.size());

  auto eval_range = [&](nn::SegNet<float> net1, nn::SegNet<float> net2,
                        std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < cases.size(); i += stride) {
      const TrainCase& tc = *cases[i];
      const ChannelGrid<float> p1 = net1.forward(tc.x1);
      const ChannelGrid<float> p2 = net2.forward(tc.x2);
      ChannelGrid<float> ens(p1.channels(), p1.shape());
      ens.values() = 0.5f * (p1.values() + p2.values());
      scores[i].v1 =
          mean_structure_dsc(labels_at_original(p1, tc), tc.original_labels);
      scores[i].v2 =
          mean_structure_dsc(labels_at_original(p2, tc), tc.original_labels);
      scores[i].ens =
          mean_structure_dsc(labels_at_original(ens, tc), tc.original_labels);
    }
  };

  const int n_threads =
      std::max(1, std::min<int>(workers, static_cast<int>(cases.size())));
  if (n_threads == 1) {
    eval_range(f1, f2, 0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back(eval_range, f1, f2, static_cast<std::size_t>(t),
                        static_cast<std::size_t>(n_threads));
    }
    for (auto& t : pool) t.join();
  }

  EpochValidation v;
  for (const auto& s : scores) {
    v.dsc_view1 += s.v1;
    v.dsc_view2 += s.v2;
    v.dsc_ensemble += s.ens;
  }
  const double inv = 1.0 / static_cast<double>(cases.size());
  v.dsc_view1 *= inv;
  v.dsc_view2 *= inv;
  v.dsc_ensemble *= inv;
  return v;
}

FitResult fit(const std::vector<TrainCase>& cases, const TrainConfig& cfg,
              const std::filesystem::path& out_dir) {
  cfg.validate();
  if (cases.size() < 2) {
    throw ConfigError("training requires at least 2 cases so that both the "
                      "train and validation splits are non-empty");
  }
  std::filesystem::create_directories(out_dir);

  // Deterministic split: shuffle once, cut at floor(n * split_fraction).
  std::vector<std::size_t> order(cases.size());
  std::iota(order.begin(), order.end(), 0);
  auto split_rng = make_rng(cfg.seed, "split");
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(cases.size()) * cfg.split_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, cases.size() - 1);

  FitResult result;
  result.train_indices.assign(order.begin(),
                              order.begin() + static_cast<std::ptrdiff_t>(n_train));
  result.val_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                            order.end());

  std::vector<const TrainCase*> val_ptrs;
  for (auto i : result.val_indices) val_ptrs.push_back(&cases[i]);

  DualViewTrainer trainer(cfg);

  result.train_log_path = out_dir / "train_log.csv";
  result.val_log_path = out_dir / "val_log.csv";
  result.checkpoint_path = out_dir / "best.ckpt";
  std::ofstream train_log(result.train_log_path);
  std::ofstream val_log(result.val_log_path);
  if (!train_log || !val_log) {
    throw IoError("cannot write logs in " + out_dir.string());
  }
  train_log << "step,epoch,lr_seg,lr_critic,v1_ce,v1_dice,v1_adv,v1_masked,"
               "v1_total,v2_ce,v2_dice,v2_adv,v2_masked,v2_total,critic\n";
  val_log << "epoch,dsc_view1,dsc_view2,dsc_ensemble,best_ensemble\n";

  double best = -1.0;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_seg = nn::cosine_lr(cfg.seg_lr, epoch, cfg.epochs);
    const double lr_critic = nn::cosine_lr(cfg.critic_lr, epoch, cfg.epochs);

    std::vector<std::size_t> epoch_order = result.train_indices;
    auto shuffle_rng =
        make_rng(cfg.seed, "shuffle.epoch." + std::to_string(epoch));
    std::shuffle(epoch_order.begin(), epoch_order.end(), shuffle_rng);

    for (std::size_t pos = 0; pos < epoch_order.size();
         pos += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrainCase*> batch;
      for (std::size_t b = pos;
           b < std::min(pos + static_cast<std::size_t>(cfg.batch_size),
                        epoch_order.size());
           ++b) {
        batch.push_back(&cases[epoch_order[b]]);
      }
      const StepLosses losses = trainer.train_step(batch, lr_seg, lr_critic);
      train_log << step << "," << epoch << "," << fmt(lr_seg) << ","
                << fmt(lr_critic);
      for (const LossBreakdown* b : {&losses.view1, &losses.view2}) {
        train_log << "," << fmt(b->seg_ce) << "," << fmt(b->seg_dice) << ","
                  << fmt(b->adv) << "," << fmt(b->masked) << ","
                  << fmt(b->total);
      }
      train_log << "," << fmt(losses.critic) << "\n";
      ++step;
    }

    const EpochValidation val =
        validate_cases(trainer.f1(), trainer.f2(), val_ptrs, cfg.workers);
    result.val_history.push_back(val);
    if (val.dsc_ensemble > best) {
      best = val.dsc_ensemble;
      result.best_epoch = epoch;
      save_checkpoint(trainer.make_checkpoint(epoch, best),
                      result.checkpoint_path);
    }
    val_log << epoch << "," << fmt(val.dsc_view1) << "," << fmt(val.dsc_view2)
            << "," << fmt(val.dsc_ensemble) << "," << fmt(best) << "\n";
    info("epoch " + std::to_string(epoch) + ": val DSC v1 " +
         fmt(val.dsc_view1) + " v2 " + fmt(val.dsc_view2) + " ens " +
         fmt(val.dsc_ensemble));
  }
  result.best_val_dsc = best;
  return result;
}

InferenceEngine::InferenceEngine(const Checkpoint& ckpt)
    : meta_(ckpt), f1_(ckpt.model), f2_(ckpt.model), critic_(ckpt.critic) {
  load_params(f1_, ckpt.f1_params);
  load_params(f2_, ckpt.f2_params);
  load_params(critic_, ckpt.critic_params);
  critic_.reset_call_count();
  meta_.f1_params.clear();
  meta_.f2_params.clear();
  meta_.critic_params.clear();
  meta_.f1_velocity.clear();
  meta_.f2_velocity.clear();
  meta_.critic_adam_m.clear();
  meta_.critic_adam_v.clear();
}

PredictOutput InferenceEngine::predict(const Volume& raw) {
  const Volume norm = minmax_normalize(raw, meta_.clip_lo, meta_.clip_hi);
  const CropResult cr = crop_or_pad(norm, nullptr, meta_.patch);
  const Views views = make_views(cr.volume, meta_.cutoff, meta_.geometry);

  const ChannelGrid<float> p1 = f1_.forward(as_input(views.x1.data));
  const ChannelGrid<float> p2 = f2_.forward(as_input(views.x2.data));
  ChannelGrid<float> ens(p1.channels(), p1.shape());
  ens.values() = 0.5f * (p1.values() + p2.values());

  LabelMask patch_labels = argmax_labels(ens);
  patch_labels.spacing = raw.spacing;
  patch_labels.affine = raw.affine;
  patch_labels.id = raw.id;

  PredictOutput out;
  out.labels = cr.transform.invert(patch_labels);

  // Probabilities back at the original geometry; padding becomes background.
  out.probabilities = ProbabilityMap(ens.channels(), raw.shape());
  out.probabilities.values().row(0).setOnes();
  const PatchTransform& tf = cr.transform;
  for (int k = 0; k < tf.patch_shape.z(); ++k) {
    const int ok = tf.window_start.z() + k;
    if (ok < 0 || ok >= raw.shape().z()) continue;
    for (int j = 0; j < tf.patch_shape.y(); ++j) {
      const int oj = tf.window_start.y() + j;
      if (oj < 0 || oj >= raw.shape().y()) continue;
      for (int i = 0; i < tf.patch_shape.x(); ++i) {
        const int oi = tf.window_start.x() + i;
        if (oi < 0 || oi >= raw.shape().x()) continue;
        out.probabilities.values().col(
            out.probabilities.voxel_index(oi, oj, ok)) =
            ens.values().col(ens.voxel_index(i, j, k));
      }
    }
  }
  return out;
}

}  // namespace dvseg
