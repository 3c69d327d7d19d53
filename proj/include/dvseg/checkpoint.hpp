#pragma once

#include <filesystem>
#include <vector>

#include "dvseg/frequency.hpp"
#include "dvseg/nn/critic.hpp"
#include "dvseg/nn/segnet.hpp"

namespace dvseg {

/// Checkpoint file layout (little-endian, version 1):
///   magic "DVSGCKP1" | u32 version | u64 config_hash | u32 epoch |
///   f64 best_val_dsc | architecture block (SegNetConfig, CriticConfig,
///   PatchSpec, cutoff, geometry, clip percentiles) |
///   f32 arrays with u64 length prefixes: f1 params, f2 params, critic
///   params, f1 velocity, f2 velocity, critic Adam m, critic Adam v |
///   i64 critic step count.
/// The stored hash is recomputed from the architecture block on load; a
/// mismatch (or a caller-supplied expected hash that differs) refuses the
/// file.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;
  double best_val_dsc = 0.0;

  nn::SegNetConfig model;
  nn::CriticConfig critic;
  PatchSpec patch;
  double cutoff = 0.10;
  FilterGeometry geometry = FilterGeometry::kRadial;
  double clip_lo = 0.5;
  double clip_hi = 99.5;

  std::vector<float> f1_params;
  std::vector<float> f2_params;
  std::vector<float> critic_params;
  std::vector<float> f1_velocity;
  std::vector<float> f2_velocity;
  std::vector<float> critic_adam_m;
  std::vector<float> critic_adam_v;
  std::int64_t critic_steps = 0;
};

std::uint64_t architecture_hash(const nn::SegNetConfig& model,
                                const nn::CriticConfig& critic,
                                const PatchSpec& patch, double cutoff,
                                FilterGeometry geometry, double clip_lo,
                                double clip_hi);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Load and verify. When expected_hash is nonzero it must match the stored
/// hash exactly; otherwise only internal consistency is checked.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::uint64_t expected_hash = 0);

/// Flatten a network's parameters in its fixed traversal order.
template <typename Net>
std::vector<float> extract_params(Net& net) {
  std::vector<float> out;
  net.visit_params([&](const nn::ParamBlock<float>& b) {
    out.insert(out.end(), b.value, b.value + b.size);
  });
  return out;
}

template <typename Net>
void load_params(Net& net, const std::vector<float>& params) {
  std::size_t offset = 0;
  net.visit_params([&](const nn::ParamBlock<float>& b) {
    if (offset + static_cast<std::size_t>(b.size) > params.size()) {
      throw FormatError("checkpoint: parameter vector too short");
    }
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(offset),
              params.begin() + static_cast<std::ptrdiff_t>(offset) + b.size,
              b.value);
    offset += static_cast<std::size_t>(b.size);
  });
  if (offset != params.size()) {
    throw FormatError("checkpoint: parameter vector length mismatch");
  }
}

}  // namespace dvseg
