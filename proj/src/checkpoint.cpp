#include "dvseg/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace dvseg {

namespace {

constexpr char kMagic[8] = {'D', 'V', 'S', 'G', 'C', 'K', 'P', '1'};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint: truncated file");
  return v;
}

void write_array(std::ostream& os, const std::vector<float>& a) {
  write_pod<std::uint64_t>(os, a.size());
  os.write(reinterpret_cast<const char*>(a.data()),
           static_cast<std::streamsize>(a.size() * sizeof(float)));
}

std::vector<float> read_array(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  std::vector<float> a(n);
  is.read(reinterpret_cast<char*>(a.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw FormatError("checkpoint: truncated parameter array");
  return a;
}

}  // namespace

std::uint64_t architecture_hash(const nn::SegNetConfig& model,
                                const nn::CriticConfig& critic,
                                const PatchSpec& patch, double cutoff,
                                FilterGeometry geometry, double clip_lo,
                                double clip_hi) {
  std::string canon;
  canon += "model:" + std::to_string(model.in_channels) + "," +
           std::to_string(model.num_classes) + "," +
           std::to_string(model.base_width) + "," +
           std::to_string(model.levels) + "," +
           std::to_string(model.max_convs_per_stage);
  canon += "|critic:" + std::to_string(critic.in_channels) + "," +
           std::to_string(critic.base_width) + "," +
           std::to_string(critic.levels);
  canon += "|patch:" + std::to_string(patch.target_shape.x()) + "," +
           std::to_string(patch.target_shape.y()) + "," +
           std::to_string(patch.target_shape.z()) + "," +
           fmt_double(patch.background_threshold);
  canon += "|fmm:" + fmt_double(cutoff) + "," + filter_geometry_name(geometry);
  canon += "|clip:" + fmt_double(clip_lo) + "," + fmt_double(clip_hi);
  return fnv1a64(canon);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());

  os.write(kMagic, sizeof(kMagic));
  write_pod(os, ckpt.version);
  write_pod(os, ckpt.config_hash);
  write_pod(os, ckpt.epoch);
  write_pod(os, ckpt.best_val_dsc);

  write_pod<std::int32_t>(os, ckpt.model.in_channels);
  write_pod<std::int32_t>(os, ckpt.model.num_classes);
  write_pod<std::int32_t>(os, ckpt.model.base_width);
  write_pod<std::int32_t>(os, ckpt.model.levels);
  write_pod<std::int32_t>(os, ckpt.model.max_convs_per_stage);
  write_pod<std::int32_t>(os, ckpt.critic.in_channels);
  write_pod<std::int32_t>(os, ckpt.critic.base_width);
  write_pod<std::int32_t>(os, ckpt.critic.levels);
  for (int a = 0; a < 3; ++a) {
    write_pod<std::int32_t>(os, ckpt.patch.target_shape[a]);
  }
  write_pod<double>(os, ckpt.patch.background_threshold);
  write_pod(os, ckpt.cutoff);
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(ckpt.geometry));
  write_pod(os, ckpt.clip_lo);
  write_pod(os, ckpt.clip_hi);

  write_array(os, ckpt.f1_params);
  write_array(os, ckpt.f2_params);
  write_array(os, ckpt.critic_params);
  write_array(os, ckpt.f1_velocity);
  write_array(os, ckpt.f2_velocity);
  write_array(os, ckpt.critic_adam_m);
  write_array(os, ckpt.critic_adam_v);
  write_pod(os, ckpt.critic_steps);
  if (!os) throw IoError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::uint64_t expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file: " + path.string());
  }
  Checkpoint c;
  c.version = read_pod<std::uint32_t>(is);
  if (c.version != 1) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(c.version));
  }
  c.config_hash = read_pod<std::uint64_t>(is);
  c.epoch = read_pod<std::uint32_t>(is);
  c.best_val_dsc = read_pod<double>(is);

  c.model.in_channels = read_pod<std::int32_t>(is);
  c.model.num_classes = read_pod<std::int32_t>(is);
  c.model.base_width = read_pod<std::int32_t>(is);
  c.model.levels = read_pod<std::int32_t>(is);
  c.model.max_convs_per_stage = read_pod<std::int32_t>(is);
  c.critic.in_channels = read_pod<std::int32_t>(is);
  c.critic.base_width = read_pod<std::int32_t>(is);
  c.critic.levels = read_pod<std::int32_t>(is);
  for (int a = 0; a < 3; ++a) {
    c.patch.target_shape[a] = read_pod<std::int32_t>(is);
  }
  c.patch.background_threshold =
      static_cast<float>(read_pod<double>(is));
  c.cutoff = read_pod<double>(is);
  c.geometry = static_cast<FilterGeometry>(read_pod<std::int32_t>(is));
  c.clip_lo = read_pod<double>(is);
  c.clip_hi = read_pod<double>(is);

  c.f1_params = read_array(is);
  c.f2_params = read_array(is);
  c.critic_params = read_array(is);
  c.f1_velocity = read_array(is);
  c.f2_velocity = read_array(is);
  c.critic_adam_m = read_array(is);
  c.critic_adam_v = read_array(is);
  c.critic_steps = read_pod<std::int64_t>(is);

  const std::uint64_t recomputed =
      architecture_hash(c.model, c.critic, c.patch, c.cutoff, c.geometry,
                        c.clip_lo, c.clip_hi);
  if (recomputed != c.config_hash) {
    throw ConfigError("checkpoint " + path.string() +
                      " fails its own config-hash check");
  }
  if (expected_hash != 0 && expected_hash != c.config_hash) {
    throw ConfigError("checkpoint " + path.string() +
                      " was trained under a different configuration "
                      "(config-hash mismatch); refusing to load");
  }
  return c;
}

}  // namespace dvseg
