#include "dvseg/synthdata.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dvseg/nifti.hpp"

namespace dvseg {

namespace {

bool inside_ellipsoid(const Eigen::Vector3d& p, const Eigen::Vector3d& center,
                      const Eigen::Vector3d& axes) {
  const Eigen::Vector3d r = (p - center).cwiseQuotient(axes);
  return r.squaredNorm() <= 1.0;
}

void check_inside_volume(const Eigen::Vector3d& center,
                         const Eigen::Vector3d& axes,
                         const Eigen::Vector3i& shape, const char* name) {
  for (int a = 0; a < 3; ++a) {
    if (center[a] - axes[a] < 0.0 ||
        center[a] + axes[a] > static_cast<double>(shape[a] - 1)) {
      throw ConfigError(std::string("phantom ") + name +
                        " ellipsoid extends outside the volume on axis " +
                        std::to_string(a));
    }
  }
}

Grid3<float> smooth_gaussian(const Grid3<float>& g, double sigma) {
  if (sigma <= 0.0) return g;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double w = std::exp(-0.5 * (t * t) / (sigma * sigma));
    kernel[static_cast<std::size_t>(t + radius)] = static_cast<float>(w);
    norm += w;
  }
  for (auto& w : kernel) w = static_cast<float>(w / norm);

  const Eigen::Vector3i s = g.shape();
  Grid3<float> a = g, b(s);
  auto pass = [&](const Grid3<float>& src, Grid3<float>& dst, int axis) {
    for (int k = 0; k < s.z(); ++k) {
      for (int j = 0; j < s.y(); ++j) {
        for (int i = 0; i < s.x(); ++i) {
          float acc = 0.0f;
          for (int t = -radius; t <= radius; ++t) {
            int ii = i, jj = j, kk = k;
            (axis == 0 ? ii : axis == 1 ? jj : kk) += t;
            if (ii < 0 || jj < 0 || kk < 0 || ii >= s.x() || jj >= s.y() ||
                kk >= s.z()) {
              continue;  // zero padding; the noise field has zero mean anyway
            }
            acc += kernel[static_cast<std::size_t>(t + radius)] * src(ii, jj, kk);
          }
          dst(i, j, k) = acc;
        }
      }
    }
  };
  pass(a, b, 0);
  pass(b, a, 1);
  pass(a, b, 2);
  return b;
}

}  // namespace

void PhantomSpec::validate() const {
  if (shape.minCoeff() < 8) {
    throw ConfigError("phantom shape must be at least 8 voxels per axis");
  }
  if (semi_axes.minCoeff() <= 0.0) {
    throw ConfigError("phantom semi-axes must be positive");
  }
  check_inside_volume(left_center, semi_axes, shape, "left");
  check_inside_volume(right_center(), semi_axes, shape, "right");
  if (!(left_center.x() < right_center().x())) {
    throw ConfigError("left ellipsoid center must lie at a smaller first-axis "
                      "coordinate than the right one");
  }
  if (!(spacing.minCoeff() > 0.0)) {
    throw ConfigError("phantom spacing must be positive");
  }
}

std::pair<Volume, LabelMask> generate(const PhantomSpec& spec) {
  spec.validate();
  const Eigen::Vector3i s = spec.shape;
  const Eigen::Vector3d right = spec.right_center();

  LabelMask mask;
  mask.labels = Grid3<std::uint8_t>(s);
  mask.spacing = spec.spacing;
  mask.affine = Eigen::Matrix4d::Identity();
  mask.affine(0, 0) = spec.spacing.x();
  mask.affine(1, 1) = spec.spacing.y();
  mask.affine(2, 2) = spec.spacing.z();

  Volume vol;
  vol.data = Grid3<float>(s);
  vol.spacing = mask.spacing;
  vol.affine = mask.affine;

  for (int k = 0; k < s.z(); ++k) {
    for (int j = 0; j < s.y(); ++j) {
      for (int i = 0; i < s.x(); ++i) {
        const Eigen::Vector3d p(i, j, k);
        const bool in_left = inside_ellipsoid(p, spec.left_center, spec.semi_axes);
        const bool in_right = inside_ellipsoid(p, right, spec.semi_axes);
        if (in_left && in_right) {
          throw ConfigError("phantom ellipsoids overlap at voxel " +
                            shape_string(Eigen::Vector3i(i, j, k)));
        }
        double value = spec.background_level;
        if (in_left) {
          mask.labels(i, j, k) = kLeftLabel;
          value += spec.left_contrast;
        } else if (in_right) {
          mask.labels(i, j, k) = kRightLabel;
          value += spec.right_contrast;
        }
        vol.data(i, j, k) = static_cast<float>(value);
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    Grid3<float> noise(s);
    auto rng = make_rng(spec.seed, "phantom.noise");
    std::normal_distribution<float> dist(0.0f,
                                         static_cast<float>(spec.noise_sigma));
    for (Eigen::Index v = 0; v < noise.size(); ++v) noise[v] = dist(rng);
    noise = smooth_gaussian(noise, spec.noise_smoothing);
    vol.data.array() += noise.array();
  }
  return {std::move(vol), std::move(mask)};
}

namespace {

using nlohmann::json;

json spec_to_json(const PhantomSpec& s) {
  return json{
      {"shape", {s.shape.x(), s.shape.y(), s.shape.z()}},
      {"left_center", {s.left_center.x(), s.left_center.y(), s.left_center.z()}},
      {"semi_axes", {s.semi_axes.x(), s.semi_axes.y(), s.semi_axes.z()}},
      {"background_level", s.background_level},
      {"left_contrast", s.left_contrast},
      {"right_contrast", s.right_contrast},
      {"noise_sigma", s.noise_sigma},
      {"noise_smoothing", s.noise_smoothing},
      {"spacing", {s.spacing.x(), s.spacing.y(), s.spacing.z()}},
      {"seed", s.seed},
  };
}

}  // namespace

std::vector<ManifestEntry> generate_dataset(
    const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.count < 1) {
    throw ConfigError("dataset count must be at least 1");
  }
  std::filesystem::create_directories(out_dir);

  std::vector<ManifestEntry> entries;
  auto rng = make_rng(spec.seed, "dataset.jitter");
  std::uniform_real_distribution<double> center_d(-spec.center_jitter,
                                                  spec.center_jitter);
  std::uniform_real_distribution<double> axes_d(-spec.axes_jitter,
                                                spec.axes_jitter);
  for (int i = 0; i < spec.count; ++i) {
    PhantomSpec s = spec.base;
    s.seed = derive_seed(spec.seed, "case." + std::to_string(i));
    for (int a = 0; a < 3; ++a) {
      s.left_center[a] += center_d(rng);
      s.semi_axes[a] = std::max(3.0, s.semi_axes[a] + axes_d(rng));
    }
    std::ostringstream id;
    id << "phantom_" << std::setw(3) << std::setfill('0') << i;
    s.validate();

    auto [vol, mask] = generate(s);
    vol.id = id.str();
    mask.id = id.str();
    save_volume(vol, out_dir / (id.str() + "_img.nii.gz"));
    save_labels(mask, out_dir / (id.str() + "_lbl.nii.gz"));
    entries.push_back({id.str(), s});
  }

  json manifest;
  manifest["cases"] = json::array();
  for (const auto& e : entries) {
    json c = spec_to_json(e.spec);
    c["id"] = e.id;
    manifest["cases"].push_back(c);
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) {
    throw IoError("cannot write manifest in " + out_dir.string());
  }
  out << manifest.dump(2) << "\n";
  return entries;
}

std::vector<std::string> read_manifest_ids(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  std::vector<std::string> ids;
  for (const auto& c : manifest.at("cases")) {
    ids.push_back(c.at("id").get<std::string>());
  }
  return ids;
}

}  // namespace dvseg
