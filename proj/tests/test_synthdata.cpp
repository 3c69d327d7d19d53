#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dvseg/nifti.hpp"
#include "dvseg/synthdata.hpp"
#include "test_support.hpp"

using namespace dvseg;

TEST_CASE("noiseless unit-contrast phantom thresholds back to its labels") {
  PhantomSpec spec;
  spec.shape = {48, 48, 48};
  spec.left_center = {14, 24, 24};
  spec.semi_axes = {6, 7, 5};
  spec.background_level = 0.0;
  spec.left_contrast = 1.0;
  spec.right_contrast = 1.0;
  spec.noise_sigma = 0.0;

  auto [vol, mask] = generate(spec);
  for (Eigen::Index i = 0; i < vol.data.size(); ++i) {
    const bool fg = vol.data[i] > 0.5f;
    CHECK(fg == (mask.labels[i] != 0));
  }
}

TEST_CASE("generation is deterministic per seed") {
  PhantomSpec spec;
  spec.seed = 42;
  auto [v1, m1] = generate(spec);
  auto [v2, m2] = generate(spec);
  CHECK((v1.data.array() == v2.data.array()).all());

  spec.seed = 43;
  auto [v3, m3] = generate(spec);
  CHECK((v1.data.array() != v3.data.array()).any());
}

TEST_CASE("label-1 voxel count matches brute-force ellipsoid enumeration") {
  PhantomSpec spec;
  spec.shape = {40, 40, 40};
  spec.left_center = {12, 20, 20};
  spec.semi_axes = {5, 6, 7};
  auto [vol, mask] = generate(spec);

  Eigen::Index expected = 0;
  for (int k = 0; k < 40; ++k) {
    for (int j = 0; j < 40; ++j) {
      for (int i = 0; i < 40; ++i) {
        const double rx = (i - 12.0) / 5.0;
        const double ry = (j - 20.0) / 6.0;
        const double rz = (k - 20.0) / 7.0;
        if (rx * rx + ry * ry + rz * rz <= 1.0) ++expected;
      }
    }
  }
  Eigen::Index got = 0;
  for (Eigen::Index i = 0; i < mask.labels.size(); ++i) {
    got += mask.labels[i] == kLeftLabel;
  }
  CHECK(got == expected);
}

TEST_CASE("symmetric noiseless phantom flips into its mirror") {
  PhantomSpec spec;
  spec.shape = {32, 32, 32};
  spec.left_center = {10, 16, 16};
  spec.semi_axes = {4, 5, 4};
  spec.left_contrast = 0.8;
  spec.right_contrast = 0.8;
  spec.noise_sigma = 0.0;
  auto [vol, mask] = generate(spec);

  for (int k = 0; k < 32; ++k) {
    for (int j = 0; j < 32; ++j) {
      for (int i = 0; i < 32; ++i) {
        const std::uint8_t a = mask.labels(i, j, k);
        const std::uint8_t b = mask.labels(31 - i, j, k);
        const std::uint8_t swapped = a == 1 ? 2 : a == 2 ? 1 : 0;
        CHECK(b == swapped);
      }
    }
  }
}

TEST_CASE("out-of-bounds ellipsoid is a config error") {
  PhantomSpec spec;
  spec.shape = {32, 32, 32};
  spec.left_center = {3, 16, 16};
  spec.semi_axes = {6, 5, 5};
  CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("left center must be left of the right center") {
  PhantomSpec spec;
  spec.shape = {32, 32, 32};
  spec.left_center = {20, 16, 16};  // mirror lands at 11 < 20
  spec.semi_axes = {4, 4, 4};
  CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("generate_dataset writes loadable pairs plus a manifest") {
  testing::TempDir tmp("synth_ds");
  DatasetSpec ds;
  ds.count = 3;
  ds.base.shape = {32, 32, 32};
  ds.base.left_center = {10, 16, 16};
  ds.base.semi_axes = {4, 5, 4};
  ds.center_jitter = 1.0;
  ds.axes_jitter = 0.5;
  ds.seed = 7;

  const auto entries = generate_dataset(ds, tmp.path());
  REQUIRE(entries.size() == 3);

  const auto ids = read_manifest_ids(tmp.path());
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == "phantom_000");

  for (const auto& id : ids) {
    // every generated file must pass volume_io validation
    const Volume v = load_volume(tmp.path() / (id + "_img.nii.gz"));
    const LabelMask m = load_labels(tmp.path() / (id + "_lbl.nii.gz"));
    CHECK(v.shape() == m.shape());
    Eigen::Index left = 0, right = 0;
    for (Eigen::Index i = 0; i < m.labels.size(); ++i) {
      left += m.labels[i] == kLeftLabel;
      right += m.labels[i] == kRightLabel;
    }
    CHECK(left > 0);
    CHECK(right > 0);
  }

  // same spec, same seed -> same bytes
  testing::TempDir tmp2("synth_ds2");
  generate_dataset(ds, tmp2.path());
  const Volume a = load_volume(tmp.path() / "phantom_001_img.nii.gz");
  const Volume b = load_volume(tmp2.path() / "phantom_001_img.nii.gz");
  CHECK((a.data.array() == b.data.array()).all());
}
