#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "dvseg/nifti.hpp"
#include "dvseg/synthdata.hpp"
#include "test_support.hpp"

using namespace dvseg;

namespace {

Volume make_volume(const Eigen::Vector3i& shape, std::uint64_t seed,
                   const Eigen::Vector3d& spacing = {1, 1, 1}) {
  auto rng = std::mt19937_64(seed);
  Volume v;
  v.data = testing::random_grid<float>(shape, rng, 0.0, 100.0);
  v.spacing = spacing;
  v.affine = Eigen::Matrix4d::Identity();
  v.affine(0, 0) = spacing.x();
  v.affine(1, 1) = spacing.y();
  v.affine(2, 2) = spacing.z();
  v.id = "test";
  return v;
}

}  // namespace

TEST_CASE("volume round-trip is bit-identical for float32 data") {
  testing::TempDir tmp("nifti_rt");
  const Volume v = make_volume({32, 32, 32}, 11);

  for (const char* name : {"case.nii", "case.nii.gz"}) {
    const auto path = tmp.path() / name;
    save_volume(v, path);
    const Volume r = load_volume(path);
    CHECK(r.shape() == v.shape());
    CHECK((r.data.array() == v.data.array()).all());
  }
}

TEST_CASE("spacing and affine survive a round trip") {
  testing::TempDir tmp("nifti_spacing");
  const Volume v = make_volume({64, 64, 64}, 3, {1.5, 1.5, 1.5});
  const auto path = tmp.path() / "spaced.nii.gz";
  save_volume(v, path);
  const Volume r = load_volume(path);
  CHECK(r.spacing.x() == doctest::Approx(1.5));
  CHECK(r.spacing.y() == doctest::Approx(1.5));
  CHECK(r.spacing.z() == doctest::Approx(1.5));
  CHECK((r.affine - v.affine).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("non-finite voxels are rejected with a count") {
  testing::TempDir tmp("nifti_nan");
  Volume v = make_volume({8, 8, 8}, 5);
  v.data(1, 2, 3) = std::numeric_limits<float>::quiet_NaN();
  v.data(4, 4, 4) = std::numeric_limits<float>::quiet_NaN();
  const auto path = tmp.path() / "bad.nii.gz";
  save_volume(v, path);

  CHECK_THROWS_WITH_AS(load_volume(path),
                       doctest::Contains("2 non-finite"), ValidationError);
}

TEST_CASE("missing and malformed files raise the right categories") {
  testing::TempDir tmp("nifti_errs");
  CHECK_THROWS_AS(load_volume(tmp.path() / "nope.nii.gz"), IoError);

  const auto junk = tmp.path() / "junk.nii";
  std::ofstream(junk) << "this is not a nifti file, definitely not 348 bytes "
                         "of header but long enough to read" << std::string(400, 'x');
  CHECK_THROWS_AS(load_volume(junk), FormatError);
}

TEST_CASE("label round-trip and validation") {
  testing::TempDir tmp("nifti_labels");
  PhantomSpec spec;
  spec.shape = {32, 32, 32};
  spec.left_center = {10, 16, 16};
  spec.semi_axes = {4, 5, 4};
  auto [vol, mask] = generate(spec);

  const auto path = tmp.path() / "labels.nii.gz";
  save_labels(mask, path);
  const LabelMask r = load_labels(path);
  CHECK((r.labels.array() == mask.labels.array()).all());

  // Values outside {0,1,2} are rejected.
  Volume fake;
  fake.data = Grid3<float>(Eigen::Vector3i(4, 4, 4));
  fake.data(0, 0, 0) = 7.0f;
  const auto bad = tmp.path() / "bad_labels.nii.gz";
  save_volume(fake, bad);
  CHECK_THROWS_AS(load_labels(bad), ValidationError);
}

TEST_CASE("4D multi-channel input is a format error") {
  testing::TempDir tmp("nifti_4d");
  const Volume v = make_volume({8, 8, 8}, 1);
  const auto path = tmp.path() / "vol.nii";
  save_volume(v, path);

  // Flip dim[0] to 4 and dim[4] to 2 in the raw header.
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  std::int16_t four = 4, two = 2;
  f.seekp(40);
  f.write(reinterpret_cast<char*>(&four), 2);
  f.seekp(48);
  f.write(reinterpret_cast<char*>(&two), 2);
  f.close();
  CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("4D"),
                       FormatError);
}
