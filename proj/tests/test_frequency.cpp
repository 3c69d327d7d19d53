#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dvseg/frequency.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dvseg;

namespace {

double rel_err(double got, double want, double floor_val = 1e-12) {
  return std::abs(got - want) / std::max(std::abs(want), floor_val);
}

}  // namespace

TEST_CASE("constant volume has a DC-only spectrum") {
  Grid3<double> g(Eigen::Vector3i(8, 8, 8));
  g.array().setConstant(3.25);
  const SpectralDecomposition d = spectral_decompose(g);

  const double dc = d.amplitude(4, 4, 4);  // centered DC bin
  CHECK(dc == doctest::Approx(3.25 * 512).epsilon(1e-9));
  double off_center = 0.0;
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i)
        if (i != 4 || j != 4 || k != 4)
          off_center = std::max(off_center, d.amplitude(i, j, k));
  CHECK(off_center < 1e-9 * dc);
}

TEST_CASE("unit impulse at the origin has a flat spectrum") {
  Grid3<double> g(Eigen::Vector3i(6, 6, 6));
  g(0, 0, 0) = 1.0;
  const SpectralDecomposition d = spectral_decompose(g);
  CHECK(d.amplitude.array().minCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d.amplitude.array().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("decompose matches the triple-sum DFT oracle on random 4^3 input") {
  auto rng = std::mt19937_64(101);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = testing::random_grid<double>({4, 4, 4}, rng);
    const SpectralDecomposition d = spectral_decompose(g);
    const auto ref = oracle::dft3_centered(g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      CHECK(rel_err(d.amplitude[i], std::abs(ref[i]), 1e-9) < 1e-6);
      // phase is only meaningful where the amplitude is not ~0
      if (std::abs(ref[i]) > 1e-9) {
        const oracle::Cplx got = std::polar(d.amplitude[i], d.phase[i]);
        CHECK(std::abs(got - ref[i]) / std::abs(ref[i]) < 1e-6);
      }
    }
  }
}

TEST_CASE("build_filter cutoff 0 zeroes exactly the DC bin") {
  const HighPassFilter f = build_filter({8, 6, 4}, 0.0);
  Eigen::Index zeros = 0;
  for (Eigen::Index i = 0; i < f.mask.size(); ++i) zeros += f.mask[i] == 0;
  CHECK(zeros == 1);
  CHECK(f.mask(4, 3, 2) == 0);  // floor(n/2) per axis
}

TEST_CASE("near-1 cutoff leaves only corner frequencies beyond the Nyquist ball") {
  const HighPassFilter f = build_filter({8, 8, 8}, 0.999);
  // everything within the ball is gone; survivors all sit outside radius 0.999
  for (int k = 0; k < 8; ++k) {
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 8; ++i) {
        const double fx = (i - 4) / 4.0, fy = (j - 4) / 4.0, fz = (k - 4) / 4.0;
        const double r = std::sqrt(fx * fx + fy * fy + fz * fz);
        CHECK(f.mask(i, j, k) == (r > 0.999 ? 1 : 0));
      }
    }
  }
  CHECK(f.pass_fraction() < build_filter({8, 8, 8}, 0.5).pass_fraction());
}

TEST_CASE("build_filter rejects cutoff >= 1") {
  CHECK_THROWS_AS(build_filter({8, 8, 8}, 1.0), ValidationError);
}

TEST_CASE("pass fraction matches exhaustive enumeration at 8^3, cutoff 0.5") {
  const HighPassFilter f = build_filter({8, 8, 8}, 0.5, FilterGeometry::kRadial);
  // enumerate all 512 normalized radii directly
  Eigen::Index pass = 0;
  for (int k = 0; k < 8; ++k) {
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 8; ++i) {
        const double fx = (i - 4) / 4.0, fy = (j - 4) / 4.0, fz = (k - 4) / 4.0;
        if (std::sqrt(fx * fx + fy * fy + fz * fz) > 0.5) ++pass;
      }
    }
  }
  CHECK(f.pass_fraction() ==
        doctest::Approx(static_cast<double>(pass) / 512.0).epsilon(1e-12));
}

TEST_CASE("pass fraction is non-increasing in cutoff") {
  double prev = 2.0;
  for (double cutoff : {0.0, 0.05, 0.1, 0.2, 0.5, 0.9}) {
    const double frac = build_filter({12, 10, 8}, cutoff).pass_fraction();
    CHECK(frac <= prev);
    prev = frac;
  }
}

TEST_CASE("constant volume maps to ~zero under any true high-pass") {
  Grid3<float> g(Eigen::Vector3i(16, 16, 16));
  g.array().setConstant(0.7f);
  const auto out = apply_high_pass(g, build_filter({16, 16, 16}, 0.1));
  CHECK(out.array().abs().maxCoeff() <= 1e-6f);
}

TEST_CASE("identity mask reconstructs the input") {
  auto rng = std::mt19937_64(7);
  const auto g = testing::random_grid<double>({9, 8, 7}, rng);
  const auto out =
      apply_high_pass(g, build_filter({9, 8, 7}, 0.0, FilterGeometry::kIdentity));
  CHECK((out.array() - g.array()).abs().maxCoeff() <
        1e-5 * g.array().abs().maxCoeff());
}

TEST_CASE("high_frequency_view matches the DFT-mask-inverse oracle") {
  auto rng = std::mt19937_64(55);
  for (int trial = 0; trial < 3; ++trial) {
    const auto g = testing::random_grid<double>({4, 4, 4}, rng);
    const HighPassFilter f = build_filter({4, 4, 4}, 0.5);
    const auto got = apply_high_pass(g, f);
    const auto want = oracle::masked_inverse(oracle::dft3_centered(g), f.mask);
    const double scale = want.array().abs().maxCoeff();
    CHECK((got.array() - want.array()).abs().maxCoeff() < 1e-6 * scale);
  }
}

TEST_CASE("filter shape mismatch is rejected") {
  Grid3<float> g(Eigen::Vector3i(8, 8, 8));
  CHECK_THROWS_AS(apply_high_pass(g, build_filter({4, 4, 4}, 0.1)),
                  ValidationError);
}

TEST_CASE("Parseval bookkeeping: removed energy equals masked spectral energy") {
  auto rng = std::mt19937_64(13);
  const auto g = testing::random_grid<double>({8, 8, 8}, rng);
  const HighPassFilter f = build_filter({8, 8, 8}, 0.3);
  const auto out = apply_high_pass(g, f);

  const double e_in = g.array().square().sum();
  const double e_out = out.array().square().sum();
  CHECK(e_out <= e_in + 1e-9);

  const SpectralDecomposition d = spectral_decompose(g);
  double masked_energy = 0.0;
  for (Eigen::Index i = 0; i < d.amplitude.size(); ++i) {
    if (f.mask[i] == 0) masked_energy += d.amplitude[i] * d.amplitude[i];
  }
  masked_energy /= static_cast<double>(g.size());
  CHECK(rel_err(e_in - e_out, masked_energy) < 1e-5);
}

TEST_CASE("high-pass masking is linear") {
  auto rng = std::mt19937_64(77);
  const auto x = testing::random_grid<double>({6, 6, 6}, rng);
  const auto z = testing::random_grid<double>({6, 6, 6}, rng);
  const HighPassFilter f = build_filter({6, 6, 6}, 0.4);
  const double a = 1.7, b = -0.6;

  Grid3<double> combo(x.shape());
  combo.array() = a * x.array() + b * z.array();
  const auto lhs = apply_high_pass(combo, f);
  const auto fx = apply_high_pass(x, f);
  const auto fz = apply_high_pass(z, f);
  Grid3<double> rhs(x.shape());
  rhs.array() = a * fx.array() + b * fz.array();
  const double scale = rhs.array().abs().maxCoeff();
  CHECK((lhs.array() - rhs.array()).abs().maxCoeff() < 1e-5 * scale);
}

TEST_CASE("masking is a projection (idempotent)") {
  auto rng = std::mt19937_64(88);
  const auto x = testing::random_grid<double>({8, 8, 8}, rng);
  const HighPassFilter f = build_filter({8, 8, 8}, 0.25);
  const auto once = apply_high_pass(x, f);
  const auto twice = apply_high_pass(once, f);
  const double scale = once.array().abs().maxCoeff();
  CHECK((once.array() - twice.array()).abs().maxCoeff() < 1e-9 * scale);
}

TEST_CASE("output energy is non-increasing in cutoff") {
  auto rng = std::mt19937_64(91);
  const auto x = testing::random_grid<double>({10, 10, 10}, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double cutoff : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const auto out = apply_high_pass(x, build_filter({10, 10, 10}, cutoff));
    const double e = out.array().square().sum();
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
}

TEST_CASE("Volume-level wrappers carry geometry and compute |v - vhat|") {
  auto rng = std::mt19937_64(3);
  Volume v;
  v.data = testing::random_grid<float>({8, 8, 8}, rng, 0.0, 1.0);
  v.spacing = {1.5, 1.5, 1.5};
  v.id = "case7";

  const Volume hf = high_frequency_view(v, build_filter({8, 8, 8}, 0.1));
  CHECK(hf.spacing == v.spacing);
  CHECK(hf.id == v.id);

  const Volume diff = difference_map(v, hf);
  CHECK(diff.data.array().minCoeff() >= 0.0f);
  const Volume zero_diff = difference_map(v, v);
  CHECK(zero_diff.data.array().maxCoeff() == 0.0f);

  Volume zeros = v;
  zeros.data.array().setZero();
  const Volume abs_v = difference_map(v, zeros);
  CHECK((abs_v.data.array() == v.data.array().abs()).all());
}
