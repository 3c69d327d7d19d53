#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "dvseg/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dvseg;

namespace {

BinaryMask cube(const Eigen::Vector3i& shape, const Eigen::Vector3i& lo,
                const Eigen::Vector3i& hi) {
  BinaryMask m(shape);
  for (int k = lo.z(); k <= hi.z(); ++k)
    for (int j = lo.y(); j <= hi.y(); ++j)
      for (int i = lo.x(); i <= hi.x(); ++i) m(i, j, k) = 1;
  return m;
}

BinaryMask single(const Eigen::Vector3i& shape, const Eigen::Vector3i& p) {
  BinaryMask m(shape);
  m(p.x(), p.y(), p.z()) = 1;
  return m;
}

}  // namespace

TEST_CASE("dsc basics") {
  const Eigen::Vector3i s(8, 8, 8);
  const BinaryMask a = cube(s, {1, 1, 1}, {3, 3, 3});
  CHECK(dsc(a, a) == doctest::Approx(1.0));

  const BinaryMask b = cube(s, {5, 5, 5}, {7, 7, 7});
  CHECK(dsc(a, b) == doctest::Approx(0.0));

  const BinaryMask empty(s);
  CHECK(dsc(empty, empty) == doctest::Approx(1.0));
}

TEST_CASE("shifted cube dsc = 2/3") {
  const Eigen::Vector3i s(10, 10, 10);
  const BinaryMask a = cube(s, {2, 2, 2}, {4, 4, 4});
  const BinaryMask b = cube(s, {3, 2, 2}, {5, 4, 4});
  CHECK(std::abs(dsc(a, b) - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("two single voxels three apart") {
  const Eigen::Vector3i s(8, 8, 8);
  const BinaryMask p = single(s, {2, 4, 4});
  const BinaryMask g = single(s, {5, 4, 4});
  const SurfaceDistances d = surface_distances(p, g, {1, 1, 1});
  REQUIRE(d.pred_to_gt.size() == 1);
  REQUIRE(d.gt_to_pred.size() == 1);
  CHECK(d.pred_to_gt[0] == doctest::Approx(3.0));
  CHECK(hd(d) == doctest::Approx(3.0));
  CHECK(hd95(d) == doctest::Approx(3.0));
  CHECK(assd(d) == doctest::Approx(3.0));
}

TEST_CASE("identical masks give zero distances") {
  const Eigen::Vector3i s(12, 12, 12);
  const BinaryMask a = cube(s, {3, 4, 5}, {8, 9, 10});
  const SurfaceDistances d = surface_distances(a, a, {1.0, 1.2, 0.7});
  for (double v : d.pred_to_gt) CHECK(v == 0.0);
  for (double v : d.gt_to_pred) CHECK(v == 0.0);
  CHECK(hd(d) == 0.0);
}

TEST_CASE("empty mask raises EmptyStructureError naming the side") {
  const Eigen::Vector3i s(6, 6, 6);
  const BinaryMask empty(s);
  const BinaryMask full = cube(s, {1, 1, 1}, {2, 2, 2});
  try {
    surface_distances(empty, full, {1, 1, 1});
    FAIL("expected EmptyStructureError");
  } catch (const EmptyStructureError& e) {
    CHECK(e.side == "pred");
  }
  try {
    surface_distances(full, empty, {1, 1, 1});
    FAIL("expected EmptyStructureError");
  } catch (const EmptyStructureError& e) {
    CHECK(e.side == "gt");
  }
}

TEST_CASE("rve basics") {
  const Eigen::Vector3i s(8, 8, 8);
  const BinaryMask g = cube(s, {1, 1, 1}, {3, 3, 3});  // 27 voxels
  CHECK(rve(g, g, {1, 1, 1}) == doctest::Approx(0.0));

  BinaryMask p = cube(s, {1, 1, 1}, {3, 3, 3});
  // grow pred to 2x gt volume: add 27 more voxels
  int added = 0;
  for (Eigen::Index i = 0; i < p.size() && added < 27; ++i) {
    if (p[i] == 0) {
      p[i] = 1;
      ++added;
    }
  }
  CHECK(rve(p, g, {1, 1, 1}) == doctest::Approx(1.0));

  // |P|=27, |G|=30
  BinaryMask g30 = cube(s, {1, 1, 1}, {3, 3, 3});
  added = 0;
  for (Eigen::Index i = 0; i < g30.size() && added < 3; ++i) {
    if (g30[i] == 0) {
      g30[i] = 1;
      ++added;
    }
  }
  CHECK(rve(g, g30, {1, 1, 1}) == doctest::Approx(0.1));

  const BinaryMask empty(s);
  CHECK_THROWS_AS(rve(g, empty, {1, 1, 1}), EmptyStructureError);
}

TEST_CASE("random masks match the all-pairs oracle exactly") {
  auto rng = std::mt19937_64(2024);
  const Eigen::Vector3i s(8, 8, 8);
  const Eigen::Vector3d spacing(0.8, 1.0, 1.25);
  int done = 0;
  while (done < 40) {
    const BinaryMask p = testing::random_mask(s, rng, 0.3);
    const BinaryMask g = testing::random_mask(s, rng, 0.3);
    if (p.array().cast<int>().sum() == 0 || g.array().cast<int>().sum() == 0) {
      continue;
    }
    ++done;

    const SurfaceDistances d = surface_distances(p, g, spacing);
    const auto pb = oracle::boundary(p);
    const auto gb = oracle::boundary(g);
    const auto ref_pg = oracle::directed_distances(pb, gb, spacing);
    const auto ref_gp = oracle::directed_distances(gb, pb, spacing);

    REQUIRE(d.pred_to_gt.size() == ref_pg.size());
    REQUIRE(d.gt_to_pred.size() == ref_gp.size());
    for (std::size_t i = 0; i < ref_pg.size(); ++i) {
      CHECK(std::abs(d.pred_to_gt[i] - ref_pg[i]) < 1e-9);
    }
    for (std::size_t i = 0; i < ref_gp.size(); ++i) {
      CHECK(std::abs(d.gt_to_pred[i] - ref_gp[i]) < 1e-9);
    }

    const double ref_hd = std::max(
        *std::max_element(ref_pg.begin(), ref_pg.end()),
        *std::max_element(ref_gp.begin(), ref_gp.end()));
    CHECK(std::abs(hd(d) - ref_hd) < 1e-9);
    const double ref_hd95 = std::max(oracle::percentile95(ref_pg),
                                     oracle::percentile95(ref_gp));
    CHECK(std::abs(hd95(d) - ref_hd95) < 1e-9);
    const double ref_assd =
        (std::accumulate(ref_pg.begin(), ref_pg.end(), 0.0) +
         std::accumulate(ref_gp.begin(), ref_gp.end(), 0.0)) /
        static_cast<double>(ref_pg.size() + ref_gp.size());
    CHECK(std::abs(assd(d) - ref_assd) < 1e-9);

    CHECK(hd95(d) <= hd(d) + 1e-12);
    CHECK(assd(d) <= hd(d) + 1e-12);
  }
}

TEST_CASE("metrics are symmetric under pred/gt swap (except rve)") {
  auto rng = std::mt19937_64(5150);
  const Eigen::Vector3i s(8, 8, 8);
  const BinaryMask a = testing::random_mask(s, rng, 0.4);
  const BinaryMask b = testing::random_mask(s, rng, 0.4);
  const Eigen::Vector3d spacing(1, 1, 1);

  const SurfaceDistances ab = surface_distances(a, b, spacing);
  const SurfaceDistances ba = surface_distances(b, a, spacing);
  CHECK(hd(ab) == doctest::Approx(hd(ba)));
  CHECK(hd95(ab) == doctest::Approx(hd95(ba)));
  CHECK(assd(ab) == doctest::Approx(assd(ba)));
  CHECK(dsc(a, b) == doctest::Approx(dsc(b, a)));
}

TEST_CASE("doubling the spacing doubles distance metrics exactly") {
  auto rng = std::mt19937_64(6);
  const Eigen::Vector3i s(8, 8, 8);
  const BinaryMask a = testing::random_mask(s, rng, 0.35);
  const BinaryMask b = testing::random_mask(s, rng, 0.35);

  const SurfaceDistances d1 = surface_distances(a, b, {1, 1, 1});
  const SurfaceDistances d2 = surface_distances(a, b, {2, 2, 2});
  CHECK(hd(d2) == doctest::Approx(2.0 * hd(d1)).epsilon(1e-12));
  CHECK(hd95(d2) == doctest::Approx(2.0 * hd95(d1)).epsilon(1e-12));
  CHECK(assd(d2) == doctest::Approx(2.0 * assd(d1)).epsilon(1e-12));
  CHECK(dsc(a, b) == dsc(a, b));
  CHECK(rve(a, b, {1, 1, 1}) == doctest::Approx(rve(a, b, {2, 2, 2})));
}

TEST_CASE("evaluate_case: perfect prediction") {
  const Eigen::Vector3i s(16, 16, 16);
  LabelMask gt;
  gt.labels = Grid3<std::uint8_t>(s);
  for (int i = 2; i <= 5; ++i)
    for (int j = 6; j <= 9; ++j)
      for (int k = 6; k <= 9; ++k) gt.labels(i, j, k) = 1;
  for (int i = 10; i <= 13; ++i)
    for (int j = 6; j <= 9; ++j)
      for (int k = 6; k <= 9; ++k) gt.labels(i, j, k) = 2;

  const CaseReport r = evaluate_case(gt, gt);
  CHECK(r.average.dsc == doctest::Approx(1.0));
  CHECK(r.average.hd == doctest::Approx(0.0));
  CHECK(r.average.rve == doctest::Approx(0.0));
  CHECK(!r.left.flagged);
}

TEST_CASE("evaluate_case: missing left structure is flagged with sentinels") {
  const Eigen::Vector3i s(16, 16, 16);
  LabelMask gt;
  gt.labels = Grid3<std::uint8_t>(s);
  for (int i = 2; i <= 5; ++i) gt.labels(i, 8, 8) = 1;
  for (int i = 10; i <= 13; ++i) gt.labels(i, 8, 8) = 2;

  LabelMask pred = gt;
  for (Eigen::Index i = 0; i < pred.labels.size(); ++i) {
    if (pred.labels[i] == 1) pred.labels[i] = 0;
  }

  const CaseReport r = evaluate_case(pred, gt);
  CHECK(r.left.flagged);
  CHECK(r.left.dsc == 0.0);
  CHECK(r.left.rve == 1.0);
  const double diagonal = std::sqrt(3.0) * 16.0;
  CHECK(r.left.hd == doctest::Approx(diagonal));
  CHECK(!r.right.flagged);
  CHECK(r.right.dsc == doctest::Approx(1.0));
  CHECK(r.average.dsc == doctest::Approx(0.5));
  CHECK(r.average.flagged);
}

TEST_CASE("average equals the mean of left and right") {
  auto rng = std::mt19937_64(909);
  const Eigen::Vector3i s(12, 12, 12);
  LabelMask gt, pred;
  gt.labels = Grid3<std::uint8_t>(s);
  pred.labels = Grid3<std::uint8_t>(s);
  // blobs for both structures in both masks, jittered
  auto blob = [&](LabelMask& m, std::uint8_t label, int x0) {
    std::uniform_int_distribution<int> d(0, 1);
    for (int i = x0; i < x0 + 3; ++i)
      for (int j = 4; j < 8; ++j)
        for (int k = 4; k < 8; ++k)
          if (d(rng) == 1) m.labels(i, j, k) = label;
    m.labels(x0, 5, 5) = label;  // never empty
  };
  blob(gt, 1, 1);
  blob(gt, 2, 8);
  blob(pred, 1, 2);
  blob(pred, 2, 7);

  const CaseReport r = evaluate_case(pred, gt);
  CHECK(r.average.dsc == doctest::Approx(0.5 * (r.left.dsc + r.right.dsc)));
  CHECK(r.average.hd == doctest::Approx(0.5 * (r.left.hd + r.right.hd)));
  CHECK(r.average.assd == doctest::Approx(0.5 * (r.left.assd + r.right.assd)));
}
