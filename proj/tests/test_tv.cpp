#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cassi/tv.hpp"
#include "oracles.hpp"

using namespace cassi;
using oracle::Mat;
using oracle::Vec;

namespace {

Vec stack(const GradientFieldD& g) {
  Vec v(2 * g.dm.size());
  v << g.dm.vec(), g.dn.vec();
  return v;
}

// Random field obeying the Neumann convention: dm is zero on the last row, dn on the last column.
GradientFieldD random_field(const Dims& d, oracle::Rng& rng) {
  GradientFieldD p(d);
  p.dm = oracle::random_cube(d, rng, -1, 1);
  p.dn = oracle::random_cube(d, rng, -1, 1);
  for (Index l = 0; l < d.bands; ++l) {
    p.dm.band(l).bottomRows(1).setZero();
    p.dn.band(l).rightCols(1).setZero();
  }
  return p;
}

}  // namespace

TEST_CASE("gradient of a ramp along columns") {
  CubeD x(3, 4, 1);
  for (Index m = 0; m < 3; ++m)
    for (Index n = 0; n < 4; ++n) x(m, n, 0) = static_cast<double>(n);
  const auto g = gradient(x);
  CHECK(g.dm.vec().isZero(0));
  for (Index m = 0; m < 3; ++m)
    for (Index n = 0; n < 4; ++n) CHECK(g.dn(m, n, 0) == (n < 3 ? 1.0 : 0.0));
  CHECK(tv_value(x) == doctest::Approx(9.0));
}

TEST_CASE("divergence of an impulse") {
  GradientFieldD p(Dims{3, 3, 1});
  p.dm(1, 1, 0) = 1.0;
  const CubeD div = divergence(p);
  CHECK(div(1, 1, 0) == 1.0);
  CHECK(div(2, 1, 0) == -1.0);
  CHECK(div.vec().cwiseAbs().sum() == 2.0);

  GradientFieldD q(Dims{3, 3, 1});
  q.dn(1, 0, 0) = 0.5;
  const CubeD dq = divergence(q);
  CHECK(dq(1, 0, 0) == 0.5);
  CHECK(dq(1, 1, 0) == -0.5);
  CHECK(divergence(GradientFieldD(Dims{2, 2, 2})).vec().isZero(0));
}

TEST_CASE("gradient and divergence match the dense operator and are negative adjoints") {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Dims d = oracle::random_dims(rng, 6, 6, 3);
    const Mat grad = oracle::gradient_matrix(d);
    const CubeD x = oracle::random_cube(d, rng, -1, 1);
    const GradientFieldD p = random_field(d, rng);
    CHECK(oracle::rel_diff(stack(gradient(x)), grad * x.vec()) <= 1e-14);
    CHECK(oracle::rel_diff(divergence(p).vec(), -grad.transpose() * stack(p)) <= 1e-14);
    const double lhs = inner(gradient(x), p), rhs = -inner(x, divergence(p));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("dual field") {
  oracle::Rng rng(32);
  const CubeD x = oracle::random_cube({5, 6, 3}, rng, -1, 1);
  const auto p = dual_field(x);
  const CubeD mag = magnitude(p);
  const CubeD gmag = magnitude(gradient(x));
  for (Index i = 0; i < mag.size(); ++i) {
    if (gmag.data()[i] > 0.0) {
      CHECK(mag.data()[i] == doctest::Approx(1.0).epsilon(1e-14));
    } else {
      CHECK(mag.data()[i] == 0.0);
    }
  }
  CHECK(max_magnitude(p) <= 1.0 + 1e-14);
  // <grad x, dual_field(x)> = TV(x).
  CHECK(inner(gradient(x), p) == doctest::Approx(tv_value(x)).epsilon(1e-13));

  CubeD ramp(2, 3, 1);
  for (Index m = 0; m < 2; ++m)
    for (Index n = 0; n < 3; ++n) ramp(m, n, 0) = 2.0 * n;
  const auto pr = dual_field(ramp);
  CHECK(pr.dn(0, 0, 0) == 1.0);
  CHECK(pr.dn(1, 1, 0) == 1.0);
  CHECK(pr.dn(0, 2, 0) == 0.0);
  CHECK(pr.dm.vec().isZero(0));
  CHECK(dual_field(CubeD::Constant({3, 3, 2}, 4.0)).dm.vec().isZero(0));
}

TEST_CASE("TV examples") {
  CubeD step(1, 2, 1);
  step(0, 0, 0) = 0.25;
  step(0, 1, 0) = 1.0;
  CHECK(tv_value(step) == doctest::Approx(0.75));
  CHECK(tv_value(CubeD::Constant({4, 4, 3}, 2.5)) == 0.0);

  oracle::Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims d = oracle::random_dims(rng, 7, 7, 3);
    const CubeD x = oracle::random_cube(d, rng, -1, 1);
    const CubeD y = oracle::random_cube(d, rng, -1, 1);
    CHECK(tv_value(x) == doctest::Approx(oracle::tv_isotropic(x)).epsilon(1e-13));
    const double a = oracle::uniform(rng, -3, 3);
    CHECK(tv_value(CubeD(a * x)) == doctest::Approx(std::abs(a) * tv_value(x)).epsilon(1e-12));
    const double t = oracle::uniform(rng);
    CHECK(tv_value(CubeD(t * x + (1 - t) * y)) <= t * tv_value(x) + (1 - t) * tv_value(y) + 1e-12);
    CHECK(tv_value(CubeD(x + y)) <= tv_value(x) + tv_value(y) + 1e-12);
  }
}

TEST_CASE("subgradient inequality of the normalized-gradient divergence") {
  oracle::Rng rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    const Dims d = oracle::random_dims(rng, 8, 8, 3);
    const CubeD x = oracle::random_cube(d, rng, -1, 1);
    const CubeD y = oracle::random_cube(d, rng, -1, 1);
    const CubeD g = -1.0 * divergence(dual_field(x));
    CHECK(tv_value(y) - tv_value(x) - inner(g, CubeD(y - x)) >= -1e-10);
  }
}

TEST_CASE("tvds value") {
  oracle::Rng rng(35);
  const CubeD x = oracle::random_cube({4, 5, 2}, rng);
  CHECK(tvds_value(x, CubeD(4, 5, 2)) == doctest::Approx(tv_value(x)));
  // Guided by x itself, the regularizer vanishes at x.
  const CubeD g = -1.0 * divergence(dual_field(x));
  CHECK(std::abs(tvds_value(x, g)) <= 1e-12);
  // TV is 1-homogeneous, so any subgradient g satisfies TV(y) >= <g, y>.
  for (int i = 0; i < 20; ++i) CHECK(tvds_value(oracle::random_cube({4, 5, 2}, rng, -1, 1), g) >= -1e-12);
  CHECK_THROWS_AS(tvds_value(x, CubeD(4, 5, 3)), DimensionError);
}
