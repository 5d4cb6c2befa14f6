#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cassi/rgb_model.hpp"
#include "oracles.hpp"

using namespace cassi;
using oracle::Mat;
using oracle::Vec;

namespace {

SpectralResponseD random_response(Index channels, Index bands, oracle::Rng& rng) {
  Mat a(channels, bands);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = oracle::uniform(rng, 0.05, 1.0);
  return SpectralResponseD(a);
}

Mat stacked_pinv(const CubeD& t, Index s, const Mat& a) {
  const Mat phi = oracle::phi_matrix(t, s);
  const Mat phi_r = oracle::phi_r_matrix(a, t.rows(), t.cols());
  Mat stacked(phi.rows() + phi_r.rows(), phi.cols());
  stacked << phi, phi_r;
  return oracle::pinv(stacked);
}

Vec stacked_rhs(const PlaneD& y, const CubeD& y_r) {
  Vec v(y.size() + y_r.size());
  v << oracle::to_vec(y), y_r.vec();
  return v;
}

}  // namespace

TEST_CASE("spectral response validation") {
  CHECK(SpectralResponseD().empty());
  CHECK_THROWS_AS(SpectralResponseD(Mat::Constant(3, 4, -0.1)), ValidationError);
  Mat a = Mat::Constant(3, 4, 0.2);
  a.row(1).setZero();
  CHECK_THROWS_AS(SpectralResponseD{a}, ValidationError);
  a.row(1).setConstant(std::nan(""));
  CHECK_THROWS_AS(SpectralResponseD{a}, ValidationError);
}

TEST_CASE("rgb_forward") {
  const SpectralResponseD ones(Mat::Ones(1, 4));
  const CubeD flat = CubeD::Constant({3, 2, 4}, 0.25);
  const CubeD pan = rgb_forward(ones, flat);
  CHECK(pan.dims() == Dims{3, 2, 1});
  for (Index i = 0; i < pan.size(); ++i) CHECK(pan.data()[i] == doctest::Approx(1.0));
  CHECK(rgb_forward(ones, CubeD(3, 2, 4)).vec().isZero(0));
  CHECK_THROWS_AS(rgb_forward(ones, CubeD(3, 2, 3)), DimensionError);

  oracle::Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d = oracle::random_dims(rng, 4, 4, 3);
    const Index c = trial % 2 == 0 ? 3 : 1;
    const SpectralResponseD a = random_response(c, d.bands, rng);
    const CubeD x1 = oracle::random_cube(d, rng, -1, 1), x2 = oracle::random_cube(d, rng, -1, 1);
    const Mat phi_r = oracle::phi_r_matrix(a.matrix(), d.rows, d.cols);
    CHECK(oracle::rel_diff(rgb_forward(a, x1).vec(), phi_r * x1.vec()) <= 1e-14);
    const Vec yr = Vec::Random(phi_r.rows());
    CHECK(oracle::rel_diff(rgb_adjoint(a, CubeD({d.rows, d.cols, c}, yr)).vec(), phi_r.transpose() * yr) <= 1e-14);

    const double alpha = oracle::uniform(rng, -2, 2);
    const CubeD lhs = rgb_forward(a, alpha * x1 + x2);
    const CubeD rhs = alpha * rgb_forward(a, x1) + rgb_forward(a, x2);
    CHECK(norm(lhs - rhs) <= 1e-12 * std::max(1.0, norm(rhs)));
  }
}

TEST_CASE("Bayer layouts") {
  CHECK(bayer_channel(BayerPattern::RGGB, 0, 0) == 0);
  CHECK(bayer_channel(BayerPattern::RGGB, 0, 1) == 1);
  CHECK(bayer_channel(BayerPattern::RGGB, 1, 0) == 1);
  CHECK(bayer_channel(BayerPattern::RGGB, 1, 1) == 2);
  for (auto p : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG}) {
    int count[3] = {0, 0, 0};
    for (Index m = 0; m < 2; ++m)
      for (Index n = 0; n < 2; ++n) ++count[bayer_channel(p, m, n)];
    CHECK(count[0] == 1);
    CHECK(count[1] == 2);
    CHECK(count[2] == 1);
    CHECK(parse_bayer_pattern(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_bayer_pattern("XYZW"), ValidationError);
}

TEST_CASE("mosaic_simulate") {
  oracle::Rng rng(22);
  const Dims d{4, 6, 5};
  const SpectralResponseD equal_rows(Mat::Constant(3, 5, 0.2));
  const CubeD raw_flat = mosaic_simulate(equal_rows, CubeD::Constant(d, 0.7), BayerPattern::RGGB, 0.0, 1);
  CHECK(raw_flat.dims() == Dims{4, 6, 1});
  for (Index i = 0; i < raw_flat.size(); ++i) CHECK(raw_flat.data()[i] == doctest::Approx(0.7));

  const SpectralResponseD a = random_response(3, 5, rng);
  const CubeD x = oracle::random_cube(d, rng);
  const CubeD rgb = rgb_forward(a, x);
  const CubeD raw = mosaic_simulate(a, x, BayerPattern::RGGB, 0.0, 1);
  CHECK(raw(0, 0, 0) == rgb(0, 0, 0));
  CHECK(raw(0, 1, 0) == rgb(0, 1, 1));
  CHECK(raw(1, 1, 0) == rgb(1, 1, 2));

  CHECK(mosaic_simulate(a, x, BayerPattern::GRBG, 0.05, 9).vec() ==
        mosaic_simulate(a, x, BayerPattern::GRBG, 0.05, 9).vec());
  CHECK_THROWS_AS(mosaic_simulate(a, oracle::random_cube({3, 6, 5}, rng), BayerPattern::RGGB, 0.0, 1),
                  DimensionError);
  CHECK_THROWS_AS(mosaic_simulate(random_response(1, 5, rng), x, BayerPattern::RGGB, 0.0, 1), ValidationError);
}

TEST_CASE("demosaic_bilinear") {
  const CubeD constant = demosaic_bilinear(CubeD::Constant({4, 6, 1}, 0.3), BayerPattern::BGGR);
  for (Index i = 0; i < constant.size(); ++i) CHECK(constant.data()[i] == doctest::Approx(0.3));
  CHECK_THROWS_AS(demosaic_bilinear(CubeD(3, 4, 1), BayerPattern::RGGB), DimensionError);
  CHECK_THROWS_AS(demosaic_bilinear(CubeD(4, 4, 2), BayerPattern::RGGB), DimensionError);

  // Each channel an affine ramp: interpolation is exact away from the border.
  const Index H = 8, W = 10;
  CubeD truth(H, W, 3);
  for (Index m = 0; m < H; ++m)
    for (Index n = 0; n < W; ++n) {
      truth(m, n, 0) = 0.1 + 0.03 * m + 0.02 * n;
      truth(m, n, 1) = 0.5 - 0.01 * m + 0.04 * n;
      truth(m, n, 2) = 0.2 + 0.05 * m - 0.01 * n;
    }
  for (auto p : {BayerPattern::RGGB, BayerPattern::GBRG}) {
    CubeD raw(H, W, 1);
    for (Index m = 0; m < H; ++m)
      for (Index n = 0; n < W; ++n) raw(m, n, 0) = truth(m, n, bayer_channel(p, m, n));
    const CubeD out = demosaic_bilinear(raw, p);
    for (Index m = 1; m + 1 < H; ++m)
      for (Index n = 1; n + 1 < W; ++n)
        for (Index c = 0; c < 3; ++c) CHECK(out(m, n, c) == doctest::Approx(truth(m, n, c)).epsilon(1e-12));
    for (Index m = 0; m < H; ++m)
      for (Index n = 0; n < W; ++n) CHECK(out(m, n, bayer_channel(p, m, n)) == raw(m, n, 0));
  }

  // Mosaic then demosaic a scene whose channels are spatially constant.
  const SpectralResponseD a(Mat::Identity(3, 3));
  CubeD scene(4, 4, 3);
  scene.band(0).setConstant(0.2);
  scene.band(1).setConstant(0.5);
  scene.band(2).setConstant(0.9);
  const CubeD round = demosaic_bilinear(mosaic_simulate(a, scene, BayerPattern::RGGB, 0.0, 0), BayerPattern::RGGB);
  CHECK(norm(round - scene) <= 1e-15);
}

TEST_CASE("dual_backward reduces to backward without an RGB branch") {
  oracle::Rng rng(23);
  const Dims d{3, 4, 3};
  const SystemModelD model(oracle::random_mask(d, rng, false), 1);
  const PlaneD y = PlaneD::Random(3, model.measurementCols());
  const auto out = dual_backward(model, SpectralResponseD(), y, CubeD(3, 4, 3));
  CHECK(out.x.vec() == backward(model, y).vec());
  CHECK_FALSE(out.warning);
}

TEST_CASE("dual_backward with RGB consistent with the CASSI estimate") {
  oracle::Rng rng(24);
  const Dims d{4, 4, 3};
  const SystemModelD model(oracle::random_mask(d, rng, false), 1);
  const SpectralResponseD a = random_response(3, 3, rng);
  const PlaneD y = forward(model, oracle::random_cube(d, rng));
  const CubeD xb = backward(model, y);
  const auto out = dual_backward(model, a, y, rgb_forward(a, xb));
  CHECK(norm(out.x - xb) <= 1e-12 * norm(xb));
}

TEST_CASE("dual_backward matches the stacked pseudo-inverse") {
  oracle::Rng rng(25);
  SUBCASE("panchromatic, arbitrary data") {
    for (int trial = 0; trial < 10; ++trial) {
      const Dims d{oracle::uniform_int(rng, 2, 4), oracle::uniform_int(rng, 2, 4), 3};
      const CubeD t = oracle::random_mask(d, rng, false);
      const SystemModelD model(t, 1);
      const SpectralResponseD a = random_response(1, 3, rng);
      const PlaneD y = PlaneD::Random(d.rows, model.measurementCols());
      const CubeD y_r = oracle::random_cube({d.rows, d.cols, 1}, rng);
      const auto out = dual_backward(model, a, y, y_r, 1e-12, 2000);
      const Vec expect = stacked_pinv(t, 1, a.matrix()) * stacked_rhs(y, y_r);
      CHECK(oracle::rel_diff(out.x.vec(), expect) <= 1e-8);
    }
  }
  SUBCASE("RGB, noiseless data") {
    for (int trial = 0; trial < 10; ++trial) {
      const Dims d{oracle::uniform_int(rng, 2, 4), oracle::uniform_int(rng, 2, 4), 3};
      const Index s = oracle::uniform_int(rng, 0, 2);
      const CubeD t = oracle::random_mask(d, rng, false);
      const SystemModelD model(t, s);
      const SpectralResponseD a = random_response(3, 3, rng);
      const CubeD x = oracle::random_cube(d, rng);
      const PlaneD y = forward(model, x);
      const CubeD y_r = rgb_forward(a, x);
      const auto out = dual_backward(model, a, y, y_r, 1e-12, 2000);
      const Vec expect = stacked_pinv(t, s, a.matrix()) * stacked_rhs(y, y_r);
      CHECK(oracle::rel_diff(out.x.vec(), expect) <= 1e-8);

      const double resid = (y - forward(model, out.x)).norm() + norm(y_r - rgb_forward(a, out.x));
      CHECK(resid <= 1e-8 * stacked_rhs(y, y_r).norm());
    }
  }
}

TEST_CASE("dual_backward inner residual is monotone and non-convergence is flagged") {
  oracle::Rng rng(26);
  const Dims d{6, 6, 8};
  const SystemModelD model(oracle::random_mask(d, rng, true), 2);
  const SpectralResponseD a = random_response(3, 8, rng);
  const CubeD x = oracle::random_cube(d, rng);
  const PlaneD y = forward(model, x);
  const CubeD y_r = rgb_forward(a, oracle::random_cube(d, rng));

  const auto full = dual_backward(model, a, y, y_r);
  const auto& h = full.cg.residual_history;
  REQUIRE(h.size() >= 2);
  for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1] + 1e-9);

  const auto capped = dual_backward(model, a, y, y_r, 1e-14, 1);
  CHECK(capped.warning);
  CHECK(capped.cg.iterations == 1);
  CHECK_THROWS_AS(dual_backward(model, a, y, y_r, 0.0), ValidationError);
  CHECK_THROWS_AS(dual_backward(model, a, y, CubeD(6, 6, 1)), DimensionError);
}
