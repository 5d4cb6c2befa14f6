#pragma once

// RGB / panchromatic branch of the dual-camera system.
//
// Under linear channel interpolation the demosaicked image satisfies
// (Y_r)_(3) = A X_(3), i.e. Phi_r = A kron I_HW in the band-major
// vectorization used throughout.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

#include "cassi/cassi_model.hpp"
#include "cassi/cg.hpp"
#include "cassi/tensor.hpp"

namespace cassi {

template <typename Scalar>
class SpectralResponse {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  SpectralResponse() = default;
  explicit SpectralResponse(Matrix a) : a_(std::move(a)) {
    if (a_.rows() == 0) return;  // branch absent
    if (!a_.allFinite()) throw ValidationError("spectral response contains non-finite values");
    if ((a_.array() < Scalar(0)).any()) throw ValidationError("spectral response entries must be >= 0");
    for (Index c = 0; c < a_.rows(); ++c) {
      if (!(a_.row(c).array() > Scalar(0)).any()) {
        throw ValidationError("spectral response row " + std::to_string(c) + " has no positive entry");
      }
    }
  }

  const Matrix& matrix() const { return a_; }
  Index channels() const { return a_.rows(); }
  Index bands() const { return a_.cols(); }
  bool empty() const { return a_.rows() == 0; }

 private:
  Matrix a_;
};

using SpectralResponseD = SpectralResponse<double>;

template <typename Scalar>
Cube<Scalar> rgb_forward(const SpectralResponse<Scalar>& a, const Cube<Scalar>& x) {
  if (a.empty() || a.bands() != x.bands()) {
    throw DimensionError("rgb_forward: response has " + std::to_string(a.bands()) + " bands, cube has " +
                         std::to_string(x.bands()));
  }
  Cube<Scalar> out(x.rows(), x.cols(), a.channels());
  out.unfolding().noalias() = a.matrix() * x.unfolding();
  return out;
}

/// Phi_r^T y_r.
template <typename Scalar>
Cube<Scalar> rgb_adjoint(const SpectralResponse<Scalar>& a, const Cube<Scalar>& y_r) {
  if (a.empty() || a.channels() != y_r.bands()) throw DimensionError("rgb_adjoint: channel mismatch");
  Cube<Scalar> out(y_r.rows(), y_r.cols(), a.bands());
  out.unfolding().noalias() = a.matrix().transpose() * y_r.unfolding();
  return out;
}

enum class BayerPattern { RGGB, BGGR, GRBG, GBRG };

inline BayerPattern parse_bayer_pattern(const std::string& name) {
  if (name == "RGGB" || name == "rggb") return BayerPattern::RGGB;
  if (name == "BGGR" || name == "bggr") return BayerPattern::BGGR;
  if (name == "GRBG" || name == "grbg") return BayerPattern::GRBG;
  if (name == "GBRG" || name == "gbrg") return BayerPattern::GBRG;
  throw ValidationError("unknown Bayer pattern '" + name + "'");
}

inline std::string to_string(BayerPattern p) {
  switch (p) {
    case BayerPattern::RGGB: return "RGGB";
    case BayerPattern::BGGR: return "BGGR";
    case BayerPattern::GRBG: return "GRBG";
    case BayerPattern::GBRG: return "GBRG";
  }
  return "RGGB";
}

/// Channel (0 = R, 1 = G, 2 = B) sampled at 0-based pixel (m, n).
inline int bayer_channel(BayerPattern p, Index m, Index n) {
  static constexpr std::array<std::array<int, 4>, 4> layout = {{
      {0, 1, 1, 2},  // RGGB
      {2, 1, 1, 0},  // BGGR
      {1, 0, 2, 1},  // GRBG
      {1, 2, 0, 1},  // GBRG
  }};
  return layout[static_cast<int>(p)][(m % 2) * 2 + (n % 2)];
}

/// Single-channel raw CFA frame: each pixel keeps the channel its Bayer site samples.
template <typename Scalar>
Cube<Scalar> mosaic_simulate(const SpectralResponse<Scalar>& a, const Cube<Scalar>& x, BayerPattern pattern,
                             double noise_sigma, std::uint64_t seed) {
  if (a.channels() != 3) throw ValidationError("mosaic_simulate needs a 3-channel response");
  if (x.rows() % 2 != 0 || x.cols() % 2 != 0) {
    throw DimensionError("mosaic_simulate: Bayer mosaic needs even H and W, got " + to_string(x.dims()));
  }
  const Cube<Scalar> rgb = rgb_forward(a, x);
  Cube<Scalar> raw(x.rows(), x.cols(), 1);
  for (Index m = 0; m < x.rows(); ++m)
    for (Index n = 0; n < x.cols(); ++n) raw(m, n, 0) = rgb(m, n, bayer_channel(pattern, m, n));
  add_gaussian_noise(raw.vec(), noise_sigma, seed);
  return raw;
}

/// Bilinear demosaic. Missing samples are the normalized 3x3 average of
/// same-channel neighbours; borders reflect without repeating the edge, which
/// keeps the Bayer parity of mirrored sites.
template <typename Scalar>
Cube<Scalar> demosaic_bilinear(const Cube<Scalar>& raw, BayerPattern pattern) {
  if (raw.bands() != 1) throw DimensionError("demosaic_bilinear expects a single-channel raw frame");
  const Index H = raw.rows(), W = raw.cols();
  if (H % 2 != 0 || W % 2 != 0) throw DimensionError("demosaic_bilinear needs even H and W");
  auto reflect = [](Index i, Index size) {
    if (i < 0) return -i;
    if (i >= size) return 2 * size - 2 - i;
    return i;
  };
  // Green: cross kernel [0 1 0; 1 4 1; 0 1 0] / 4. Red/blue: [1 2 1; 2 4 2; 1 2 1] / 4.
  static constexpr Scalar kGreen[3][3] = {{0, 1, 0}, {1, 4, 1}, {0, 1, 0}};
  static constexpr Scalar kRedBlue[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
  Cube<Scalar> out(H, W, 3);
  for (int c = 0; c < 3; ++c) {
    const auto& k = c == 1 ? kGreen : kRedBlue;
    for (Index m = 0; m < H; ++m) {
      for (Index n = 0; n < W; ++n) {
        if (bayer_channel(pattern, m, n) == c) {
          out(m, n, c) = raw(m, n, 0);
          continue;
        }
        Scalar acc = 0;
        for (int dm = -1; dm <= 1; ++dm) {
          for (int dn = -1; dn <= 1; ++dn) {
            const Index mm = reflect(m + dm, H), nn = reflect(n + dn, W);
            if (bayer_channel(pattern, mm, nn) == c) acc += k[dm + 1][dn + 1] * raw(mm, nn, 0);
          }
        }
        out(m, n, c) = acc / Scalar(4);
      }
    }
  }
  return out;
}

template <typename Scalar>
struct DualBackwardResult {
  Cube<Scalar> x;
  CgReport cg;
  bool warning = false;  // inner solve hit cg_max_iter before cg_tol
};

/// Minimum-norm least-squares solution of the stacked system [Phi; Phi_r] x = [y; y_r]:
///   x = Phi^+ y + (I - Phi^+ Phi) Phi_r^T F^+ (y_r - Phi_r Phi^+ y),
///   F = Phi_r (I - Phi^+ Phi) Phi_r^T.
/// F^+ b is obtained matrix-free by CGLS on min ||b - F r||.
template <typename Scalar, typename Derived>
DualBackwardResult<Scalar> dual_backward(const SystemModel<Scalar>& model, const SpectralResponse<Scalar>& a,
                                         const Eigen::MatrixBase<Derived>& y, const Cube<Scalar>& y_r,
                                         double cg_tol = 1e-9, int cg_max_iter = 500) {
  if (!(cg_tol > 0.0)) throw ValidationError("cg_tol must be > 0");
  if (cg_max_iter < 1) throw ValidationError("cg_max_iter must be >= 1");
  DualBackwardResult<Scalar> result;
  result.x = backward(model, y);
  if (a.empty()) {
    result.cg.converged = true;
    return result;
  }
  const Dims& d = model.dims();
  if (a.bands() != d.bands) throw DimensionError("dual_backward: response band count mismatch");
  if (y_r.rows() != d.rows || y_r.cols() != d.cols || y_r.bands() != a.channels()) {
    throw DimensionError("dual_backward: RGB image shape mismatch");
  }
  auto null_projection = [&](const Cube<Scalar>& w) {
    Cube<Scalar> out = w;
    out -= backward(model, forward(model, w));
    return out;
  };
  const Dims rgb_dims{d.rows, d.cols, a.channels()};
  auto apply_f = [&](const Vector<Scalar>& v) -> Vector<Scalar> {
    const Cube<Scalar> lifted = rgb_adjoint(a, Cube<Scalar>(rgb_dims, v));
    return rgb_forward(a, null_projection(lifted)).vec();
  };
  const Vector<Scalar> b = y_r.vec() - rgb_forward(a, result.x).vec();
  Vector<Scalar> r;
  result.cg = cgls_symmetric<Scalar>(apply_f, b, r, cg_tol, cg_max_iter);
  result.warning = !result.cg.converged;
  result.x += null_projection(rgb_adjoint(a, Cube<Scalar>(rgb_dims, r)));
  return result;
}

}  // namespace cassi
