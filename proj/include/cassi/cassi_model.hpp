#pragma once

// SD-CASSI discrete system: Y = sum_l f_ST(X .* T)_{:,:,l} + N.
//
// The sensing matrix Phi is never formed. Its Gram matrix Phi Phi^T is
// diagonal with entries Lambda = sum_l f_ST(T .* T)_{:,:,l}, which gives the
// closed-form pseudo-inverse used by backward().

#include <cstdint>
#include <random>
#include <string>

#include "cassi/tensor.hpp"

namespace cassi {

template <typename Scalar>
class SystemModel {
 public:
  SystemModel() = default;

  /// Validates T (finite, in [0,1]) and precomputes Lambda and the sheared
  /// transmittance used by the two-stage reference path.
  SystemModel(Cube<Scalar> transmittance, Index shear_step)
      : t_(std::move(transmittance)), s_(shear_step) {
    if (s_ < 0) throw ValidationError("shear step must be non-negative");
    if (t_.empty()) throw DimensionError("transmittance is empty");
    if (!t_.allFinite()) throw ValidationError("transmittance contains non-finite values");
    if ((t_.vec().array() < Scalar(0)).any() || (t_.vec().array() > Scalar(1)).any()) {
      throw ValidationError("transmittance entries must lie in [0, 1]");
    }
    lambda_ = Plane<Scalar>::Zero(t_.rows(), measurementCols());
    for (Index l = 0; l < t_.bands(); ++l) {
      lambda_.middleCols(s_ * l, t_.cols()) += t_.band(l).cwiseAbs2();
    }
    t_sheared_ = shear_transform(t_, s_).data;
  }

  const Cube<Scalar>& transmittance() const { return t_; }
  const Cube<Scalar>& shearedTransmittance() const { return t_sheared_; }
  const Plane<Scalar>& lambda() const { return lambda_; }
  Index shearStep() const { return s_; }
  const Dims& dims() const { return t_.dims(); }
  Index measurementCols() const { return sheared_width(t_.cols(), t_.bands(), s_); }

  void requireCube(const Cube<Scalar>& x, const char* what) const {
    if (x.dims() != dims()) {
      throw DimensionError(std::string(what) + ": cube " + to_string(x.dims()) +
                           " does not match system " + to_string(dims()));
    }
  }

  template <typename Derived>
  void requireMeasurement(const Eigen::MatrixBase<Derived>& y, const char* what) const {
    if (y.rows() != t_.rows() || y.cols() != measurementCols()) {
      throw DimensionError(std::string(what) + ": measurement is " + std::to_string(y.rows()) + "x" +
                           std::to_string(y.cols()) + ", expected " + std::to_string(t_.rows()) + "x" +
                           std::to_string(measurementCols()));
    }
  }

 private:
  Cube<Scalar> t_;
  Index s_ = 0;
  Plane<Scalar> lambda_;
  Cube<Scalar> t_sheared_;
};

using SystemModelD = SystemModel<double>;

template <typename Scalar>
SystemModel<Scalar> build_system(Cube<Scalar> transmittance, Index shear_step) {
  return SystemModel<Scalar>(std::move(transmittance), shear_step);
}

/// Y = Phi x, no noise.
template <typename Scalar>
Plane<Scalar> forward(const SystemModel<Scalar>& model, const Cube<Scalar>& x) {
  model.requireCube(x, "forward");
  const auto& t = model.transmittance();
  const Index W = t.cols(), s = model.shearStep();
  Plane<Scalar> y = Plane<Scalar>::Zero(t.rows(), model.measurementCols());
  for (Index l = 0; l < t.bands(); ++l) y.middleCols(s * l, W) += x.band(l).cwiseProduct(t.band(l));
  return y;
}

/// T .* f_ST^dagger(plane repeated L times), without materializing the repeat.
template <typename Scalar, typename Derived>
Cube<Scalar> modulated_crop(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& plane) {
  const auto& t = model.transmittance();
  const Index W = t.cols(), s = model.shearStep();
  Cube<Scalar> out(t.dims());
  for (Index l = 0; l < t.bands(); ++l) out.band(l) = t.band(l).cwiseProduct(plane.middleCols(s * l, W));
  return out;
}

/// Phi^T y.
template <typename Scalar, typename Derived>
Cube<Scalar> adjoint(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y) {
  model.requireMeasurement(y, "adjoint");
  return modulated_crop(model, y);
}

/// Minimum-norm least-squares estimate Phi^dagger y = T .* f_ST^dagger((Y ./ Lambda) repeated).
template <typename Scalar, typename Derived>
Cube<Scalar> backward(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y) {
  model.requireMeasurement(y, "backward");
  const Plane<Scalar> ratio = safe_divide(y, model.lambda());
  return modulated_crop(model, ratio);
}

/// Reference path via the shifted transmittance T' = f_ST(T): the full
/// H x (W + s(L-1)) x L product is formed before cropping.
template <typename Scalar, typename Derived>
Cube<Scalar> two_stage_backward(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y) {
  model.requireMeasurement(y, "two_stage_backward");
  const Plane<Scalar> ratio = safe_divide(y, model.lambda());
  const Cube<Scalar>& t_shift = model.shearedTransmittance();
  Cube<Scalar> full(t_shift.dims());
  for (Index l = 0; l < full.bands(); ++l) full.band(l) = t_shift.band(l).cwiseProduct(ratio);
  return inverse_shear(full, model.shearStep(), model.dims().cols);
}

/// Adds i.i.d. N(0, sigma^2) to every entry, deterministic per seed.
template <typename Derived>
void add_gaussian_noise(Eigen::DenseBase<Derived>& target, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  if (sigma == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  // Row-major traversal order is part of the determinism contract.
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      target(i, j) += static_cast<typename Derived::Scalar>(gauss(rng));
}

template <typename Scalar>
Plane<Scalar> simulate(const SystemModel<Scalar>& model, const Cube<Scalar>& x, double noise_sigma,
                       std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  Plane<Scalar> y = forward(model, x);
  add_gaussian_noise(y, noise_sigma, seed);
  return y;
}

}  // namespace cassi
