#pragma once

// Fixed-point solver for TVDS-regularized fusion:
//
//   argmin_X  1/2 ||X - Z||^2 + mu (TV(X) + <div P_ref, X>)
//
// Iterates P <- (P + tau grad X) / (1 + tau |grad X|), then
// X <- Z - mu div P_ref + mu div P, from P = 0 and X = Z.

#include <cstdint>
#include <optional>

#include "cassi/tensor.hpp"
#include "cassi/tv.hpp"

namespace cassi {

struct FusionParams {
  double mu = 0.5;
  double tau = 0.125;
  int max_iters = 30;
  /// Optional early exit on ||X_k - X_{k-1}|| <= early_exit_tol * ||Z||; 0 disables.
  double early_exit_tol = 0.0;

  void validate() const {
    if (!(mu >= 0.0)) throw ValidationError("fusion mu must be >= 0");
    if (!(tau > 0.0)) throw ValidationError("fusion tau must be > 0");
    if (max_iters < 1) throw ValidationError("fusion iteration count must be >= 1");
    if (!(early_exit_tol >= 0.0)) throw ValidationError("early_exit_tol must be >= 0");
  }

  /// Convergence is guaranteed for 0 < mu * tau < 1/8.
  bool stepWithinBound() const { return mu * tau < 0.125; }
};

template <typename Scalar>
struct FusionResult {
  Cube<Scalar> x;
  DualField<Scalar> p;
  int iterations = 0;
  bool step_warning = false;  // mu * tau >= 1/8
  std::uint64_t voxel_ops = 0;
};

template <typename Scalar>
FusionResult<Scalar> fuse(const Cube<Scalar>& z, const DualField<Scalar>& p_ref, const FusionParams& params,
                          const std::optional<DualField<Scalar>>& p_init = std::nullopt) {
  params.validate();
  if (p_ref.dims() != z.dims()) throw DimensionError("fuse: reference field shape mismatch");
  if (p_init && p_init->dims() != z.dims()) throw DimensionError("fuse: initial field shape mismatch");
  if (!z.allFinite()) throw ValidationError("fuse: input cube contains non-finite values");

  const Scalar mu = static_cast<Scalar>(params.mu);
  const Scalar tau = static_cast<Scalar>(params.tau);
  const Index n = z.size();

  FusionResult<Scalar> out;
  out.step_warning = !params.stepWithinBound();
  out.p = p_init ? *p_init : DualField<Scalar>::Zero(z.dims());

  Cube<Scalar> base = z;
  if (mu != Scalar(0)) base -= mu * divergence(p_ref);

  out.x = z;
  const Scalar z_norm = norm(z);
  for (int k = 0; k < params.max_iters; ++k) {
    const GradientField<Scalar> g = gradient(out.x);
    const auto denom = (Scalar(1) + tau * (g.dm.vec().array().square() + g.dn.vec().array().square()).sqrt()).eval();
    out.p.dm.vec() = ((out.p.dm.vec().array() + tau * g.dm.vec().array()) / denom).matrix();
    out.p.dn.vec() = ((out.p.dn.vec().array() + tau * g.dn.vec().array()) / denom).matrix();

    Cube<Scalar> next = base;
    if (mu != Scalar(0)) next += mu * divergence(out.p);
    out.iterations = k + 1;
    out.voxel_ops += 6 * static_cast<std::uint64_t>(n);

    const bool stop =
        params.early_exit_tol > 0.0 && (next.vec() - out.x.vec()).norm() <= params.early_exit_tol * z_norm;
    out.x = std::move(next);
    if (stop) break;
  }
  return out;
}

/// 1/2 ||x - z||^2 + mu (TV(x) + <div p_ref, x>).
template <typename Scalar>
Scalar fusion_objective(const Cube<Scalar>& z, const Cube<Scalar>& x, const DualField<Scalar>& p_ref,
                        double mu) {
  z.requireSameShape(x, "fusion_objective");
  if (p_ref.dims() != x.dims()) throw DimensionError("fusion_objective: reference field shape mismatch");
  const Scalar data = Scalar(0.5) * (x.vec() - z.vec()).squaredNorm();
  if (mu == 0.0) return data;
  return data + static_cast<Scalar>(mu) * (tv_value(x) + inner(divergence(p_ref), x));
}

/// ||x - z - mu div p + mu div p_ref||: the stationarity equation with p as the dual field of x.
template <typename Scalar>
Scalar euler_lagrange_residual(const Cube<Scalar>& z, const Cube<Scalar>& x, const DualField<Scalar>& p,
                               const DualField<Scalar>& p_ref, double mu) {
  const Scalar m = static_cast<Scalar>(mu);
  Cube<Scalar> r = x - z;
  r -= m * divergence(p);
  r += m * divergence(p_ref);
  return norm(r);
}

/// ||(|grad x| p) - grad x||: zero iff p is a valid normalized gradient of x
/// wherever the gradient is nonzero (the fixed point of the P update).
template <typename Scalar>
Scalar dual_consistency_residual(const Cube<Scalar>& x, const DualField<Scalar>& p) {
  const GradientField<Scalar> g = gradient(x);
  const auto mag = (g.dm.vec().array().square() + g.dn.vec().array().square()).sqrt().eval();
  const Scalar rm = (mag * p.dm.vec().array() - g.dm.vec().array()).matrix().squaredNorm();
  const Scalar rn = (mag * p.dn.vec().array() - g.dn.vec().array()).matrix().squaredNorm();
  return std::sqrt(rm + rn);
}

}  // namespace cassi
