#pragma once

// Staged ADMM for
//
//   argmin_X  1/2 ||y - Phi x||^2 + mu (TV(X) + <div P_ref, X>)
//
// with splitting X = Z and scaled multiplier U. The X-step has the closed
// Woodbury form exploiting the diagonal Gram matrix; the Z-step is a TVDS
// fusion with weight mu / rho. Reconstruction runs in stages; the dual field
// of the reference is recomputed at every stage start and, when an RGB
// subspace is available, the reference is refreshed by LRDS projection.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cassi/cassi_model.hpp"
#include "cassi/cg.hpp"
#include "cassi/fusion.hpp"
#include "cassi/reference.hpp"
#include "cassi/rgb_model.hpp"
#include "cassi/tensor.hpp"
#include "cassi/tv.hpp"

namespace cassi {

enum class ReconstructionMode { Tvds, TvdsStar, TvOnly };

inline ReconstructionMode parse_mode(const std::string& s) {
  if (s == "tvds") return ReconstructionMode::Tvds;
  if (s == "tvds_star") return ReconstructionMode::TvdsStar;
  if (s == "tv_only") return ReconstructionMode::TvOnly;
  throw ValidationError("unknown reconstruction mode '" + s + "' (expected tvds, tvds_star or tv_only)");
}

inline std::string to_string(ReconstructionMode m) {
  switch (m) {
    case ReconstructionMode::Tvds: return "tvds";
    case ReconstructionMode::TvdsStar: return "tvds_star";
    case ReconstructionMode::TvOnly: return "tv_only";
  }
  return "tvds";
}

/// AsPrinted: Z, U, then X inside each iteration, starting from X^1.
/// Conventional: X, Z, then U.
enum class LoopOrder { AsPrinted, Conventional };

struct AdmmParams {
  double rho = 0.03;
  double mu = 0.015;                // stage-1 value, scaled by growth^(1 - stage)
  double tau = 0.125;               // stage-1 value, scaled by growth^(stage - 1)
  double stage_growth = 1.2;
  int inner_iters = 30;             // K
  int iters_per_stage = 10;         // N
  int num_stages = 30;              // N_stage
  int ref_update_interval = 10;     // in stages
  LoopOrder order = LoopOrder::AsPrinted;
  bool warm_start_dual = false;     // carry P across ADMM iterations within a stage
  double star_cg_tol = 1e-8;
  int star_cg_max_iter = 500;
  bool strict = false;              // CG non-convergence throws NumericalError

  void validate() const {
    if (!(rho > 0.0)) throw ValidationError("rho must be > 0");
    if (!(mu >= 0.0)) throw ValidationError("mu must be >= 0");
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    if (!(stage_growth > 0.0)) throw ValidationError("stage growth must be > 0");
    if (inner_iters < 1 || iters_per_stage < 1 || num_stages < 1 || ref_update_interval < 1) {
      throw ValidationError("iteration counts and update interval must be >= 1");
    }
  }

  double stageMu(int stage) const { return mu * std::pow(stage_growth, 1 - stage); }
  double stageTau(int stage) const { return tau * std::pow(stage_growth, stage - 1); }

  /// Parameters of the Z-step fusion at a given 1-based stage.
  FusionParams fusionParams(int stage) const {
    FusionParams f;
    f.mu = stageMu(stage) / rho;
    f.tau = stageTau(stage);
    f.max_iters = inner_iters;
    return f;
  }
};

/// X = V + T .* f_ST^dagger(((Y - Phi V) ./ (rho + Lambda)) repeated), V = Z - U.
/// Exact minimizer of ||y - Phi x||^2 + rho ||x - V||^2.
template <typename Scalar, typename Derived>
Cube<Scalar> x_update(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y, const Cube<Scalar>& z,
                      const Cube<Scalar>& u, double rho) {
  if (!(rho > 0.0)) throw ValidationError("x_update: rho must be > 0");
  model.requireMeasurement(y, "x_update");
  z.requireSameShape(u, "x_update");
  Cube<Scalar> v = z - u;
  const Plane<Scalar> residual = y - forward(model, v);
  const Plane<Scalar> scaled =
      safe_divide(residual, (model.lambda().array() + static_cast<Scalar>(rho)).matrix());
  v += modulated_crop(model, scaled);
  return v;
}

/// Z-step: TVDS fusion of X + U with weight mu / rho.
template <typename Scalar>
FusionResult<Scalar> z_update(const Cube<Scalar>& x, const Cube<Scalar>& u, const DualField<Scalar>& p_ref,
                              double rho, double mu, double tau, int inner_iters,
                              const std::optional<DualField<Scalar>>& p_init = std::nullopt) {
  if (!(rho > 0.0)) throw ValidationError("z_update: rho must be > 0");
  FusionParams f;
  f.mu = mu / rho;
  f.tau = tau;
  f.max_iters = inner_iters;
  return fuse(x + u, p_ref, f, p_init);
}

/// X-step with the stacked dual-camera fidelity:
/// (Phi^T Phi + Phi_r^T Phi_r + rho I) x = Phi^T y + Phi_r^T y_r + rho V, solved by CG.
template <typename Scalar, typename Derived>
std::pair<Cube<Scalar>, CgReport> x_update_stacked(const SystemModel<Scalar>& model,
                                                   const SpectralResponse<Scalar>& a,
                                                   const Eigen::MatrixBase<Derived>& y, const Cube<Scalar>& y_r,
                                                   const Cube<Scalar>& z, const Cube<Scalar>& u, double rho,
                                                   double cg_tol, int cg_max_iter) {
  const Dims d = model.dims();
  const Scalar r = static_cast<Scalar>(rho);
  Cube<Scalar> v = z - u;
  auto apply = [&](const Vector<Scalar>& w) -> Vector<Scalar> {
    const Cube<Scalar> wc(d, w);
    Vector<Scalar> out = adjoint(model, forward(model, wc)).vec();
    out += rgb_adjoint(a, rgb_forward(a, wc)).vec();
    out += r * w;
    return out;
  };
  const Vector<Scalar> b = adjoint(model, y).vec() + rgb_adjoint(a, y_r).vec() + r * v.vec();
  Vector<Scalar> x = v.vec();
  CgReport report = conjugate_gradient<Scalar>(apply, b, x, cg_tol, cg_max_iter);
  return {Cube<Scalar>(d, std::move(x)), std::move(report)};
}

struct IterationRecord {
  int stage = 0;                // 1-based
  int iteration = 0;            // 1-based, global
  double mu = 0.0;
  double tau = 0.0;
  double primal_residual = 0.0;  // ||X - Z|| / ||Z||
  double dual_residual = 0.0;    // rho ||Z - Z_prev||
  double objective = 0.0;        // data + mu * TVDS at the current X
  double augmented_lagrangian = 0.0;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

struct OpCount {
  std::uint64_t x_update = 0;
  std::uint64_t z_update = 0;
  std::uint64_t total() const { return x_update + z_update; }
};

template <typename Scalar>
struct ReconstructInputs {
  std::optional<Cube<Scalar>> x_ref0;       // explicit reference image
  std::optional<Cube<Scalar>> y_r;          // demosaicked RGB / panchromatic image
  SpectralResponse<Scalar> response;        // needed for tvds_star and response lifting
  ReferenceOptions reference_options;
  std::optional<Cube<Scalar>> x_init;       // default: backward(y)
  ReconstructionMode mode = ReconstructionMode::Tvds;
};

template <typename Scalar>
struct ReconstructResult {
  Cube<Scalar> x;
  Cube<Scalar> z;
  Cube<Scalar> u;
  std::vector<IterationRecord> log;
  OpCount ops;
  int cg_warnings = 0;
  bool fusion_step_warning = false;
  std::optional<ReferenceBundle<Scalar>> reference;  // final reference, when one was used
};

template <typename Scalar, typename Derived>
ReconstructResult<Scalar> reconstruct(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y,
                                      const ReconstructInputs<Scalar>& inputs, const AdmmParams& params,
                                      const IterationCallback& callback = {}) {
  params.validate();
  model.requireMeasurement(y, "reconstruct");
  const Dims d = model.dims();
  const auto mode = inputs.mode;

  if (inputs.y_r && (inputs.y_r->rows() != d.rows || inputs.y_r->cols() != d.cols)) {
    throw DimensionError("reconstruct: RGB image shape mismatch");
  }
  if (inputs.x_ref0) model.requireCube(*inputs.x_ref0, "reconstruct reference");
  if (mode == ReconstructionMode::TvdsStar) {
    if (!inputs.y_r || inputs.response.empty()) {
      throw ValidationError("tvds_star needs both an RGB image and its spectral response");
    }
    if (inputs.response.bands() != d.bands || inputs.response.channels() != inputs.y_r->bands()) {
      throw DimensionError("tvds_star: spectral response does not match the cube or RGB image");
    }
  }

  std::optional<ReferenceBundle<Scalar>> bundle;
  if (mode != ReconstructionMode::TvOnly) {
    if (inputs.x_ref0) {
      typename ReferenceBundle<Scalar>::Matrix v;
      if (inputs.y_r) v = rgb_subspace(*inputs.y_r);
      bundle.emplace(*inputs.x_ref0, std::move(v));
    } else if (inputs.y_r) {
      bundle = generate_reference(model, y, *inputs.y_r, inputs.reference_options,
                                  inputs.response.empty() ? nullptr : &inputs.response);
    } else {
      throw ValidationError(to_string(mode) + " mode needs a reference image or an RGB image");
    }
  }

  ReconstructResult<Scalar> out;
  out.x = inputs.x_init ? *inputs.x_init : backward(model, y);
  model.requireCube(out.x, "reconstruct initial image");
  out.u = Cube<Scalar>(d);
  out.z = out.x;

  const DualField<Scalar> zero_field = DualField<Scalar>::Zero(d);
  const std::uint64_t n_vox = static_cast<std::uint64_t>(d.size());
  const std::uint64_t n_meas = static_cast<std::uint64_t>(d.rows * model.measurementCols());

  auto do_x_update = [&]() {
    if (mode == ReconstructionMode::TvdsStar) {
      auto [x, report] = x_update_stacked(model, inputs.response, y, *inputs.y_r, out.z, out.u, params.rho,
                                          params.star_cg_tol, params.star_cg_max_iter);
      if (!report.converged) {
        ++out.cg_warnings;
        if (params.strict) throw NumericalError("tvds_star X-step CG did not converge");
      }
      out.x = std::move(x);
      out.ops.x_update += static_cast<std::uint64_t>(report.iterations + 1) * (4 * n_vox + n_meas);
    } else {
      out.x = x_update(model, y, out.z, out.u, params.rho);
      out.ops.x_update += 2 * n_vox + n_meas;
    }
  };

  int global_iter = 0;
  for (int stage = 1; stage <= params.num_stages; ++stage) {
    const DualField<Scalar>& p_ref = bundle ? bundle->pRef() : zero_field;
    const double mu_s = params.stageMu(stage);
    const FusionParams fp = params.fusionParams(stage);
    out.fusion_step_warning = out.fusion_step_warning || !fp.stepWithinBound();
    std::optional<DualField<Scalar>> p_carry;

    for (int it = 0; it < params.iters_per_stage; ++it) {
      ++global_iter;
      if (params.order == LoopOrder::Conventional) do_x_update();

      const Cube<Scalar> x_used = out.x;
      FusionResult<Scalar> fr = fuse(out.x + out.u, p_ref, fp, params.warm_start_dual ? p_carry : std::nullopt);
      out.ops.z_update += fr.voxel_ops;
      if (params.warm_start_dual) p_carry = std::move(fr.p);
      const Cube<Scalar> z_prev = std::move(out.z);
      out.z = std::move(fr.x);
      out.u += x_used - out.z;

      IterationRecord rec;
      rec.stage = stage;
      rec.iteration = global_iter;
      rec.mu = mu_s;
      rec.tau = fp.tau;
      const double z_norm = norm(out.z);
      rec.primal_residual = norm(x_used - out.z) / (z_norm > 0 ? z_norm : 1.0);
      rec.dual_residual = params.rho * norm(out.z - z_prev);

      if (params.order == LoopOrder::AsPrinted) do_x_update();

      {
        const Cube<Scalar>& xr = params.order == LoopOrder::AsPrinted ? x_used : out.x;
        const auto data_term = [&](const Cube<Scalar>& c) {
          double v = 0.5 * (y - forward(model, c)).squaredNorm();
          if (mode == ReconstructionMode::TvdsStar) {
            v += 0.5 * (inputs.y_r->vec() - rgb_forward(inputs.response, c).vec()).squaredNorm();
          }
          return v;
        };
        const Cube<Scalar> div_ref = divergence(p_ref);
        rec.objective = data_term(xr) + mu_s * (tv_value(xr) + inner(div_ref, xr));
        const double reg_z = mu_s * (tv_value(out.z) + inner(div_ref, out.z));
        rec.augmented_lagrangian = data_term(xr) + reg_z +
                                   0.5 * params.rho * (xr - out.z + out.u).vec().squaredNorm() -
                                   0.5 * params.rho * out.u.vec().squaredNorm();
      }
      if (callback) callback(rec);
      out.log.push_back(rec);
    }

    if (bundle && bundle->hasSubspace() && stage % params.ref_update_interval == 0 && stage < params.num_stages) {
      bundle = lrds_update(*bundle, out.x);
    }
  }
  out.reference = std::move(bundle);
  return out;
}

}  // namespace cassi
