#pragma once

// Matrix-free Krylov solvers over flat Eigen vectors.

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace cassi {

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;  // ||b - A x_k|| for k = 0..iterations
};

/// Conjugate gradient for a symmetric positive (semi)definite operator.
/// Stops when ||b - A x|| <= tol * ||b||. x holds the initial guess on entry.
template <typename Scalar, typename Apply>
CgReport conjugate_gradient(Apply&& apply, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                            Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double tol, int max_iter) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  CgReport report;
  const double b_norm = b.norm();
  Vec r = b - apply(x);
  double rr = r.squaredNorm();
  report.residual_history.push_back(std::sqrt(rr));
  if (b_norm == 0.0 || std::sqrt(rr) <= tol * b_norm) {
    report.converged = true;
    report.relative_residual = b_norm == 0.0 ? std::sqrt(rr) : std::sqrt(rr) / b_norm;
    return report;
  }
  Vec p = r;
  for (int k = 0; k < max_iter; ++k) {
    const Vec q = apply(p);
    const Scalar pq = p.dot(q);
    if (pq <= Scalar(0)) break;
    const Scalar alpha = rr / pq;
    x += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    report.iterations = k + 1;
    report.residual_history.push_back(std::sqrt(rr_new));
    if (std::sqrt(rr_new) <= tol * b_norm) {
      rr = rr_new;
      report.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  report.relative_residual = std::sqrt(rr) / b_norm;
  return report;
}

/// CGLS for min ||b - A x|| with a symmetric operator A, started at x = 0.
/// The iterates stay in range(A), so the limit is the minimum-norm solution
/// A^dagger b. Stops when ||A(b - A x)|| <= tol * ||A b||; the recorded
/// history is ||b - A x_k||, which CGLS decreases monotonically.
template <typename Scalar, typename Apply>
CgReport cgls_symmetric(Apply&& apply, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double tol, int max_iter) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  CgReport report;
  x = Vec::Zero(b.size());
  Vec res = b;
  Vec g = apply(res);
  const double g0 = g.norm();
  double gg = g.squaredNorm();
  report.residual_history.push_back(res.norm());
  if (g0 == 0.0) {
    report.converged = true;
    return report;
  }
  Vec p = g;
  for (int k = 0; k < max_iter; ++k) {
    const Vec q = apply(p);
    const Scalar qq = q.squaredNorm();
    if (qq <= Scalar(0)) break;
    const Scalar alpha = gg / qq;
    x += alpha * p;
    res -= alpha * q;
    g = apply(res);
    const double gg_new = g.squaredNorm();
    report.iterations = k + 1;
    report.residual_history.push_back(res.norm());
    if (std::sqrt(gg_new) <= tol * g0) {
      gg = gg_new;
      report.converged = true;
      break;
    }
    p = g + (gg_new / gg) * p;
    gg = gg_new;
  }
  report.relative_residual = std::sqrt(gg) / g0;
  return report;
}

}  // namespace cassi
