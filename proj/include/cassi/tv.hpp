#pragma once

// Spatial total variation on spectral cubes (isotropic within each band).
//
// Gradient component `dm` is the forward difference along rows (index m),
// `dn` along columns (index n). Neumann boundary: dm is zero on the last
// row, dn on the last column.

#include <cmath>

#include "cassi/tensor.hpp"

namespace cassi {

template <typename Scalar>
struct GradientField {
  Cube<Scalar> dm;
  Cube<Scalar> dn;

  GradientField() = default;
  explicit GradientField(const Dims& d) : dm(d), dn(d) {}

  const Dims& dims() const { return dm.dims(); }

  static GradientField Zero(const Dims& d) { return GradientField(d); }

  GradientField& operator+=(const GradientField& o) {
    dm += o.dm;
    dn += o.dn;
    return *this;
  }
  GradientField& operator*=(Scalar a) {
    dm *= a;
    dn *= a;
    return *this;
  }
};

/// Field whose per-pixel vectors have norm <= 1 (normalized gradients and
/// fixed-point iterates).
template <typename Scalar>
using DualField = GradientField<Scalar>;

using GradientFieldD = GradientField<double>;
using DualFieldD = DualField<double>;

template <typename Scalar>
Scalar inner(const GradientField<Scalar>& a, const GradientField<Scalar>& b) {
  return inner(a.dm, b.dm) + inner(a.dn, b.dn);
}

template <typename Scalar>
GradientField<Scalar> gradient(const Cube<Scalar>& x) {
  const Index H = x.rows(), W = x.cols();
  GradientField<Scalar> g(x.dims());
  for (Index l = 0; l < x.bands(); ++l) {
    const auto xb = x.band(l);
    if (H > 1) g.dm.band(l).topRows(H - 1) = xb.bottomRows(H - 1) - xb.topRows(H - 1);
    if (W > 1) g.dn.band(l).leftCols(W - 1) = xb.rightCols(W - 1) - xb.leftCols(W - 1);
  }
  return g;
}

/// (div p)_{m,n} = p1_{m,n} - p1_{m-1,n} + p2_{m,n} - p2_{m,n-1}; out-of-range terms are zero.
template <typename Scalar>
Cube<Scalar> divergence(const GradientField<Scalar>& p) {
  if (p.dm.dims() != p.dn.dims()) throw DimensionError("divergence: component shapes differ");
  const Index H = p.dm.rows(), W = p.dm.cols();
  Cube<Scalar> out = p.dm;
  out += p.dn;
  for (Index l = 0; l < out.bands(); ++l) {
    auto ob = out.band(l);
    if (H > 1) ob.bottomRows(H - 1) -= p.dm.band(l).topRows(H - 1);
    if (W > 1) ob.rightCols(W - 1) -= p.dn.band(l).leftCols(W - 1);
  }
  return out;
}

/// Per-pixel Euclidean norm of a gradient-shaped field.
template <typename Scalar>
Cube<Scalar> magnitude(const GradientField<Scalar>& g) {
  return Cube<Scalar>(g.dims(), (g.dm.vec().array().square() + g.dn.vec().array().square()).sqrt().matrix());
}

/// Normalized gradient; exactly zero where the gradient vanishes.
template <typename Scalar>
DualField<Scalar> dual_field(const Cube<Scalar>& x) {
  GradientField<Scalar> g = gradient(x);
  const Cube<Scalar> mag = magnitude(g);
  g.dm = safe_divide(g.dm, mag);
  g.dn = safe_divide(g.dn, mag);
  return g;
}

template <typename Scalar>
Scalar tv_value(const Cube<Scalar>& x) {
  return magnitude(gradient(x)).vec().sum();
}

/// tv_value(x) - <g, x>. With g = -div(dual_field(ref)) this is the
/// subgradient-similarity regularizer guided by `ref`.
template <typename Scalar>
Scalar tvds_value(const Cube<Scalar>& x, const Cube<Scalar>& g) {
  x.requireSameShape(g, "tvds_value");
  return tv_value(x) - inner(g, x);
}

/// Largest per-pixel norm of a field (feasibility diagnostics).
template <typename Scalar>
Scalar max_magnitude(const GradientField<Scalar>& p) {
  return magnitude(p).vec().maxCoeff();
}

}  // namespace cassi
