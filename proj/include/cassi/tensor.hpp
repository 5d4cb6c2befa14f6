#pragma once

// Dense spectral tensors and the shear transform pair.
//
// Index convention: all accessors are 0-based. Mathematical index (m, n, l)
// with 1 <= m <= H maps to storage (m-1, n-1, l-1). Storage is band-major:
// band l is a contiguous row-major H x W plane, so the flat vector is the
// vectorization "dim2 -> dim1 -> dim3" and the L x HW row-major view is the
// mode-3 unfolding.

#include <Eigen/Core>

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include "cassi/errors.hpp"

namespace cassi {

using Index = Eigen::Index;

template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Dims {
  Index rows = 0;
  Index cols = 0;
  Index bands = 0;

  Index plane() const { return rows * cols; }
  Index size() const { return rows * cols * bands; }
  bool valid() const { return rows > 0 && cols > 0 && bands > 0; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Dims& d) {
  return os << '(' << d.rows << ',' << d.cols << ',' << d.bands << ')';
}

inline std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

/// H x W x L real tensor. Used for the scene, every reconstruction iterate,
/// transmittance, and (with L = C) multi-channel images.
template <typename Scalar>
class Cube {
 public:
  using VectorType = Vector<Scalar>;
  using PlaneMap = Eigen::Map<Plane<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const Plane<Scalar>>;

  Cube() = default;
  explicit Cube(const Dims& dims) : dims_(dims), data_(VectorType::Zero(dims.size())) {
    if (!dims.valid()) throw DimensionError("cube dimensions must be positive, got " + to_string(dims));
  }
  Cube(Index rows, Index cols, Index bands) : Cube(Dims{rows, cols, bands}) {}
  Cube(const Dims& dims, VectorType data) : dims_(dims), data_(std::move(data)) {
    if (!dims.valid()) throw DimensionError("cube dimensions must be positive, got " + to_string(dims));
    if (data_.size() != dims.size()) throw DimensionError("cube payload length does not match dimensions");
  }

  static Cube Zero(const Dims& dims) { return Cube(dims); }
  static Cube Constant(const Dims& dims, Scalar value) {
    Cube c(dims);
    c.data_.setConstant(value);
    return c;
  }

  const Dims& dims() const { return dims_; }
  Index rows() const { return dims_.rows; }
  Index cols() const { return dims_.cols; }
  Index bands() const { return dims_.bands; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(Index m, Index n, Index l) { return data_[offset(m, n, l)]; }
  Scalar operator()(Index m, Index n, Index l) const { return data_[offset(m, n, l)]; }

  PlaneMap band(Index l) { return PlaneMap(data_.data() + l * dims_.plane(), dims_.rows, dims_.cols); }
  ConstPlaneMap band(Index l) const {
    return ConstPlaneMap(data_.data() + l * dims_.plane(), dims_.rows, dims_.cols);
  }

  /// Mode-3 unfolding, bands as rows (L x HW).
  PlaneMap unfolding() { return PlaneMap(data_.data(), dims_.bands, dims_.plane()); }
  ConstPlaneMap unfolding() const { return ConstPlaneMap(data_.data(), dims_.bands, dims_.plane()); }

  VectorType& vec() { return data_; }
  const VectorType& vec() const { return data_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  bool allFinite() const { return data_.allFinite(); }

  template <typename NewScalar>
  Cube<NewScalar> cast() const {
    return Cube<NewScalar>(dims_, data_.template cast<NewScalar>());
  }

  Cube& operator+=(const Cube& o) {
    requireSameShape(o, "+=");
    data_ += o.data_;
    return *this;
  }
  Cube& operator-=(const Cube& o) {
    requireSameShape(o, "-=");
    data_ -= o.data_;
    return *this;
  }
  Cube& operator*=(Scalar a) {
    data_ *= a;
    return *this;
  }

  friend Cube operator+(Cube a, const Cube& b) { return a += b; }
  friend Cube operator-(Cube a, const Cube& b) { return a -= b; }
  friend Cube operator*(Scalar s, Cube a) { return a *= s; }
  friend Cube operator*(Cube a, Scalar s) { return a *= s; }

  void requireSameShape(const Cube& o, const char* what) const {
    if (dims_ != o.dims_) {
      throw DimensionError(std::string(what) + ": shape mismatch " + to_string(dims_) + " vs " +
                           to_string(o.dims_));
    }
  }

 private:
  Index offset(Index m, Index n, Index l) const { return (l * dims_.rows + m) * dims_.cols + n; }

  Dims dims_{};
  VectorType data_;
};

using CubeD = Cube<double>;
using PlaneD = Plane<double>;

template <typename Scalar>
Scalar inner(const Cube<Scalar>& a, const Cube<Scalar>& b) {
  a.requireSameShape(b, "inner");
  return a.vec().dot(b.vec());
}

template <typename Scalar>
Scalar norm(const Cube<Scalar>& a) {
  return a.vec().norm();
}

template <typename Scalar>
Cube<Scalar> hadamard(const Cube<Scalar>& a, const Cube<Scalar>& b) {
  a.requireSameShape(b, "hadamard");
  return Cube<Scalar>(a.dims(), a.vec().cwiseProduct(b.vec()));
}

/// Output of the shear transform: band l occupies columns
/// [s*l, s*l + W) of an H x (W + s(L-1)) plane and is zero elsewhere.
template <typename Scalar>
struct ShearedCube {
  Cube<Scalar> data;
  Index shear_step = 0;
  Index width = 0;  // W of the unsheared cube
};

inline Index sheared_width(Index width, Index bands, Index shear_step) {
  return width + shear_step * (bands - 1);
}

template <typename Scalar>
ShearedCube<Scalar> shear_transform(const Cube<Scalar>& x, Index s) {
  if (s < 0) throw ValidationError("shear step must be non-negative");
  const Index W = x.cols();
  ShearedCube<Scalar> out{Cube<Scalar>(x.rows(), sheared_width(W, x.bands(), s), x.bands()), s, W};
  for (Index l = 0; l < x.bands(); ++l) out.data.band(l).middleCols(s * l, W) = x.band(l);
  return out;
}

/// Crop inverse of shear_transform for a sheared tensor of known original width.
template <typename Scalar>
Cube<Scalar> inverse_shear(const Cube<Scalar>& sheared, Index s, Index width) {
  if (s < 0) throw ValidationError("shear step must be non-negative");
  if (width <= 0 || sheared.cols() < sheared_width(width, sheared.bands(), s)) {
    throw DimensionError("inverse_shear: sheared width " + std::to_string(sheared.cols()) +
                         " is smaller than W + s(L-1) = " +
                         std::to_string(sheared_width(width, sheared.bands(), s)));
  }
  Cube<Scalar> out(sheared.rows(), width, sheared.bands());
  for (Index l = 0; l < sheared.bands(); ++l) out.band(l) = sheared.band(l).middleCols(s * l, width);
  return out;
}

template <typename Scalar>
Cube<Scalar> inverse_shear(const ShearedCube<Scalar>& sheared) {
  return inverse_shear(sheared.data, sheared.shear_step, sheared.width);
}

/// Elementwise num / den with an exact zero wherever den == 0.
template <typename DerivedN, typename DerivedD>
auto safe_divide(const Eigen::DenseBase<DerivedN>& num, const Eigen::DenseBase<DerivedD>& den) {
  using Scalar = typename DerivedN::Scalar;
  using Result = Eigen::Matrix<Scalar, DerivedN::RowsAtCompileTime, DerivedN::ColsAtCompileTime,
                               DerivedN::IsRowMajor ? Eigen::RowMajor : Eigen::ColMajor>;
  if (num.rows() != den.rows() || num.cols() != den.cols()) {
    throw DimensionError("safe_divide: shape mismatch");
  }
  return Result(num.derived().binaryExpr(den.derived(), [](Scalar a, Scalar b) {
    return b == Scalar(0) ? Scalar(0) : a / b;
  }));
}

template <typename Scalar>
Cube<Scalar> safe_divide(const Cube<Scalar>& num, const Cube<Scalar>& den) {
  num.requireSameShape(den, "safe_divide");
  return Cube<Scalar>(num.dims(), safe_divide(num.vec(), den.vec()));
}

/// L-fold repetition of a plane along the band axis.
template <typename Derived>
Cube<typename Derived::Scalar> repeat_along_bands(const Eigen::MatrixBase<Derived>& y, Index bands) {
  if (bands < 1) throw ValidationError("repeat_along_bands: band count must be >= 1");
  Cube<typename Derived::Scalar> out(y.rows(), y.cols(), bands);
  for (Index l = 0; l < bands; ++l) out.band(l) = y;
  return out;
}

}  // namespace cassi
