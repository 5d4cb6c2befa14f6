#pragma once

// Reference-image generation from the RGB / panchromatic branch and the
// low-rank subspace (LRDS) refresh between reconstruction stages.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "cassi/cassi_model.hpp"
#include "cassi/rgb_model.hpp"
#include "cassi/tensor.hpp"
#include "cassi/tv.hpp"

namespace cassi {

/// Default band positions (0-based) of the channel nodes: for RGB stored as
/// (R, G, B) with bands ordered by increasing wavelength, R sits at band L-1,
/// G at ceil(L/2)-1 and B at band 0. A single channel spans all bands.
inline std::vector<double> default_channel_nodes(Index channels, Index bands) {
  if (channels == 1) return {0.0};
  if (channels == 3) {
    return {static_cast<double>(bands - 1), static_cast<double>((bands + 1) / 2 - 1), 0.0};
  }
  throw ValidationError("no default wavelength nodes for " + std::to_string(channels) + " channels");
}

/// L x C matrix of piecewise-linear interpolation weights. Every row is a
/// convex combination; bands outside the node range take the nearest node.
/// Channels sharing a node are averaged.
inline Eigen::MatrixXd interpolation_weights(Index channels, Index bands, const std::vector<double>& nodes) {
  if (static_cast<Index>(nodes.size()) != channels) throw DimensionError("one node per channel required");
  if (bands < 1) throw ValidationError("band count must be >= 1");

  // Distinct node positions with the channels that sit on each.
  std::vector<std::pair<double, std::vector<Index>>> knots;
  for (Index c = 0; c < channels; ++c) {
    auto it = std::find_if(knots.begin(), knots.end(), [&](const auto& k) { return k.first == nodes[c]; });
    if (it == knots.end()) {
      knots.push_back({nodes[c], {c}});
    } else {
      it->second.push_back(c);
    }
  }
  std::sort(knots.begin(), knots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(bands, channels);
  auto add_knot = [&](Index band, std::size_t k, double weight) {
    const auto& members = knots[k].second;
    for (Index c : members) w(band, c) += weight / static_cast<double>(members.size());
  };
  for (Index b = 0; b < bands; ++b) {
    const double pos = static_cast<double>(b);
    if (pos <= knots.front().first) {
      add_knot(b, 0, 1.0);
    } else if (pos >= knots.back().first) {
      add_knot(b, knots.size() - 1, 1.0);
    } else {
      std::size_t k = 0;
      while (knots[k + 1].first < pos) ++k;
      const double t = (pos - knots[k].first) / (knots[k + 1].first - knots[k].first);
      add_knot(b, k, 1.0 - t);
      add_knot(b, k + 1, t);
    }
  }
  return w;
}

/// X_r: per-pixel linear interpolation of the C channel values across L bands.
template <typename Scalar>
Cube<Scalar> interpolate_rgb_to_cube(const Cube<Scalar>& y_r, Index bands,
                                     const std::optional<std::vector<double>>& nodes = std::nullopt) {
  const Index C = y_r.bands();
  const Eigen::MatrixXd w = interpolation_weights(C, bands, nodes ? *nodes : default_channel_nodes(C, bands));
  Cube<Scalar> out(y_r.rows(), y_r.cols(), bands);
  out.unfolding().noalias() = w.cast<Scalar>() * y_r.unfolding();
  return out;
}

/// Alternative lifting when A is known: X_(3) = A^+ (Y_r)_(3).
template <typename Scalar>
Cube<Scalar> lift_with_response(const Cube<Scalar>& y_r, const SpectralResponse<Scalar>& a) {
  if (a.channels() != y_r.bands()) throw DimensionError("lift_with_response: channel mismatch");
  const auto pinv = a.matrix().completeOrthogonalDecomposition().pseudoInverse();
  Cube<Scalar> out(y_r.rows(), y_r.cols(), a.bands());
  out.unfolding().noalias() = pinv * y_r.unfolding();
  return out;
}

/// Least-squares band scales beta minimizing ||y - Phi blkdiag(x_r,l) beta||.
/// Column l of Phi_B is the measurement of band l of x_r alone; the L x L
/// normal matrix is formed from overlapping sheared blocks and solved densely.
template <typename Scalar, typename Derived>
Vector<Scalar> estimate_beta(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y,
                             const Cube<Scalar>& x_r) {
  model.requireCube(x_r, "estimate_beta");
  model.requireMeasurement(y, "estimate_beta");
  const auto& t = model.transmittance();
  const Index L = t.bands(), W = t.cols(), s = model.shearStep();

  std::vector<Plane<Scalar>> cols(static_cast<std::size_t>(L));
  for (Index l = 0; l < L; ++l) cols[l] = x_r.band(l).cwiseProduct(t.band(l));

  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix gram(L, L);
  Vector<Scalar> rhs(L);
  for (Index j = 0; j < L; ++j) {
    rhs(j) = cols[j].cwiseProduct(y.middleCols(s * j, W)).sum();
    for (Index k = j; k < L; ++k) {
      const Index start = s * k;  // k >= j, so block k starts no earlier
      const Index len = s * j + W - start;
      Scalar g = 0;
      if (len > 0) g = cols[j].middleCols(start - s * j, len).cwiseProduct(cols[k].leftCols(len)).sum();
      gram(j, k) = gram(k, j) = g;
    }
  }

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Scalar max_ev = eig.eigenvalues().maxCoeff();
  const Scalar min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > Scalar(0)) || min_ev <= max_ev * Scalar(L) * std::numeric_limits<Scalar>::epsilon() * Scalar(16)) {
    throw NumericalError(
        "energy-match normal matrix is rank deficient; the interpolated reference has bands that are "
        "empty or unobserved through the mask. Use a different reference or regularize.");
  }
  return gram.ldlt().solve(rhs);
}

/// Orthonormal basis (HW x r) of the row space of the C x HW unfolding of y_r.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rgb_subspace(const Cube<Scalar>& y_r) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix unfolded = y_r.unfolding();
  const Eigen::JacobiSVD<Matrix> svd(unfolded, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Scalar cutoff =
      sv.size() > 0 ? sv(0) * Scalar(std::max(unfolded.rows(), unfolded.cols())) * std::numeric_limits<Scalar>::epsilon()
                    : Scalar(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return svd.matrixV().leftCols(rank);
}

template <typename Scalar>
class ReferenceBundle {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ReferenceBundle() = default;
  ReferenceBundle(Cube<Scalar> x_ref, Matrix v_basis, Vector<Scalar> beta = {})
      : x_ref_(std::move(x_ref)), p_ref_(dual_field(x_ref_)), v_(std::move(v_basis)), beta_(std::move(beta)) {
    if (v_.size() > 0 && v_.rows() != x_ref_.dims().plane()) {
      throw DimensionError("reference subspace basis must have H*W rows");
    }
  }

  const Cube<Scalar>& xRef() const { return x_ref_; }
  const DualField<Scalar>& pRef() const { return p_ref_; }
  const Matrix& vBasis() const { return v_; }
  const Vector<Scalar>& beta() const { return beta_; }
  bool hasSubspace() const { return v_.size() > 0; }

 private:
  Cube<Scalar> x_ref_;
  DualField<Scalar> p_ref_;
  Matrix v_;
  Vector<Scalar> beta_;
};

using ReferenceBundleD = ReferenceBundle<double>;

struct ReferenceOptions {
  std::optional<std::vector<double>> channel_nodes;
  bool lift_with_response = false;  // requires `response`
};

/// X_ref = X_r x_3 diag(beta), with the RGB row-space basis kept for LRDS.
template <typename Scalar, typename Derived>
ReferenceBundle<Scalar> generate_reference(const SystemModel<Scalar>& model, const Eigen::MatrixBase<Derived>& y,
                                           const Cube<Scalar>& y_r, const ReferenceOptions& options = {},
                                           const SpectralResponse<Scalar>* response = nullptr) {
  const Dims& d = model.dims();
  if (y_r.rows() != d.rows || y_r.cols() != d.cols) throw DimensionError("generate_reference: RGB image shape mismatch");
  Cube<Scalar> x_r;
  if (options.lift_with_response) {
    if (response == nullptr || response->empty()) throw ValidationError("response lifting needs a spectral response");
    x_r = lift_with_response(y_r, *response);
  } else {
    x_r = interpolate_rgb_to_cube(y_r, d.bands, options.channel_nodes);
  }
  const Vector<Scalar> beta = estimate_beta(model, y, x_r);
  for (Index l = 0; l < d.bands; ++l) x_r.band(l) *= beta(l);
  return ReferenceBundle<Scalar>(std::move(x_r), rgb_subspace(y_r), beta);
}

/// New reference whose mode-3 unfolding is X_(3) V V^T.
template <typename Scalar>
ReferenceBundle<Scalar> lrds_update(const ReferenceBundle<Scalar>& bundle, const Cube<Scalar>& x_current) {
  if (!bundle.hasSubspace()) throw ValidationError("lrds_update: bundle carries no RGB subspace");
  bundle.xRef().requireSameShape(x_current, "lrds_update");
  const auto& v = bundle.vBasis();
  Cube<Scalar> projected(x_current.dims());
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coeffs = x_current.unfolding() * v;
  projected.unfolding().noalias() = coeffs * v.transpose();
  return ReferenceBundle<Scalar>(std::move(projected), v, bundle.beta());
}

}  // namespace cassi
