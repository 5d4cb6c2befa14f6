#pragma once

// Reconstruction quality metrics: PSNR, SSIM and SAM.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cassi/tensor.hpp"

namespace cassi {

/// PSNR reported for a band whose MSE is exactly zero.
inline constexpr double kPsnrCeilingDb = 99.0;

enum class PeakConvention { ReferenceMax, Unit };

inline std::string to_string(PeakConvention p) { return p == PeakConvention::Unit ? "unit" : "reference_max"; }

template <typename Scalar>
double peak_value(const Cube<Scalar>& ref, PeakConvention convention) {
  if (convention == PeakConvention::Unit) return 1.0;
  return static_cast<double>(ref.vec().maxCoeff());
}

/// Per-band PSNR in dB; bands with zero error report the ceiling.
template <typename Scalar>
std::vector<double> psnr_per_band(const Cube<Scalar>& x, const Cube<Scalar>& ref, double peak) {
  x.requireSameShape(ref, "psnr");
  if (!(peak > 0.0)) throw ValidationError("psnr: peak must be > 0");
  std::vector<double> out(static_cast<std::size_t>(x.bands()));
  for (Index l = 0; l < x.bands(); ++l) {
    const double mse = (x.band(l) - ref.band(l)).template cast<double>().squaredNorm() /
                       static_cast<double>(x.dims().plane());
    out[l] = mse == 0.0 ? kPsnrCeilingDb : std::min(kPsnrCeilingDb, 10.0 * std::log10(peak * peak / mse));
  }
  return out;
}

/// Mean of the per-band PSNR.
template <typename Scalar>
double psnr(const Cube<Scalar>& x, const Cube<Scalar>& ref, double peak) {
  const auto bands = psnr_per_band(x, ref, peak);
  double sum = 0.0;
  for (double b : bands) sum += b;
  return sum / static_cast<double>(bands.size());
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

namespace detail {

inline Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g(i) = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  return g / g.sum();
}

/// 'valid' separable correlation of a plane with g g^T.
inline Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& g) {
  const Eigen::Index k = g.size();
  const Eigen::Index rows = img.rows() - k + 1, cols = img.cols() - k + 1;
  Eigen::MatrixXd tmp(rows, img.cols());
  for (Eigen::Index i = 0; i < rows; ++i) tmp.row(i) = g.transpose() * img.middleRows(i, k);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) out.col(j) = tmp.middleCols(j, k) * g;
  return out;
}

}  // namespace detail

/// Mean SSIM over bands; each band uses a Gaussian window over the 'valid' region.
template <typename Scalar>
double ssim(const Cube<Scalar>& x, const Cube<Scalar>& ref, const SsimOptions& opt = {}) {
  x.requireSameShape(ref, "ssim");
  if (x.rows() < opt.window || x.cols() < opt.window) {
    throw DimensionError("ssim: image " + to_string(x.dims()) + " is smaller than the " +
                         std::to_string(opt.window) + "x" + std::to_string(opt.window) + " window");
  }
  const double c1 = (opt.k1 * opt.data_range) * (opt.k1 * opt.data_range);
  const double c2 = (opt.k2 * opt.data_range) * (opt.k2 * opt.data_range);
  const Eigen::VectorXd g = detail::gaussian_window(opt.window, opt.sigma);
  double total = 0.0;
  for (Index l = 0; l < x.bands(); ++l) {
    const Eigen::MatrixXd a = x.band(l).template cast<double>();
    const Eigen::MatrixXd b = ref.band(l).template cast<double>();
    const Eigen::ArrayXXd mu_a = detail::filter_valid(a, g).array();
    const Eigen::ArrayXXd mu_b = detail::filter_valid(b, g).array();
    const Eigen::ArrayXXd saa = detail::filter_valid(a.cwiseProduct(a), g).array() - mu_a.square();
    const Eigen::ArrayXXd sbb = detail::filter_valid(b.cwiseProduct(b), g).array() - mu_b.square();
    const Eigen::ArrayXXd sab = detail::filter_valid(a.cwiseProduct(b), g).array() - mu_a * mu_b;
    const Eigen::ArrayXXd map =
        ((2.0 * mu_a * mu_b + c1) * (2.0 * sab + c2)) / ((mu_a.square() + mu_b.square() + c1) * (saa + sbb + c2));
    total += map.mean();
  }
  return total / static_cast<double>(x.bands());
}

struct SamResult {
  double degrees = 0.0;
  Index valid_pixels = 0;
  Index excluded_pixels = 0;  // either spectrum is the zero vector
};

/// Mean spectral angle over pixels where both spectra are nonzero.
template <typename Scalar>
SamResult sam(const Cube<Scalar>& x, const Cube<Scalar>& ref) {
  x.requireSameShape(ref, "sam");
  if ((ref.vec().array() == Scalar(0)).all()) throw ValidationError("sam: reference cube is all zero");
  const auto xu = x.unfolding();
  const auto ru = ref.unfolding();
  SamResult out;
  double sum = 0.0;
  for (Index p = 0; p < x.dims().plane(); ++p) {
    const double nx = xu.col(p).template cast<double>().norm();
    const double nr = ru.col(p).template cast<double>().norm();
    if (nx == 0.0 || nr == 0.0) {
      ++out.excluded_pixels;
      continue;
    }
    const double c = std::clamp(xu.col(p).template cast<double>().dot(ru.col(p).template cast<double>()) / (nx * nr),
                                -1.0, 1.0);
    sum += std::acos(c);
    ++out.valid_pixels;
  }
  if (out.valid_pixels > 0) out.degrees = sum / static_cast<double>(out.valid_pixels) * 180.0 / std::numbers::pi;
  return out;
}

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double sam_degrees = 0.0;
  std::vector<double> per_band_psnr;
  Index sam_excluded_pixels = 0;
  double peak = 1.0;
  PeakConvention peak_convention = PeakConvention::ReferenceMax;
};

template <typename Scalar>
MetricReport evaluate_metrics(const Cube<Scalar>& x, const Cube<Scalar>& ref,
                              PeakConvention convention = PeakConvention::ReferenceMax) {
  MetricReport r;
  r.peak_convention = convention;
  r.peak = peak_value(ref, convention);
  r.per_band_psnr = psnr_per_band(x, ref, r.peak);
  double sum = 0.0;
  for (double b : r.per_band_psnr) sum += b;
  r.psnr_db = sum / static_cast<double>(r.per_band_psnr.size());
  SsimOptions opt;
  opt.data_range = r.peak;
  r.ssim = ssim(x, ref, opt);
  const SamResult s = sam(x, ref);
  r.sam_degrees = s.degrees;
  r.sam_excluded_pixels = s.excluded_pixels;
  return r;
}

struct ScoredScene {
  std::string name;
  MetricReport report;
};

/// Table layout: header "Metrics,<scene...>,Avg" then PSNR, SSIM and SAM rows.
/// Values are written with round-trip precision.
std::string metrics_table_csv(const std::vector<ScoredScene>& scenes);

/// Inverse of metrics_table_csv for the scene columns (the Avg column is recomputed, not read).
std::vector<ScoredScene> parse_metrics_table_csv(const std::string& csv);

/// "band,<scene...>" rows of per-band PSNR.
std::string per_band_psnr_csv(const std::vector<ScoredScene>& scenes);

/// Aligned text rendering of the same table.
std::string metrics_table_text(const std::vector<ScoredScene>& scenes);

}  // namespace cassi
