#include "cassi/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cassi/errors.hpp"

namespace cassi {

namespace {

void require_dims(const Dims& d, const char* what) {
  if (!d.valid()) throw DimensionError(std::string(what) + ": invalid dims " + to_string(d));
}

/// a + b cos(2 pi f l / L + phase), clamped to [0.02, 1].
std::vector<double> smooth_spectrum(std::mt19937_64& rng, Index bands) {
  std::uniform_real_distribution<double> level(0.25, 0.85), swing(0.0, 0.25), freq(0.3, 1.5),
      phase(0.0, 2.0 * std::numbers::pi);
  const double a = level(rng), b = swing(rng), f = freq(rng), ph = phase(rng);
  std::vector<double> s(static_cast<std::size_t>(bands));
  for (Index l = 0; l < bands; ++l) {
    const double t = bands > 1 ? static_cast<double>(l) / static_cast<double>(bands - 1) : 0.0;
    s[l] = std::clamp(a + b * std::cos(2.0 * std::numbers::pi * f * t + ph), 0.02, 1.0);
  }
  return s;
}

bool separated(const Box& a, const Box& b) {
  const auto apart = [](Index lo_a, Index len_a, Index lo_b, Index len_b) {
    return lo_b > lo_a + len_a - 1 + 2 || lo_a > lo_b + len_b - 1 + 2;
  };
  return apart(a.top, a.height, b.top, b.height) || apart(a.left, a.width, b.left, b.width);
}

}  // namespace

SceneKind parse_scene_kind(const std::string& s) {
  if (s == "piecewise") return SceneKind::Piecewise;
  if (s == "gaussian-blobs") return SceneKind::GaussianBlobs;
  if (s == "ramp") return SceneKind::Ramp;
  throw ValidationError("unknown scene kind '" + s + "' (expected piecewise, gaussian-blobs or ramp)");
}

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Piecewise: return "piecewise";
    case SceneKind::GaussianBlobs: return "gaussian-blobs";
    case SceneKind::Ramp: return "ramp";
  }
  return "piecewise";
}

PiecewiseScene piecewise_scene(const Dims& dims, std::uint64_t seed, int max_boxes) {
  require_dims(dims, "piecewise_scene");
  std::mt19937_64 rng(seed);
  PiecewiseScene out;
  out.cube = CubeD(dims);

  std::uniform_real_distribution<double> bg_level(0.05, 0.2);
  const double bg0 = bg_level(rng), bg1 = bg_level(rng);
  out.background.resize(static_cast<std::size_t>(dims.bands));
  for (Index l = 0; l < dims.bands; ++l) {
    const double t = dims.bands > 1 ? static_cast<double>(l) / static_cast<double>(dims.bands - 1) : 0.0;
    out.background[l] = bg0 + (bg1 - bg0) * t;
    out.cube.band(l).setConstant(out.background[l]);
  }

  // Boxes occupy rows/cols 1 .. size-2 so every edge has a background neighbour inside the image.
  const Index avail_h = dims.rows - 2, avail_w = dims.cols - 2;
  if (avail_h < 1 || avail_w < 1) return out;
  if (max_boxes <= 0) max_boxes = static_cast<int>(std::max<Index>(2, dims.plane() / 256));
  const Index min_h = std::max<Index>(1, avail_h / 8), max_h = std::max(min_h, avail_h / 3);
  const Index min_w = std::max<Index>(1, avail_w / 8), max_w = std::max(min_w, avail_w / 3);
  std::uniform_int_distribution<Index> hd(min_h, max_h), wd(min_w, max_w);

  for (int attempt = 0; attempt < 50 * max_boxes && static_cast<int>(out.boxes.size()) < max_boxes; ++attempt) {
    Box b;
    b.height = hd(rng);
    b.width = wd(rng);
    b.top = std::uniform_int_distribution<Index>(1, 1 + avail_h - b.height)(rng);
    b.left = std::uniform_int_distribution<Index>(1, 1 + avail_w - b.width)(rng);
    b.spectrum = smooth_spectrum(rng, dims.bands);
    if (!std::all_of(out.boxes.begin(), out.boxes.end(), [&](const Box& o) { return separated(o, b); })) continue;
    out.boxes.push_back(std::move(b));
  }

  for (const Box& b : out.boxes) {
    const double edge = static_cast<double>(2 * b.width + 2 * b.height - 2) + std::numbers::sqrt2;
    for (Index l = 0; l < dims.bands; ++l) {
      out.cube.band(l).block(b.top, b.left, b.height, b.width).setConstant(b.spectrum[l]);
      out.analytic_tv += std::abs(b.spectrum[l] - out.background[l]) * edge;
    }
  }
  return out;
}

CubeD gaussian_blobs_scene(const Dims& dims, std::uint64_t seed) {
  require_dims(dims, "gaussian_blobs_scene");
  std::mt19937_64 rng(seed);
  CubeD out = CubeD::Constant(dims, 0.05);
  const int blobs = static_cast<int>(std::max<Index>(3, dims.plane() / 200));
  const double extent = static_cast<double>(std::min(dims.rows, dims.cols));
  std::uniform_real_distribution<double> cm(0.0, static_cast<double>(dims.rows - 1)),
      cn(0.0, static_cast<double>(dims.cols - 1)), width(0.05 * extent + 0.5, 0.2 * extent + 0.5);
  for (int k = 0; k < blobs; ++k) {
    const double m0 = cm(rng), n0 = cn(rng), sw = width(rng);
    const auto spectrum = smooth_spectrum(rng, dims.bands);
    for (Index m = 0; m < dims.rows; ++m) {
      for (Index n = 0; n < dims.cols; ++n) {
        const double r2 = ((m - m0) * (m - m0) + (n - n0) * (n - n0)) / (2.0 * sw * sw);
        const double g = std::exp(-r2);
        for (Index l = 0; l < dims.bands; ++l) out(m, n, l) += 0.6 * g * spectrum[l];
      }
    }
  }
  const double peak = out.vec().maxCoeff();
  if (peak > 1.0) out *= 1.0 / peak;
  return out;
}

CubeD ramp_scene(const Dims& dims, std::uint64_t seed) {
  require_dims(dims, "ramp_scene");
  std::mt19937_64 rng(seed);
  const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const auto spectrum = smooth_spectrum(rng, dims.bands);
  const double cu = std::cos(angle), su = std::sin(angle);
  const double sh = static_cast<double>(std::max<Index>(dims.rows - 1, 1));
  const double sw = static_cast<double>(std::max<Index>(dims.cols - 1, 1));
  CubeD out(dims);
  for (Index m = 0; m < dims.rows; ++m) {
    for (Index n = 0; n < dims.cols; ++n) {
      // Projection onto the ramp direction, mapped into [0, 1].
      const double t = 0.5 + 0.5 * (cu * (2.0 * m / sh - 1.0) + su * (2.0 * n / sw - 1.0)) / std::numbers::sqrt2;
      for (Index l = 0; l < dims.bands; ++l) out(m, n, l) = t * spectrum[l];
    }
  }
  return out;
}

CubeD generate_scene(SceneKind kind, const Dims& dims, std::uint64_t seed) {
  switch (kind) {
    case SceneKind::Piecewise: return piecewise_scene(dims, seed).cube;
    case SceneKind::GaussianBlobs: return gaussian_blobs_scene(dims, seed);
    case SceneKind::Ramp: return ramp_scene(dims, seed);
  }
  throw ValidationError("unknown scene kind");
}

CubeD bernoulli_mask(const Dims& dims, double density, std::uint64_t seed) {
  require_dims(dims, "bernoulli_mask");
  if (!(density > 0.0 && density <= 1.0)) throw ValidationError("mask density must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution open(density);
  PlaneD pattern(dims.rows, dims.cols);
  for (Index m = 0; m < dims.rows; ++m)
    for (Index n = 0; n < dims.cols; ++n) pattern(m, n) = open(rng) ? 1.0 : 0.0;
  CubeD out(dims);
  for (Index l = 0; l < dims.bands; ++l) out.band(l) = pattern;
  return out;
}

}  // namespace cassi
