#pragma once

// Synthetic scenes and coded-aperture masks.

#include <cstdint>
#include <string>
#include <vector>

#include "cassi/tensor.hpp"

namespace cassi {

enum class SceneKind { Piecewise, GaussianBlobs, Ramp };

SceneKind parse_scene_kind(const std::string& s);
std::string to_string(SceneKind k);

struct Box {
  Index top = 0, left = 0, height = 0, width = 0;
  std::vector<double> spectrum;  // one value per band
};

struct PiecewiseScene {
  CubeD cube;
  std::vector<double> background;
  std::vector<Box> boxes;
  double analytic_tv = 0.0;
};

/// Constant-spectrum rectangles on a flat background. Boxes stay off the
/// image border and at least two background pixels apart, so each box
/// contributes |v_l - bg_l| (2w + 2h - 2 + sqrt 2) to the isotropic TV of band l.
PiecewiseScene piecewise_scene(const Dims& dims, std::uint64_t seed, int max_boxes = 0);

/// Sum of Gaussian blobs with smooth per-blob spectra.
CubeD gaussian_blobs_scene(const Dims& dims, std::uint64_t seed);

/// Linear spatial ramp whose direction and spectrum depend on the seed.
CubeD ramp_scene(const Dims& dims, std::uint64_t seed);

CubeD generate_scene(SceneKind kind, const Dims& dims, std::uint64_t seed);

/// Binary mask: each spatial site is open with probability `density`; the
/// same pattern is replicated across all bands.
CubeD bernoulli_mask(const Dims& dims, double density, std::uint64_t seed);

}  // namespace cassi
