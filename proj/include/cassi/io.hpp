#pragma once

// On-disk formats: the HSC1 cube container, .npy conversion, PGM previews
// and spectral response CSVs.
//
// HSC1 layout (little-endian):
//   "HSC1" | u16 version | u32 H | u32 W | u32 L | u8 dtype | u8 reserved |
//   u32 metadata length | metadata JSON | band-major payload
// A plane is stored as an L = 1 cube.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cassi/rgb_model.hpp"
#include "cassi/tensor.hpp"

namespace cassi::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr char kCubeMagic[4] = {'H', 'S', 'C', '1'};
inline constexpr std::uint16_t kCubeVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

std::string to_string(DType t);
DType parse_dtype(const std::string& s);

struct CubeRecord {
  CubeD cube;
  DType dtype = DType::F64;
  json metadata = json::object();
};

std::string encode_cube(const CubeD& cube, DType dtype = DType::F64, const json& metadata = json::object());
CubeRecord decode_cube(const std::string& bytes);

void write_cube(const fs::path& path, const CubeD& cube, DType dtype = DType::F64,
                const json& metadata = json::object());
CubeRecord read_cube(const fs::path& path);

CubeD plane_to_cube(const PlaneD& plane);
PlaneD cube_to_plane(const CubeD& cube);

/// NumPy .npy, float64 little-endian, C order, shape (L, H, W).
void write_npy(const fs::path& path, const CubeD& cube);
CubeD read_npy(const fs::path& path);

/// 8-bit binary PGM, values scaled by `scale` and clamped to [0, 255].
void write_pgm(const fs::path& path, const PlaneD& plane, double scale);
/// One PGM per band, named <prefix>_band_NN.pgm, sharing a global scale.
void write_band_previews(const fs::path& dir, const std::string& prefix, const CubeD& cube);

/// C rows of L comma-separated nonnegative weights. Lines starting with '#' are skipped.
SpectralResponseD read_response_csv(const fs::path& path);
void write_response_csv(const fs::path& path, const SpectralResponseD& response);

/// Gaussian R, G, B curves over L bands (or a flat panchromatic row), rows summing to 1.
SpectralResponseD default_response(Index channels, Index bands);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);
std::string hash_bytes(const std::string& bytes);
std::string hash_file(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace cassi::io
