#pragma once

// Batch pipeline commands: simulate -> reconstruct -> evaluate, plus scene,
// mask and format utilities. Each command is a function of its config, seed
// and input files; the executable in tools/ is a thin argument parser.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cassi/admm.hpp"
#include "cassi/io.hpp"
#include "cassi/metrics.hpp"
#include "cassi/scenes.hpp"

namespace cassi::cli {

using io::json;
namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMeasurementFile = "measurement.hsc";
inline constexpr const char* kRgbFile = "rgb.hsc";
inline constexpr const char* kRgbRawFile = "rgb_raw.hsc";
inline constexpr const char* kTruthFile = "ground_truth.hsc";
inline constexpr const char* kMaskFile = "mask.hsc";
inline constexpr const char* kResponseFile = "response.csv";
inline constexpr const char* kReconFile = "reconstruction.hsc";
inline constexpr const char* kIterationLog = "iterations.csv";
inline constexpr const char* kReconManifest = "reconstruct_manifest.json";

/// Every default equals the published parameter table.
struct RunConfig {
  // paths
  std::string scene;
  std::string mask;
  std::string rgb_response;  // CSV; empty means the built-in Gaussian curves
  std::string input_dir;     // simulate output consumed by reconstruct
  std::string reference;     // optional explicit reference cube
  std::string output_dir = "out";

  Index shear_step = 1;
  double noise_sigma = 0.0;
  double rgb_noise_sigma = 0.0;
  std::uint64_t seed = 0;
  Index rgb_channels = 3;
  std::optional<BayerPattern> bayer;  // none: the RGB image is simulated already demosaicked
  ReconstructionMode mode = ReconstructionMode::Tvds;
  io::DType dtype = io::DType::F64;
  AdmmParams admm;
  ReferenceOptions reference_options;

  void validate() const;
};

RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);
/// Parameters only: the part of the config that determines output bytes.
json config_parameters(const RunConfig& c);
RunConfig load_config(const fs::path& path);
/// Sets a dotted key ("admm.rho") in a JSON config from its textual value.
/// Unless `as_string`, values that parse as JSON keep their JSON type.
void apply_override(json& j, const std::string& key, const std::string& value, bool as_string = false);

struct SimulateOutputs {
  fs::path dir;
  std::string lineage;
  Index measurement_cols = 0;
};
SimulateOutputs cmd_simulate(const RunConfig& config);

struct ReconstructOutputs {
  fs::path dir;
  std::string lineage;
  std::size_t log_rows = 0;
  double final_primal_residual = 0.0;
  int cg_warnings = 0;
  bool fusion_step_warning = false;
};
ReconstructOutputs cmd_reconstruct(const RunConfig& config);

struct EvaluateOptions {
  fs::path recon;
  fs::path truth;
  fs::path output_dir = "out";
  std::string scene_name = "scene";
  PeakConvention peak = PeakConvention::ReferenceMax;
  bool force = false;  // accept inputs from unrelated runs
};
struct EvaluateOutputs {
  MetricReport report;
  bool lineage_matched = false;
  std::string text;
};
EvaluateOutputs cmd_evaluate(const EvaluateOptions& options);

Dims parse_dims(const std::string& text);

struct GenSceneOptions {
  SceneKind kind = SceneKind::Piecewise;
  Dims dims{64, 64, 8};
  std::uint64_t seed = 0;
  fs::path output;
};
void cmd_genscene(const GenSceneOptions& options);

struct GenMaskOptions {
  Dims dims{64, 64, 8};
  double density = 0.5;
  std::uint64_t seed = 0;
  fs::path output;
};
void cmd_genmask(const GenMaskOptions& options);

/// .npy <-> cube file, by the extension of the input.
void cmd_convert(const fs::path& input, const fs::path& output, io::DType dtype = io::DType::F64);

/// Lineage hashes a cube file claims to descend from, its own first.
std::vector<std::string> ancestry_of(const json& metadata);

}  // namespace cassi::cli
