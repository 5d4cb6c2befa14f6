#include "cassi/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "cassi/errors.hpp"

namespace cassi::cli {

namespace {

std::string loop_order_name(LoopOrder o) { return o == LoopOrder::Conventional ? "conventional" : "as_printed"; }

LoopOrder parse_loop_order(const std::string& s) {
  if (s == "as_printed") return LoopOrder::AsPrinted;
  if (s == "conventional") return LoopOrder::Conventional;
  throw ValidationError("unknown loop order '" + s + "' (expected as_printed or conventional)");
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ValidationError("unknown config key '" + where + key + "'");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json lineage_metadata(const std::string& kind, const std::string& lineage, const std::vector<std::string>& parents) {
  std::vector<std::string> ancestry{lineage};
  for (const auto& p : parents)
    if (std::find(ancestry.begin(), ancestry.end(), p) == ancestry.end()) ancestry.push_back(p);
  return json{{"kind", kind}, {"lineage", lineage}, {"ancestry", ancestry}};
}

json file_entry(const fs::path& path) {
  return json{{"file", path.filename().string()}, {"hash", io::hash_file(path)}};
}

CubeD broadcast_mask(const CubeD& mask, const Dims& scene) {
  if (mask.rows() != scene.rows || mask.cols() != scene.cols) {
    throw DimensionError("mask " + to_string(mask.dims()) + " does not match scene " + to_string(scene));
  }
  if (mask.bands() == scene.bands) return mask;
  if (mask.bands() != 1) {
    throw DimensionError("mask has " + std::to_string(mask.bands()) + " bands, scene has " +
                         std::to_string(scene.bands));
  }
  CubeD out(scene);
  for (Index l = 0; l < scene.bands; ++l) out.band(l) = mask.band(0);
  return out;
}

fs::path resolve_input(const RunConfig& c, const char* file) {
  if (c.input_dir.empty()) throw ValidationError("reconstruct needs input_dir (the simulate output directory)");
  return fs::path(c.input_dir) / file;
}

}  // namespace

void RunConfig::validate() const {
  if (shear_step < 0) throw ValidationError("shear_step must be >= 0");
  if (!(noise_sigma >= 0.0) || !(rgb_noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  if (rgb_channels != 1 && rgb_channels != 3) throw ValidationError("rgb_channels must be 1 or 3");
  if (bayer && rgb_channels != 3) throw ValidationError("a Bayer mosaic needs rgb_channels = 3");
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
  admm.validate();
}

RunConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"scene", "mask", "rgb_response", "input_dir", "reference", "output_dir", "shear_step", "noise_sigma",
                  "rgb_noise_sigma", "seed", "rgb_channels", "bayer", "mode", "dtype", "admm", "fusion",
                  "reference_options"},
                 "");
  RunConfig c;
  auto str = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = field<std::string>(j, key);
  };
  str("scene", c.scene);
  str("mask", c.mask);
  str("rgb_response", c.rgb_response);
  str("input_dir", c.input_dir);
  str("reference", c.reference);
  str("output_dir", c.output_dir);
  if (j.contains("shear_step")) c.shear_step = field<Index>(j, "shear_step");
  if (j.contains("noise_sigma")) c.noise_sigma = field<double>(j, "noise_sigma");
  if (j.contains("rgb_noise_sigma")) c.rgb_noise_sigma = field<double>(j, "rgb_noise_sigma");
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("rgb_channels")) c.rgb_channels = field<Index>(j, "rgb_channels");
  if (j.contains("bayer")) {
    const auto b = field<std::string>(j, "bayer");
    if (b != "none") c.bayer = parse_bayer_pattern(b);
  }
  if (j.contains("mode")) c.mode = parse_mode(field<std::string>(j, "mode"));
  if (j.contains("dtype")) c.dtype = io::parse_dtype(field<std::string>(j, "dtype"));

  if (j.contains("admm")) {
    const json& a = j.at("admm");
    reject_unknown(a,
                   {"rho", "mu", "tau", "stage_growth", "iters_per_stage", "num_stages", "ref_update_interval",
                    "loop_order", "warm_start_dual", "star_cg_tol", "star_cg_max_iter", "strict"},
                   "admm.");
    auto& p = c.admm;
    if (a.contains("rho")) p.rho = field<double>(a, "rho");
    if (a.contains("mu")) p.mu = field<double>(a, "mu");
    if (a.contains("tau")) p.tau = field<double>(a, "tau");
    if (a.contains("stage_growth")) p.stage_growth = field<double>(a, "stage_growth");
    if (a.contains("iters_per_stage")) p.iters_per_stage = field<int>(a, "iters_per_stage");
    if (a.contains("num_stages")) p.num_stages = field<int>(a, "num_stages");
    if (a.contains("ref_update_interval")) p.ref_update_interval = field<int>(a, "ref_update_interval");
    if (a.contains("loop_order")) p.order = parse_loop_order(field<std::string>(a, "loop_order"));
    if (a.contains("warm_start_dual")) p.warm_start_dual = field<bool>(a, "warm_start_dual");
    if (a.contains("star_cg_tol")) p.star_cg_tol = field<double>(a, "star_cg_tol");
    if (a.contains("star_cg_max_iter")) p.star_cg_max_iter = field<int>(a, "star_cg_max_iter");
    if (a.contains("strict")) p.strict = field<bool>(a, "strict");
  }
  if (j.contains("fusion")) {
    const json& f = j.at("fusion");
    reject_unknown(f, {"inner_iters"}, "fusion.");
    if (f.contains("inner_iters")) c.admm.inner_iters = field<int>(f, "inner_iters");
  }
  if (j.contains("reference_options")) {
    const json& r = j.at("reference_options");
    reject_unknown(r, {"channel_nodes", "lift_with_response"}, "reference_options.");
    if (r.contains("channel_nodes") && !r.at("channel_nodes").is_null()) {
      c.reference_options.channel_nodes = field<std::vector<double>>(r, "channel_nodes");
    }
    if (r.contains("lift_with_response")) {
      c.reference_options.lift_with_response = field<bool>(r, "lift_with_response");
    }
  }
  c.validate();
  return c;
}

json config_parameters(const RunConfig& c) {
  const auto& p = c.admm;
  json nodes = c.reference_options.channel_nodes ? json(*c.reference_options.channel_nodes) : json(nullptr);
  return json{
      {"shear_step", c.shear_step},
      {"noise_sigma", c.noise_sigma},
      {"rgb_noise_sigma", c.rgb_noise_sigma},
      {"seed", c.seed},
      {"rgb_channels", c.rgb_channels},
      {"bayer", c.bayer ? to_string(*c.bayer) : "none"},
      {"mode", to_string(c.mode)},
      {"dtype", io::to_string(c.dtype)},
      {"admm",
       {{"rho", p.rho},
        {"mu", p.mu},
        {"tau", p.tau},
        {"stage_growth", p.stage_growth},
        {"iters_per_stage", p.iters_per_stage},
        {"num_stages", p.num_stages},
        {"ref_update_interval", p.ref_update_interval},
        {"loop_order", loop_order_name(p.order)},
        {"warm_start_dual", p.warm_start_dual},
        {"star_cg_tol", p.star_cg_tol},
        {"star_cg_max_iter", p.star_cg_max_iter},
        {"strict", p.strict}}},
      {"fusion", {{"inner_iters", p.inner_iters}}},
      {"reference_options",
       {{"channel_nodes", nodes}, {"lift_with_response", c.reference_options.lift_with_response}}},
  };
}

json config_to_json(const RunConfig& c) {
  json j = config_parameters(c);
  j["scene"] = c.scene;
  j["mask"] = c.mask;
  j["rgb_response"] = c.rgb_response;
  j["input_dir"] = c.input_dir;
  j["reference"] = c.reference;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& j, const std::string& key, const std::string& value, bool as_string) {
  json* node = &j;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  if (path.empty()) throw ValidationError("empty override key");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) throw ValidationError("override '" + key + "' descends into a non-object");
    node = &(*node)[path[i]];
    if (node->is_null()) *node = json::object();
  }
  json parsed = as_string ? json(value) : json::parse(value, nullptr, false);
  (*node)[path.back()] = parsed.is_discarded() ? json(value) : parsed;
}

std::vector<std::string> ancestry_of(const json& metadata) {
  std::vector<std::string> out;
  if (metadata.contains("ancestry") && metadata["ancestry"].is_array()) {
    for (const auto& a : metadata["ancestry"])
      if (a.is_string()) out.push_back(a.get<std::string>());
  } else if (metadata.contains("lineage") && metadata["lineage"].is_string()) {
    out.push_back(metadata["lineage"].get<std::string>());
  }
  return out;
}

SimulateOutputs cmd_simulate(const RunConfig& config) {
  config.validate();
  if (config.scene.empty() || config.mask.empty()) throw ValidationError("simulate needs scene and mask paths");
  const io::CubeRecord scene = io::read_cube(config.scene);
  const io::CubeRecord mask = io::read_cube(config.mask);
  const Dims d = scene.cube.dims();
  const CubeD t = broadcast_mask(mask.cube, d);
  const SpectralResponseD response = config.rgb_response.empty() ? io::default_response(config.rgb_channels, d.bands)
                                                                  : io::read_response_csv(config.rgb_response);
  if (response.bands() != d.bands) {
    throw DimensionError("spectral response has " + std::to_string(response.bands()) + " bands, scene has " +
                         std::to_string(d.bands));
  }
  if (config.bayer && response.channels() != 3) throw ValidationError("a Bayer mosaic needs a 3-channel response");

  json inputs{{"scene", file_entry(config.scene)}, {"mask", file_entry(config.mask)}};
  if (!config.rgb_response.empty()) inputs["rgb_response"] = file_entry(config.rgb_response);
  std::vector<std::string> parents = ancestry_of(scene.metadata);
  for (const auto& a : ancestry_of(mask.metadata)) parents.push_back(a);

  json params = config_parameters(config);
  const std::string lineage = io::hash_bytes(json{{"command", "simulate"}, {"parameters", params}, {"inputs", inputs}}.dump());

  const SystemModelD model(t, config.shear_step);
  const PlaneD y = simulate(model, scene.cube, config.noise_sigma, config.seed);
  const std::uint64_t rgb_seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  CubeD y_r;
  std::optional<CubeD> raw;
  if (config.bayer) {
    raw = mosaic_simulate(response, scene.cube, *config.bayer, config.rgb_noise_sigma, rgb_seed);
    y_r = demosaic_bilinear(*raw, *config.bayer);
  } else {
    y_r = rgb_forward(response, scene.cube);
    add_gaussian_noise(y_r.vec(), config.rgb_noise_sigma, rgb_seed);
  }

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  auto meta = [&](const std::string& kind) {
    json m = lineage_metadata(kind, lineage, parents);
    m["shear_step"] = config.shear_step;
    return m;
  };
  io::write_cube(dir / kMeasurementFile, io::plane_to_cube(y), config.dtype, meta("measurement"));
  io::write_cube(dir / kRgbFile, y_r, config.dtype, meta("rgb"));
  if (raw) io::write_cube(dir / kRgbRawFile, *raw, config.dtype, meta("rgb_raw"));
  io::write_cube(dir / kTruthFile, scene.cube, io::DType::F64, meta("ground_truth"));
  io::write_cube(dir / kMaskFile, t, io::DType::F64, meta("mask"));
  io::write_response_csv(dir / kResponseFile, response);

  json outputs{{"measurement", file_entry(dir / kMeasurementFile)},
               {"rgb", file_entry(dir / kRgbFile)},
               {"ground_truth", file_entry(dir / kTruthFile)},
               {"mask", file_entry(dir / kMaskFile)},
               {"response", file_entry(dir / kResponseFile)}};
  if (raw) outputs["rgb_raw"] = file_entry(dir / kRgbRawFile);
  json manifest{{"command", "simulate"},
                {"lineage", lineage},
                {"parameters", params},
                {"inputs", inputs},
                {"outputs", outputs},
                {"dims", {{"rows", d.rows}, {"cols", d.cols}, {"bands", d.bands}}},
                {"measurement_cols", model.measurementCols()}};
  io::write_text(dir / kManifestFile, manifest.dump(2) + "\n");
  return {dir, lineage, model.measurementCols()};
}

ReconstructOutputs cmd_reconstruct(const RunConfig& config) {
  config.validate();
  const fs::path manifest_path = resolve_input(config, kManifestFile);
  const std::string manifest_text = io::read_text(manifest_path);
  json source;
  try {
    source = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }

  const fs::path meas_path = resolve_input(config, kMeasurementFile);
  const fs::path mask_path = resolve_input(config, kMaskFile);
  const io::CubeRecord meas = io::read_cube(meas_path);
  const io::CubeRecord mask = io::read_cube(mask_path);
  const PlaneD y = io::cube_to_plane(meas.cube);
  const Index s = meas.metadata.value("shear_step", config.shear_step);
  const SystemModelD model(mask.cube, s);
  model.requireMeasurement(y, "reconstruct");

  json inputs{{"manifest", file_entry(manifest_path)},
              {"measurement", file_entry(meas_path)},
              {"mask", file_entry(mask_path)}};
  std::vector<std::string> parents = ancestry_of(meas.metadata);

  ReconstructInputs<double> in;
  in.mode = config.mode;
  in.reference_options = config.reference_options;
  if (config.mode != ReconstructionMode::TvOnly) {
    const fs::path rgb_path = resolve_input(config, kRgbFile);
    if (fs::exists(rgb_path)) {
      in.y_r = io::read_cube(rgb_path).cube;
      inputs["rgb"] = file_entry(rgb_path);
    }
    const fs::path response_path = resolve_input(config, kResponseFile);
    if ((config.mode == ReconstructionMode::TvdsStar || config.reference_options.lift_with_response) &&
        fs::exists(response_path)) {
      in.response = io::read_response_csv(response_path);
      inputs["response"] = file_entry(response_path);
    }
    if (!config.reference.empty()) {
      const io::CubeRecord ref = io::read_cube(config.reference);
      in.x_ref0 = ref.cube;
      inputs["reference"] = file_entry(config.reference);
      for (const auto& a : ancestry_of(ref.metadata)) parents.push_back(a);
    }
    if (!in.y_r && !in.x_ref0) {
      throw ValidationError(to_string(config.mode) + " mode needs " + (fs::path(config.input_dir) / kRgbFile).string() +
                            " or an explicit reference");
    }
  }

  const json params = config_parameters(config);
  const std::string lineage =
      io::hash_bytes(json{{"command", "reconstruct"}, {"parameters", params}, {"inputs", inputs}}.dump());

  std::ostringstream log;
  log << "stage,iteration,mu,tau,primal_residual,dual_residual,objective,augmented_lagrangian\n";
  std::size_t rows = 0;
  auto on_iter = [&](const IterationRecord& r) {
    log << r.stage << ',' << r.iteration << ',' << fmt(r.mu) << ',' << fmt(r.tau) << ',' << fmt(r.primal_residual)
        << ',' << fmt(r.dual_residual) << ',' << fmt(r.objective) << ',' << fmt(r.augmented_lagrangian) << '\n';
    ++rows;
  };
  const ReconstructResult<double> result = reconstruct(model, y, in, config.admm, on_iter);

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  io::write_cube(dir / kReconFile, result.x, config.dtype, lineage_metadata("reconstruction", lineage, parents));
  io::write_text(dir / kIterationLog, log.str());
  io::write_band_previews(dir, "reconstruction", result.x);
  const fs::path copied = dir / kManifestFile;
  if (!fs::exists(copied) || !fs::equivalent(copied, manifest_path)) io::write_text(copied, manifest_text);

  ReconstructOutputs out;
  out.dir = dir;
  out.lineage = lineage;
  out.log_rows = rows;
  out.final_primal_residual = result.log.empty() ? 0.0 : result.log.back().primal_residual;
  out.cg_warnings = result.cg_warnings;
  out.fusion_step_warning = result.fusion_step_warning;

  json manifest{{"command", "reconstruct"},
                {"lineage", lineage},
                {"source_lineage", source.value("lineage", "")},
                {"parameters", params},
                {"inputs", inputs},
                {"outputs", {{"reconstruction", file_entry(dir / kReconFile)}, {"log", file_entry(dir / kIterationLog)}}},
                {"iterations", rows},
                {"final_primal_residual", out.final_primal_residual},
                {"cg_warnings", out.cg_warnings},
                {"fusion_step_warning", out.fusion_step_warning}};
  io::write_text(dir / kReconManifest, manifest.dump(2) + "\n");
  return out;
}

EvaluateOutputs cmd_evaluate(const EvaluateOptions& options) {
  const io::CubeRecord recon = io::read_cube(options.recon);
  const io::CubeRecord truth = io::read_cube(options.truth);
  recon.cube.requireSameShape(truth.cube, "evaluate");

  EvaluateOutputs out;
  const auto recon_ancestry = ancestry_of(recon.metadata);
  const auto truth_ancestry = ancestry_of(truth.metadata);
  out.lineage_matched =
      !truth_ancestry.empty() &&
      std::find(recon_ancestry.begin(), recon_ancestry.end(), truth_ancestry.front()) != recon_ancestry.end();
  if (!out.lineage_matched && !options.force) {
    throw ValidationError("lineage mismatch: " + options.truth.string() + " is not an ancestor of " +
                          options.recon.string() + " (pass --force to evaluate anyway)");
  }

  out.report = evaluate_metrics(recon.cube, truth.cube, options.peak);
  const std::vector<ScoredScene> table{{options.scene_name, out.report}};
  out.text = metrics_table_text(table);

  const fs::path dir = options.output_dir;
  fs::create_directories(dir);
  io::write_text(dir / "metrics.csv", metrics_table_csv(table));
  io::write_text(dir / "metrics.txt", out.text);
  io::write_text(dir / "per_band_psnr.csv", per_band_psnr_csv(table));
  json manifest{{"command", "evaluate"},
                {"inputs", {{"reconstruction", file_entry(options.recon)}, {"truth", file_entry(options.truth)}}},
                {"lineage_matched", out.lineage_matched},
                {"forced", options.force && !out.lineage_matched},
                {"peak_convention", to_string(options.peak)}};
  io::write_text(dir / "evaluate_manifest.json", manifest.dump(2) + "\n");
  return out;
}

Dims parse_dims(const std::string& text) {
  std::vector<Index> v;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stoll(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ValidationError("malformed dims '" + text + "' (expected H,W,L)");
    }
  }
  if (v.size() != 3) throw ValidationError("dims must be H,W,L");
  const Dims d{v[0], v[1], v[2]};
  if (!d.valid()) throw ValidationError("dims must be positive, got " + text);
  return d;
}

void cmd_genscene(const GenSceneOptions& o) {
  if (o.output.empty()) throw ValidationError("genscene needs an output path");
  json params{{"command", "genscene"},
              {"scene_kind", to_string(o.kind)},
              {"dims", {o.dims.rows, o.dims.cols, o.dims.bands}},
              {"seed", o.seed}};
  json meta = lineage_metadata("scene", io::hash_bytes(params.dump()), {});
  meta["scene_kind"] = to_string(o.kind);
  meta["seed"] = o.seed;
  CubeD cube;
  if (o.kind == SceneKind::Piecewise) {
    const PiecewiseScene scene = piecewise_scene(o.dims, o.seed);
    cube = scene.cube;
    meta["analytic_tv"] = scene.analytic_tv;
    meta["boxes"] = scene.boxes.size();
  } else {
    cube = generate_scene(o.kind, o.dims, o.seed);
  }
  io::write_cube(o.output, cube, io::DType::F64, meta);
}

void cmd_genmask(const GenMaskOptions& o) {
  if (o.output.empty()) throw ValidationError("genmask needs an output path");
  const CubeD mask = bernoulli_mask(o.dims, o.density, o.seed);
  json params{{"command", "genmask"},
              {"dims", {o.dims.rows, o.dims.cols, o.dims.bands}},
              {"density", o.density},
              {"seed", o.seed}};
  json meta = lineage_metadata("mask", io::hash_bytes(params.dump()), {});
  meta["density"] = o.density;
  meta["seed"] = o.seed;
  io::write_cube(o.output, mask, io::DType::F64, meta);
}

void cmd_convert(const fs::path& input, const fs::path& output, io::DType dtype) {
  if (input.extension() == ".npy") {
    const CubeD cube = io::read_npy(input);
    json meta = lineage_metadata("converted", io::hash_file(input), {});
    meta["source"] = input.filename().string();
    io::write_cube(output, cube, dtype, meta);
  } else {
    if (output.extension() != ".npy") throw ValidationError("convert: one side must be a .npy file");
    io::write_npy(output, io::read_cube(input).cube);
  }
}

}  // namespace cassi::cli
