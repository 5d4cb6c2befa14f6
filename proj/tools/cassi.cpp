#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "cassi/cli.hpp"
#include "cassi/errors.hpp"

namespace {

using namespace cassi;
using cli::json;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

/// Flags layered over the config file; only flags actually given override it.
struct RunFlags {
  std::string config;
  std::map<std::string, std::pair<std::string, bool>> values;  // key -> (text, keep as string)
  std::vector<std::string> sets;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help,
           bool text = false) {
    app->add_option_function<std::string>(
        flag, [this, key, text](const std::string& v) { values[key] = {v, text}; }, help);
  }

  cli::RunConfig resolve() const {
    json j = json::object();
    if (!config.empty()) j = json::parse(io::read_text(config));
    for (const auto& [key, value] : values) cli::apply_override(j, key, value.first, value.second);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
      cli::apply_override(j, s.substr(0, eq), s.substr(eq + 1));
    }
    return cli::config_from_json(j);
  }
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("-c,--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--set", f.sets, "Override any config key, e.g. --set admm.rho=0.05");
  f.add(app, "-o,--out", "output_dir", "Output directory", true);
  f.add(app, "--seed", "seed", "Random seed");
  f.add(app, "--shear", "shear_step", "Dispersion shear step s");
  f.add(app, "--dtype", "dtype", "Stored sample type: f32 or f64");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-camera coded-aperture spectral imaging: simulation, reconstruction, evaluation"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "Simulate CASSI and RGB measurements of a scene");
  add_run_flags(sim, sim_flags);
  sim_flags.add(sim, "--scene", "scene", "Scene cube file", true);
  sim_flags.add(sim, "--mask", "mask", "Coded aperture cube file (L = 1 is replicated)", true);
  sim_flags.add(sim, "--response", "rgb_response", "Spectral response CSV (C rows x L columns)", true);
  sim_flags.add(sim, "--sigma", "noise_sigma", "CASSI noise standard deviation");
  sim_flags.add(sim, "--rgb-sigma", "rgb_noise_sigma", "RGB noise standard deviation");
  sim_flags.add(sim, "--channels", "rgb_channels", "1 (panchromatic) or 3 (RGB)");
  sim_flags.add(sim, "--bayer", "bayer", "none, RGGB, BGGR, GRBG or GBRG");

  RunFlags rec_flags;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct a cube from a simulate output directory");
  add_run_flags(rec, rec_flags);
  rec_flags.add(rec, "-i,--input", "input_dir", "Directory written by simulate", true);
  rec_flags.add(rec, "--mode", "mode", "tvds, tvds_star or tv_only");
  rec_flags.add(rec, "--reference", "reference", "Explicit reference cube", true);
  rec_flags.add(rec, "--rho", "admm.rho", "ADMM penalty");
  rec_flags.add(rec, "--mu", "admm.mu", "Stage-1 regularization weight");
  rec_flags.add(rec, "--tau", "admm.tau", "Stage-1 dual step");
  rec_flags.add(rec, "--stages", "admm.num_stages", "Number of stages");
  rec_flags.add(rec, "--iters", "admm.iters_per_stage", "ADMM iterations per stage");
  rec_flags.add(rec, "--inner", "fusion.inner_iters", "Fusion iterations per Z-step");
  rec_flags.add(rec, "--order", "admm.loop_order", "as_printed or conventional");
  bool strict = false;
  rec->add_flag("--strict", strict, "Fail when an inner CG solve does not converge");

  cli::EvaluateOptions eval_opts;
  std::string peak = "reference_max";
  auto* eval = app.add_subcommand("evaluate", "Score a reconstruction against ground truth");
  eval->add_option("recon", eval_opts.recon, "Reconstruction cube")->required()->check(CLI::ExistingFile);
  eval->add_option("truth", eval_opts.truth, "Ground-truth cube")->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--out", eval_opts.output_dir, "Output directory");
  eval->add_option("--name", eval_opts.scene_name, "Scene name used as the table column");
  eval->add_option("--peak", peak, "PSNR peak: reference_max or unit")
      ->check(CLI::IsMember({"reference_max", "unit"}));
  eval->add_flag("--force", eval_opts.force, "Evaluate even if the files come from unrelated runs");

  cli::GenSceneOptions scene_opts;
  std::string scene_kind = "piecewise", scene_dims = "64,64,8";
  auto* gscene = app.add_subcommand("genscene", "Generate a synthetic scene cube");
  gscene->add_option("kind", scene_kind, "piecewise, gaussian-blobs or ramp")
      ->check(CLI::IsMember({"piecewise", "gaussian-blobs", "ramp"}));
  gscene->add_option("--dims", scene_dims, "H,W,L");
  gscene->add_option("--seed", scene_opts.seed, "Random seed");
  gscene->add_option("-o,--out", scene_opts.output, "Output cube file")->required();

  cli::GenMaskOptions mask_opts;
  std::string mask_dims = "64,64,8";
  auto* gmask = app.add_subcommand("genmask", "Generate a Bernoulli coded-aperture mask");
  gmask->add_option("--dims", mask_dims, "H,W,L");
  gmask->add_option("--density", mask_opts.density, "Open-site probability in (0, 1]");
  gmask->add_option("--seed", mask_opts.seed, "Random seed");
  gmask->add_option("-o,--out", mask_opts.output, "Output cube file")->required();

  std::string conv_in, conv_out, conv_dtype = "f64";
  auto* conv = app.add_subcommand("convert", "Convert between .npy (L, H, W) arrays and cube files");
  conv->add_option("input", conv_in, "Input file")->required()->check(CLI::ExistingFile);
  conv->add_option("output", conv_out, "Output file")->required();
  conv->add_option("--dtype", conv_dtype, "Cube sample type: f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto out = cli::cmd_simulate(sim_flags.resolve());
      std::cout << "simulate: wrote " << out.dir.string() << " (measurement width " << out.measurement_cols
                << ", lineage " << out.lineage << ")\n";
    } else if (*rec) {
      auto config = rec_flags.resolve();
      if (strict) config.admm.strict = true;
      const auto out = cli::cmd_reconstruct(config);
      if (out.fusion_step_warning) std::cerr << "warning: fusion step mu*tau >= 1/8 at some stage\n";
      if (out.cg_warnings > 0) std::cerr << "warning: " << out.cg_warnings << " CG solves did not converge\n";
      std::cout << "reconstruct: " << out.log_rows << " iterations, final primal residual "
                << out.final_primal_residual << ", wrote " << out.dir.string() << "\n";
    } else if (*eval) {
      eval_opts.peak = peak == "unit" ? PeakConvention::Unit : PeakConvention::ReferenceMax;
      const auto out = cli::cmd_evaluate(eval_opts);
      if (!out.lineage_matched) std::cerr << "warning: lineage mismatch ignored (--force)\n";
      std::cout << out.text;
    } else if (*gscene) {
      scene_opts.kind = parse_scene_kind(scene_kind);
      scene_opts.dims = cli::parse_dims(scene_dims);
      cli::cmd_genscene(scene_opts);
    } else if (*gmask) {
      mask_opts.dims = cli::parse_dims(mask_dims);
      cli::cmd_genmask(mask_opts);
    } else if (*conv) {
      cli::cmd_convert(conv_in, conv_out, io::parse_dtype(conv_dtype));
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
