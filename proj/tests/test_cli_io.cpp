#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "cassi/cli.hpp"
#include "oracles.hpp"

using namespace cassi;
namespace fs = std::filesystem;
using cassi::io::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("cassi_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

std::string slurp(const fs::path& p) { return io::read_text(p); }

// Scene and mask files plus a config wired to them, with a short schedule.
cli::RunConfig make_inputs(const TempDir& dir, const Dims& d, std::uint64_t seed) {
  cli::GenSceneOptions gs;
  gs.dims = d;
  gs.seed = seed;
  gs.output = dir / "scene.hsc";
  cli::cmd_genscene(gs);
  cli::GenMaskOptions gm;
  gm.dims = {d.rows, d.cols, 1};
  gm.seed = seed + 1;
  gm.output = dir / "mask.hsc";
  cli::cmd_genmask(gm);

  cli::RunConfig c;
  c.scene = (dir / "scene.hsc").string();
  c.mask = (dir / "mask.hsc").string();
  c.output_dir = (dir / "sim").string();
  c.seed = seed;
  c.admm.num_stages = 2;
  c.admm.iters_per_stage = 3;
  c.admm.inner_iters = 5;
  return c;
}

}  // namespace

TEST_CASE("cube container round trip") {
  oracle::Rng rng(81);
  const CubeD x = oracle::random_cube({3, 4, 5}, rng, -1, 1);
  const json meta{{"kind", "test"}, {"value", 3}};
  const io::CubeRecord back = io::decode_cube(io::encode_cube(x, io::DType::F64, meta));
  CHECK(back.cube.dims() == x.dims());
  CHECK(back.cube.vec() == x.vec());
  CHECK(back.dtype == io::DType::F64);
  CHECK(back.metadata == meta);

  const io::CubeRecord f32 = io::decode_cube(io::encode_cube(x, io::DType::F32));
  CHECK(f32.dtype == io::DType::F32);
  CHECK((f32.cube.vec() - x.vec()).cwiseAbs().maxCoeff() <= 1e-7);

  const std::string bytes = io::encode_cube(x);
  CHECK(bytes.substr(0, 4) == "HSC1");
  CHECK(bytes.size() > 3 * 4 * 5 * 8);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(io::decode_cube(bad), ValidationError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(io::decode_cube(bad), ValidationError);
  CHECK_THROWS_AS(io::decode_cube(bytes.substr(0, bytes.size() - 1)), ValidationError);
  CHECK_THROWS_AS(io::decode_cube(bytes + "x"), ValidationError);
  CHECK_THROWS_AS(io::decode_cube("HSC"), ValidationError);

  const PlaneD p = PlaneD::Random(3, 7);
  CHECK(io::cube_to_plane(io::plane_to_cube(p)) == p);
  CHECK_THROWS_AS(io::cube_to_plane(x), DimensionError);
}

TEST_CASE("npy, previews, response files and hashing") {
  TempDir dir("io");
  oracle::Rng rng(82);
  const CubeD x = oracle::random_cube({3, 4, 2}, rng);
  io::write_npy(dir / "x.npy", x);
  CHECK(io::read_npy(dir / "x.npy").vec() == x.vec());
  const std::string npy = slurp(dir / "x.npy");
  CHECK(npy.substr(1, 5) == "NUMPY");
  CHECK(npy.find("'shape': (2, 3, 4)") != std::string::npos);
  CHECK((npy.size() - 3 * 4 * 2 * 8) % 64 == 0);

  cli::cmd_convert(dir / "x.npy", dir / "x.hsc");
  CHECK(io::read_cube(dir / "x.hsc").cube.vec() == x.vec());
  cli::cmd_convert(dir / "x.hsc", dir / "y.npy");
  CHECK(slurp(dir / "y.npy") == npy);
  CHECK_THROWS_AS(cli::cmd_convert(dir / "x.hsc", dir / "z.hsc"), ValidationError);

  io::write_band_previews(dir.path, "x", x);
  const std::string pgm = slurp(dir / "x_band_01.pgm");
  CHECK(pgm.rfind("P5\n4 3\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n4 3\n255\n").size() + 12);

  const SpectralResponseD resp = io::default_response(3, 8);
  CHECK(resp.channels() == 3);
  CHECK((resp.matrix().rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  CHECK(io::default_response(1, 5).matrix().isApprox(Eigen::MatrixXd::Constant(1, 5, 0.2)));
  io::write_response_csv(dir / "r.csv", resp);
  CHECK(io::read_response_csv(dir / "r.csv").matrix() == resp.matrix());
  io::write_text(dir / "bad.csv", "# comment\n0.1,0.2\n0.3\n");
  CHECK_THROWS_AS(io::read_response_csv(dir / "bad.csv"), DimensionError);
  io::write_text(dir / "neg.csv", "0.1,-0.2\n");
  CHECK_THROWS_AS(io::read_response_csv(dir / "neg.csv"), ValidationError);

  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(io::hash_file(dir / "x.npy") == io::hash_bytes(npy));
}

TEST_CASE("genscene and genmask") {
  TempDir dir("gen");
  cli::GenMaskOptions gm;
  gm.dims = {6, 7, 3};
  gm.density = 1.0;
  gm.output = dir / "ones.hsc";
  cli::cmd_genmask(gm);
  CHECK((io::read_cube(gm.output).cube.vec().array() == 1.0).all());
  gm.density = 0.0;
  CHECK_THROWS_AS(cli::cmd_genmask(gm), ValidationError);

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cli::GenSceneOptions gs;
    gs.dims = {32, 32, 4};
    gs.seed = seed;
    gs.output = dir / "scene.hsc";
    cli::cmd_genscene(gs);
    const io::CubeRecord rec = io::read_cube(gs.output);
    const double analytic = rec.metadata.at("analytic_tv").get<double>();
    CHECK(tv_value(rec.cube) == doctest::Approx(analytic).epsilon(1e-12));

    const std::string first = slurp(gs.output);
    cli::cmd_genscene(gs);
    CHECK(slurp(gs.output) == first);
  }
  for (auto kind : {SceneKind::GaussianBlobs, SceneKind::Ramp}) {
    cli::GenSceneOptions gs;
    gs.kind = kind;
    gs.dims = {8, 9, 3};
    gs.output = dir / "other.hsc";
    cli::cmd_genscene(gs);
    const CubeD c = io::read_cube(gs.output).cube;
    CHECK(c.dims() == Dims{8, 9, 3});
    CHECK(c.allFinite());
    CHECK(parse_scene_kind(to_string(kind)) == kind);
  }
  CHECK(cli::parse_dims("4,5,6") == Dims{4, 5, 6});
  CHECK_THROWS_AS(cli::parse_dims("4,5"), ValidationError);
  CHECK_THROWS_AS(cli::parse_dims("4,x,5"), ValidationError);
  CHECK_THROWS_AS(cli::parse_dims("4,0,5"), ValidationError);
}

TEST_CASE("config parsing and overrides") {
  const cli::RunConfig defaults = cli::config_from_json(json::object());
  CHECK(defaults.admm.rho == 0.03);
  CHECK(defaults.admm.inner_iters == 30);
  CHECK(defaults.mode == ReconstructionMode::Tvds);

  json j = cli::config_to_json(defaults);
  cli::apply_override(j, "admm.rho", "0.5");
  cli::apply_override(j, "fusion.inner_iters", "7");
  cli::apply_override(j, "mode", "tv_only");
  cli::apply_override(j, "output_dir", "123", true);
  const cli::RunConfig c = cli::config_from_json(j);
  CHECK(c.admm.rho == 0.5);
  CHECK(c.admm.inner_iters == 7);
  CHECK(c.mode == ReconstructionMode::TvOnly);
  CHECK(c.output_dir == "123");
  CHECK(cli::config_from_json(cli::config_to_json(c)).admm.rho == 0.5);

  CHECK_THROWS_AS(cli::config_from_json(json{{"rhoo", 1}}), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(json{{"admm", {{"rho", -1.0}}}}), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(json{{"admm", {{"rho", "fast"}}}}), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(json{{"mode", "pids"}}), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(json{{"bayer", "RGGB"}, {"rgb_channels", 1}}), ValidationError);

  TempDir dir("cfg");
  io::write_text(dir / "c.json", "{\"admm\": {\"num_stages\": 4}}");
  CHECK(cli::load_config(dir / "c.json").admm.num_stages == 4);
  io::write_text(dir / "broken.json", "{");
  CHECK_THROWS_AS(cli::load_config(dir / "broken.json"), ValidationError);
}

TEST_CASE("simulate") {
  TempDir dir("sim");
  cli::RunConfig c = make_inputs(dir, {12, 10, 4}, 5);
  c.shear_step = 2;
  const auto out = cli::cmd_simulate(c);
  CHECK(out.measurement_cols == 10 + 2 * 3);
  const io::CubeRecord y = io::read_cube(out.dir / cli::kMeasurementFile);
  CHECK(y.cube.dims() == Dims{12, 16, 1});
  CHECK(y.metadata.at("shear_step") == 2);
  CHECK(io::read_cube(out.dir / cli::kRgbFile).cube.dims() == Dims{12, 10, 3});
  // A single-band mask is broadcast across bands.
  CHECK(io::read_cube(out.dir / cli::kMaskFile).cube.dims() == Dims{12, 10, 4});
  const json manifest = json::parse(slurp(out.dir / cli::kManifestFile));
  CHECK(manifest.at("measurement_cols") == 16);
  CHECK(manifest.at("parameters").at("shear_step") == 2);

  // Noise-free runs are byte-identical.
  std::vector<std::string> first;
  for (const char* f : {cli::kMeasurementFile, cli::kRgbFile, cli::kTruthFile, cli::kManifestFile})
    first.push_back(slurp(out.dir / f));
  cli::cmd_simulate(c);
  int i = 0;
  for (const char* f : {cli::kMeasurementFile, cli::kRgbFile, cli::kTruthFile, cli::kManifestFile})
    CHECK(slurp(out.dir / f) == first[i++]);

  c.bayer = BayerPattern::RGGB;
  c.noise_sigma = 0.01;
  const auto noisy = cli::cmd_simulate(c);
  CHECK(fs::exists(noisy.dir / cli::kRgbRawFile));
  CHECK(slurp(noisy.dir / cli::kMeasurementFile) != first[0]);

  cli::GenMaskOptions gm;
  gm.dims = {12, 11, 1};
  gm.output = dir / "wrong_mask.hsc";
  cli::cmd_genmask(gm);
  c.mask = gm.output.string();
  CHECK_THROWS_AS(cli::cmd_simulate(c), DimensionError);
}

TEST_CASE("reconstruct and evaluate") {
  TempDir dir("rec");
  cli::RunConfig c = make_inputs(dir, {16, 16, 4}, 9);
  const auto sim = cli::cmd_simulate(c);
  const std::string manifest = slurp(sim.dir / cli::kManifestFile);

  c.input_dir = sim.dir.string();
  c.output_dir = (dir / "rec").string();
  const auto rec = cli::cmd_reconstruct(c);
  CHECK(rec.log_rows == 6);
  const std::string log = slurp(rec.dir / cli::kIterationLog);
  CHECK(std::count(log.begin(), log.end(), '\n') == 7);
  CHECK(log.rfind("stage,iteration,", 0) == 0);
  CHECK(slurp(rec.dir / cli::kManifestFile) == manifest);
  CHECK(fs::exists(rec.dir / "reconstruction_band_03.pgm"));
  CHECK(io::read_cube(rec.dir / cli::kReconFile).cube.dims() == Dims{16, 16, 4});

  const std::string recon_bytes = slurp(rec.dir / cli::kReconFile);
  cli::cmd_reconstruct(c);
  CHECK(slurp(rec.dir / cli::kReconFile) == recon_bytes);

  // tv_only never reads the RGB image; tvds cannot run without it.
  fs::remove(sim.dir / cli::kRgbFile);
  cli::RunConfig tv = c;
  tv.mode = ReconstructionMode::TvOnly;
  tv.output_dir = (dir / "tv").string();
  CHECK_NOTHROW(cli::cmd_reconstruct(tv));
  CHECK_THROWS_AS(cli::cmd_reconstruct(c), ValidationError);

  cli::EvaluateOptions ev;
  ev.truth = sim.dir / cli::kTruthFile;
  ev.recon = sim.dir / cli::kTruthFile;
  ev.output_dir = dir / "eval_self";
  const auto self = cli::cmd_evaluate(ev);
  CHECK(self.report.psnr_db == kPsnrCeilingDb);
  CHECK(self.report.ssim == doctest::Approx(1.0));
  CHECK(self.report.sam_degrees == doctest::Approx(0.0).epsilon(1e-6));
  const auto parsed = parse_metrics_table_csv(slurp(ev.output_dir / "metrics.csv"));
  CHECK(parsed.at(0).report.psnr_db == self.report.psnr_db);
  CHECK(parsed.at(0).report.ssim == self.report.ssim);

  ev.recon = rec.dir / cli::kReconFile;
  ev.output_dir = dir / "eval";
  const auto matched = cli::cmd_evaluate(ev);
  CHECK(matched.lineage_matched);
  CHECK(matched.report.psnr_db < kPsnrCeilingDb);

  // A reconstruction from an unrelated simulation is refused unless forced.
  TempDir other("rec_other");
  cli::RunConfig c2 = make_inputs(other, {16, 16, 4}, 10);
  const auto sim2 = cli::cmd_simulate(c2);
  ev.truth = sim2.dir / cli::kTruthFile;
  CHECK_THROWS_AS(cli::cmd_evaluate(ev), ValidationError);
  ev.force = true;
  const auto forced = cli::cmd_evaluate(ev);
  CHECK_FALSE(forced.lineage_matched);
  const json em = json::parse(slurp(ev.output_dir / "evaluate_manifest.json"));
  CHECK(em.at("forced") == true);
}
