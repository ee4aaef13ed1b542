// gmmcalib: simulate, calibrate, evaluate and check multi-LiDAR calibrations.
//
// Exit codes: 0 ok, 1 input/config error, 2 registration failure,
// 3 plausibility failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gmmcalib/gmmcalib.hpp"

namespace fs = std::filesystem;
using namespace gmmcalib;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitRegistration = 2;
constexpr int kExitPlausibility = 3;

bool is_registration_failure(ErrorKind k) {
  switch (k) {
    case ErrorKind::NumericUnderflow:
    case ErrorKind::DegenerateAlignment:
    case ErrorKind::NoCorrespondences:
    case ErrorKind::DegenerateGeometry:
    case ErrorKind::IllConditioned:
    case ErrorKind::DegenerateMean:
      return true;
    default:
      return false;
  }
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%03zu", i);
  return buf;
}

std::string frame_file(const std::string& sensor, std::size_t f) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03zu.ply", sensor.c_str(), f);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create directory '" + dir.string() + "': " + ec.message());
}

/// Sample directories below root (sorted), or root itself when it holds the
/// marker file directly.
std::vector<fs::path> sample_dirs(const fs::path& root, const std::string& marker) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::IoError, "'" + root.string() + "' is not a directory");
  if (fs::exists(root / marker)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / marker)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorKind::IoError, "no '" + marker + "' found under '" + root.string() + "'");
  return out;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string scene;
  std::size_t errors = 1;
  std::size_t frames = 20;
  std::uint64_t seed = 0;
  std::string out;
  double max_angle_deg = 3.0;
  double max_translation = 0.1;
};

int cmd_simulate(const SimulateArgs& a) {
  const SceneSpec scene = read_scene(a.scene);
  if (a.errors < 1) throw Error(ErrorKind::ConfigError, "--errors must be at least 1");
  ErrorBounds bounds;
  bounds.angle = a.max_angle_deg * std::numbers::pi / 180.0;
  bounds.translation = a.max_translation;
  const auto samples = sample_calibration_errors(a.errors, bounds, a.seed);
  const fs::path out(a.out);
  ensure_dir(out);

  Json run;
  run["schema_version"] = kSchemaVersion;
  run["seed"] = a.seed;
  run["errors"] = a.errors;
  run["frames"] = a.frames;
  run["bounds"] = {{"angle", bounds.angle}, {"translation", bounds.translation}};
  run["scene"] = scene_to_json(scene);
  write_json_file(out / "simulation.json", run);

  for (std::size_t e = 0; e < samples.size(); ++e) {
    const fs::path dir = out / sample_name(e);
    ensure_dir(dir);
    const auto syn = make_observation_set(scene, samples[e], a.frames, samples[e].seed);
    const auto& obs = syn.observations;
    ObservationManifest manifest;
    manifest.sensors = obs.sensors();
    for (std::size_t j = 0; j < obs.pair_count(); ++j) {
      const std::string fa = frame_file(obs.sensors()[0], j);
      const std::string fb = frame_file(obs.sensors()[1], j);
      write_cloud(obs.first(j), dir / fa);
      write_cloud(obs.second(j), dir / fb);
      manifest.pairs.emplace_back(fa, fb);
    }
    // Uncropped second-sensor scan in the same (perturbed) frame as its observations.
    const SensorSpec& second = scene.sensors[1];
    PointCloud full = transformed(raycast_scan(scene, 1, detail::derive_seed(samples[e].seed, a.frames, 1)),
                                  compose(syn.ground_truth, second.pose_in_vehicle), "vehicle");
    full.sensor_id = second.name;
    manifest.full_scene = "full_" + second.name + ".ply";
    write_cloud(full, dir / *manifest.full_scene);
    write_json_file(dir / kManifestName, manifest_to_json(manifest));
    write_json_file(dir / "ground_truth.json", ground_truth_to_json({syn.ground_truth, samples[e].error, samples[e].seed}));
  }
  std::cout << "simulated " << samples.size() << " error sample(s) into " << out.string() << "\n";
  return kExitOk;
}

// ---- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string input;
  std::string algorithm = "all";
  std::string config;
  std::string out;
};

std::vector<Algorithm> selected_algorithms(const std::string& name) {
  if (name == "all") return {Algorithm::Gmm, Algorithm::PointIcp, Algorithm::PlaneIcp, Algorithm::Gicp};
  return {algorithm_from_string(name)};
}

int cmd_calibrate(const CalibrateArgs& a) {
  const RunConfig config = read_run_config(a.config);
  const auto algorithms = selected_algorithms(a.algorithm);
  std::optional<PointCloud> prior;
  if (config.prior_path) {
    fs::path p(*config.prior_path);
    if (p.is_relative()) p = fs::path(a.config).parent_path() / p;
    prior = read_cloud(p);
  }
  const fs::path input(a.input);
  const auto dirs = sample_dirs(input, kManifestName);
  const bool nested = !(dirs.size() == 1 && dirs.front() == input);
  const Json echo = run_config_to_json(config);

  int status = kExitOk;
  for (const auto& dir : dirs) {
    const ObservationSet pairs = load_observations(dir, config.crop_box);
    const fs::path out = nested ? fs::path(a.out) / dir.filename() : fs::path(a.out);
    ensure_dir(out);
    for (Algorithm alg : algorithms) {
      CalibrationReport report;
      try {
        if (alg == Algorithm::Gmm) {
          report = calibrate_gmm(pairs, config.gmm);
          if (prior) report.plausibility = plausibility_check(*report.reconstruction, *prior);
        } else {
          report = recover_calibration_icp(icp_variant_of(alg), pairs, config.icp);
        }
      } catch (const Error& e) {
        if (!is_registration_failure(e.kind())) throw;
        std::cerr << dir.string() << ": " << to_string(alg) << " failed: " << e.what() << "\n";
        status = kExitRegistration;
        continue;
      }
      if (!report.failures.empty()) {
        std::cerr << dir.string() << ": " << to_string(alg) << ": " << report.failures.size() << " of "
                  << pairs.pair_count() << " pairs failed to register\n";
      }
      write_json_file(out / (std::string(to_string(alg)) + ".json"), report_to_json(report, pairs, echo));
      const EulerPose m = transform_to_euler(report.mean_transform);
      std::cout << dir.filename().string() << " " << to_string(alg) << " mean roll=" << m.roll << " pitch=" << m.pitch
                << " yaw=" << m.yaw << " x=" << m.x << " y=" << m.y << " z=" << m.z;
      if (report.plausibility) std::cout << " plausibility=" << *report.plausibility;
      std::cout << "\n";
    }
  }
  return status;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string reports;
  std::string ground_truth;
  std::string out;
  double threshold = kMiscalibrationThreshold;
  bool raw_profile = false;
};

std::optional<AxisAlignedBox> echoed_crop(const nlohmann::json& report, const fs::path& path) {
  if (!report.contains("config") || !report["config"].contains("crop_box")) return std::nullopt;
  return run_config_from_json(report["config"], path.string() + ".config").crop_box;
}

int cmd_evaluate(const EvaluateArgs& a) {
  if (!(a.threshold > 0.0)) throw Error(ErrorKind::ConfigError, "--threshold must be positive");
  const fs::path truth_root(a.ground_truth);
  const fs::path report_root(a.reports);
  const auto truth_dirs = sample_dirs(truth_root, "ground_truth.json");
  const bool nested = !(truth_dirs.size() == 1 && truth_dirs.front() == truth_root);

  std::map<std::string, MetricsTable> tables;
  std::map<std::string, RangeProfile> profiles;
  std::set<std::string> expected;
  for (std::size_t s = 0; s < truth_dirs.size(); ++s) {
    const fs::path tdir = truth_dirs[s];
    const fs::path rdir = nested ? report_root / tdir.filename() : report_root;
    if (!fs::is_directory(rdir)) throw Error(ErrorKind::IoError, "no reports for '" + tdir.string() + "' at '" + rdir.string() + "'");
    const auto truth = ground_truth_from_json(read_json_file(tdir / "ground_truth.json"),
                                              (tdir / "ground_truth.json").string());
    const auto manifest = manifest_from_json(read_json_file(tdir / kManifestName), (tdir / kManifestName).string());

    std::set<std::string> found;
    for (const auto& e : fs::directory_iterator(rdir)) {
      if (e.path().extension() != ".json") continue;
      const std::string stem = e.path().stem().string();
      if (stem == "gmm" || stem == "point_icp" || stem == "plane_icp" || stem == "gicp") found.insert(stem);
    }
    if (found.empty()) throw Error(ErrorKind::IoError, "no calibration reports in '" + rdir.string() + "'");
    if (s == 0) expected = found;
    if (found != expected) {
      throw Error(ErrorKind::IoError, "'" + rdir.string() + "' holds a different algorithm set than the first sample");
    }

    std::optional<PointCloud> full;
    if (manifest.full_scene) full = read_cloud(tdir / *manifest.full_scene);
    for (const auto& name : found) {
      const fs::path rpath = rdir / (name + ".json");
      const auto raw = read_json_file(rpath);
      const CalibrationReport report = report_from_json(raw, rpath.string());
      const ObservationSet pairs = load_observations(tdir, echoed_crop(raw, rpath));
      MetricsTable& table = tables[name];
      table.threshold = a.threshold;
      try {
        append_report(table, report, pairs, truth.transform);
      } catch (const Error& e) {
        throw Error(ErrorKind::MisalignedBookkeeping, rpath.string() + ": " + e.what());
      }
      if (full) {
        const auto p = global_range_profile(*full, truth.transform, report.mean_transform);
        auto& pooled = profiles[name].points;
        pooled.insert(pooled.end(), p.points.begin(), p.points.end());
      }
    }
  }

  const fs::path out(a.out);
  ensure_dir(out);
  std::vector<MetricsTable> ordered;
  for (auto& [name, table] : tables) {
    if (profiles.count(name)) {
      RangeProfile& profile = profiles[name];
      fit_range_profile(profile);
      table.global_fit = profile.fit;
      std::string csv = "x,error\n";
      for (const auto& b : profile.bins) csv += format_number(b.x) + "," + format_number(b.error) + "\n";
      write_text_atomically(out / (name + "_range_profile.csv"), csv);
      if (a.raw_profile) {
        std::string raw = "x,error\n";
        for (const auto& p : profile.points) raw += format_number(p.x) + "," + format_number(p.error) + "\n";
        write_text_atomically(out / (name + "_range_points.csv"), raw);
      }
    }
    export_metrics(table, out / (name + "_metrics.csv"), MetricsFormat::Csv);
    export_metrics(table, out / (name + "_metrics.json"), MetricsFormat::Json);
    ordered.push_back(table);
  }
  std::sort(ordered.begin(), ordered.end(), [](const MetricsTable& x, const MetricsTable& y) {
    return algorithm_from_string(x.algorithm) < algorithm_from_string(y.algorithm);
  });
  const std::string summary = summary_csv(ordered);
  write_text_atomically(out / "summary.csv", summary);
  Json sj;
  sj["schema_version"] = kSchemaVersion;
  sj["samples"] = truth_dirs.size();
  Json rows = Json::array();
  for (const auto& t : ordered) {
    Json r = metrics_to_json(t);
    r.erase("pair_index");
    r.erase("per_pair_delta");
    r.erase("distance_errors");
    rows.push_back(r);
  }
  sj["algorithms"] = rows;
  write_json_file(out / "summary.json", sj);
  std::cout << summary;
  return kExitOk;
}

// ---- check -------------------------------------------------------------------

struct CheckArgs {
  std::string model;
  std::string prior;
  double threshold = kPlausibilityThreshold;
};

int cmd_check(const CheckArgs& a) {
  if (!(a.threshold >= 0.0)) throw Error(ErrorKind::ConfigError, "--threshold must be non-negative");
  const auto j = read_json_file(a.model);
  GmmModel model;
  if (j.contains("reconstruction")) {
    if (j["reconstruction"].is_null()) throw Error(ErrorKind::ConfigError, a.model + ": report has no reconstruction");
    model = model_from_json(j["reconstruction"], a.model + ".reconstruction");
  } else {
    model = model_from_json(j, a.model);
  }
  const PointCloud prior = read_cloud(a.prior);
  double score = 0.0;
  try {
    score = plausibility_check(model, prior);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyModel) throw;
    std::cout << "plausibility FAIL: " << e.what() << "\n";
    return kExitPlausibility;
  }
  const bool ok = score <= a.threshold;
  std::cout << "plausibility " << format_number(score) << " m (threshold " << format_number(a.threshold) << ") "
            << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitPlausibility;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-LiDAR extrinsic calibration by joint GMM registration, with ICP baselines"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate synthetic observation sets with injected calibration errors");
  s->add_option("scene", sim.scene, "Scene JSON file")->required();
  s->add_option("--errors", sim.errors, "Number of sampled calibration errors")->capture_default_str();
  s->add_option("--frames", sim.frames, "Frames per sensor")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->required();
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--max-angle", sim.max_angle_deg, "Error bound per Euler angle, degrees")->capture_default_str();
  s->add_option("--max-translation", sim.max_translation, "Error bound per axis, meters")->capture_default_str();

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Recover the calibration of every observation set");
  c->add_option("--input", cal.input, "Observation directory (or a directory of sample_* directories)")->required();
  c->add_option("--algorithm", cal.algorithm, "gmm, point, plane, gicp or all")->capture_default_str();
  c->add_option("--config", cal.config, "Run config JSON")->required();
  c->add_option("--out", cal.out, "Report directory")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compare reports with ground truth");
  e->add_option("--reports", ev.reports, "Report directory from calibrate")->required();
  e->add_option("--ground-truth", ev.ground_truth, "Directory from simulate")->required();
  e->add_option("--out", ev.out, "Metrics directory")->required();
  e->add_option("--threshold", ev.threshold, "Miscalibration threshold, meters")->capture_default_str();
  e->add_flag("--raw-profile", ev.raw_profile, "Also export every range-profile point");

  CheckArgs ch;
  auto* k = app.add_subcommand("check", "Score a reconstructed model against a geometric prior");
  k->add_option("--model", ch.model, "Model JSON or GMM report JSON")->required();
  k->add_option("--prior", ch.prior, "Prior point cloud (PLY, PCD or CSV)")->required();
  k->add_option("--threshold", ch.threshold, "Pass threshold, meters")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (c->parsed()) return cmd_calibrate(cal);
    if (e->parsed()) return cmd_evaluate(ev);
    if (k->parsed()) return cmd_check(ch);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return is_registration_failure(err.kind()) ? kExitRegistration : kExitInput;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
