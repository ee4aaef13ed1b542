#include <cstdio>
#include <cstdlib>

#include "support.hpp"

using namespace gmmcalib;
using namespace gmmcalib::testing;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GMMCALIB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Small scene JSON plus a quick run config; returns {scene, config}.
std::pair<fs::path, fs::path> write_inputs(const fs::path& dir) {
  write_json_file(dir / "scene.json", scene_to_json(default_scene()));
  RunConfig c;
  c.seed = 3;
  c.gmm.components = 40;
  c.gmm.max_iterations = 40;
  write_json_file(dir / "config.json", run_config_to_json(c));
  return {dir / "scene.json", dir / "config.json"};
}

}  // namespace

TEST(Cli, SimulateIsDeterministic) {
  const auto dir = temp_dir("cli_sim");
  const auto [scene, config] = write_inputs(dir);
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run_cli("simulate " + scene.string() + " --errors 2 --frames 2 --seed 11 --out " + (dir / out).string()), 0);
  }
  for (const char* f : {"sample_000/L1_000.ply", "sample_001/L2_001.ply", "sample_001/ground_truth.json",
                        "sample_000/observations.json", "simulation.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
  }
  const auto truth = ground_truth_from_json(read_json_file(dir / "a/sample_000/ground_truth.json"));
  EXPECT_GT(truth.transform.translation.norm(), 0.0);
}

TEST(Cli, InputErrorsExitWithOne) {
  const auto dir = temp_dir("cli_errors");
  const auto [scene, config] = write_inputs(dir);
  EXPECT_EQ(run_cli("simulate " + (dir / "nope.json").string() + " --seed 1 --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run_cli("simulate " + scene.string() + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  std::ofstream(dir / "bad_config.json") << R"({"schema_version": 1, "seed": 1, "gmm": {"colour": 1}})";
  ASSERT_EQ(run_cli("simulate " + scene.string() + " --frames 2 --seed 1 --out " + (dir / "obs").string()), 0);
  EXPECT_EQ(run_cli("calibrate --input " + (dir / "obs").string() + " --config " + (dir / "bad_config.json").string() +
                    " --out " + (dir / "r").string()),
            1);
  EXPECT_EQ(run_cli("calibrate --input " + (dir / "obs").string() + " --algorithm newton --config " + config.string() +
                    " --out " + (dir / "r").string()),
            1);
}

TEST(Cli, PipelineWritesReportsAndMetrics) {
  const auto dir = temp_dir("cli_pipeline");
  const auto [scene, config] = write_inputs(dir);
  const std::string obs = (dir / "obs").string();
  ASSERT_EQ(run_cli("simulate " + scene.string() + " --errors 2 --frames 2 --seed 5 --out " + obs), 0);
  ASSERT_EQ(run_cli("calibrate --input " + obs + " --algorithm all --config " + config.string() + " --out " +
                    (dir / "reports").string()),
            0);
  for (const char* name : {"gmm", "point_icp", "plane_icp", "gicp"}) {
    EXPECT_TRUE(fs::exists(dir / "reports/sample_001" / (std::string(name) + ".json"))) << name;
  }
  ASSERT_EQ(run_cli("evaluate --reports " + (dir / "reports").string() + " --ground-truth " + obs + " --out " +
                    (dir / "metrics").string()),
            0);
  const std::string summary = read_text(dir / "metrics/summary.csv");
  for (const char* name : {"gmm", "point_icp", "plane_icp", "gicp"}) {
    EXPECT_NE(summary.find(name), std::string::npos) << summary;
    EXPECT_TRUE(fs::exists(dir / "metrics" / (std::string(name) + "_range_profile.csv")));
  }

  // Reports whose pair count disagrees with the observations are rejected.
  auto report = read_json_file(dir / "reports/sample_000/gicp.json");
  report["pairs"].erase(report["pairs"].size() - 1);
  report["pair_count"] = report["pairs"].size();
  write_json_file(dir / "reports/sample_000/gicp.json", report);
  EXPECT_EQ(run_cli("evaluate --reports " + (dir / "reports").string() + " --ground-truth " + obs + " --out " +
                    (dir / "metrics2").string()),
            1);

  // check: the reconstruction against the cubes passes or fails the plausibility threshold, never errors.
  write_cloud(sample_cube_surfaces(default_scene().cubes, 0.05), dir / "prior.ply");
  const int code = run_cli("check --model " + (dir / "reports/sample_000/gmm.json").string() + " --prior " +
                           (dir / "prior.ply").string());
  EXPECT_TRUE(code == 0 || code == 3) << code;
  EXPECT_EQ(run_cli("check --model " + (dir / "reports/sample_000/gmm.json").string() + " --prior " +
                    (dir / "prior.ply").string() + " --threshold 0"),
            3);
}
