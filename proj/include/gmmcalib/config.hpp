#pragma once

// JSON documents: scene files, run configs, calibration reports, mixture
// models, ground truths and observation manifests. Every document carries
// schema_version and unknown keys are rejected.

#include <array>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmmcalib/calibration.hpp"
#include "gmmcalib/cloud_io.hpp"
#include "gmmcalib/scene.hpp"

namespace gmmcalib {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& context) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, context + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::ConfigError, context + ": unknown key '" + key + "'");
  }
}

inline void check_schema(const nlohmann::json& j, const std::string& context) {
  if (!j.contains("schema_version")) throw Error(ErrorKind::ConfigError, context + ": missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
    throw Error(ErrorKind::ConfigError,
                context + ": unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::ConfigError, context + ": key '" + key + "' has the wrong type");
  }
}

template <class T>
T require(const nlohmann::json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw Error(ErrorKind::ConfigError, context + ": missing required key '" + key + "'");
  return get_or<T>(j, key, T{}, context);
}

inline Vec3 vec3_from(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ConfigError, context + ": expected [x, y, z]");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ConfigError, context + ": expected numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json euler_json(const EulerPose& p) {
  return {{"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}, {"x", p.x}, {"y", p.y}, {"z", p.z}};
}

inline EulerPose euler_from(const nlohmann::json& j, const std::string& context) {
  check_keys(j, {"roll", "pitch", "yaw", "x", "y", "z"}, context);
  EulerPose p;
  p.roll = get_or(j, "roll", 0.0, context);
  p.pitch = get_or(j, "pitch", 0.0, context);
  p.yaw = get_or(j, "yaw", 0.0, context);
  p.x = get_or(j, "x", 0.0, context);
  p.y = get_or(j, "y", 0.0, context);
  p.z = get_or(j, "z", 0.0, context);
  return p;
}

inline Json matrix_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2), m(r, 3)}));
  return rows;
}

inline RigidTransform matrix_from(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::ConfigError, context + ": expected a 4x4 matrix");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw Error(ErrorKind::ConfigError, context + ": expected a 4x4 matrix");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return RigidTransform::from_matrix(m);
}

inline Json cube_json(const Cube& c) { return {{"center", vec3_json(c.center)}, {"edge", c.edge}, {"yaw", c.yaw}}; }

inline Cube cube_from(const nlohmann::json& j, const std::string& context) {
  check_keys(j, {"center", "edge", "yaw"}, context);
  Cube c;
  if (!j.contains("center")) throw Error(ErrorKind::ConfigError, context + ": missing center");
  c.center = vec3_from(j["center"], context + ".center");
  c.edge = get_or(j, "edge", c.edge, context);
  c.yaw = get_or(j, "yaw", c.yaw, context);
  return c;
}

inline Json box_json(const AxisAlignedBox& b) { return {{"min", vec3_json(b.min)}, {"max", vec3_json(b.max)}}; }

inline AxisAlignedBox box_from(const nlohmann::json& j, const std::string& context) {
  check_keys(j, {"min", "max"}, context);
  if (!j.contains("min") || !j.contains("max")) throw Error(ErrorKind::ConfigError, context + ": needs min and max");
  AxisAlignedBox b{vec3_from(j["min"], context + ".min"), vec3_from(j["max"], context + ".max")};
  if (!(b.min.array() < b.max.array()).all()) throw Error(ErrorKind::ConfigError, context + ": min must be below max");
  return b;
}

}  // namespace detail

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_atomically(path, j.dump(2) + "\n");
}

// ---- scene -----------------------------------------------------------------

inline Json scene_to_json(const SceneSpec& scene) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  Json cubes = Json::array();
  for (const auto& c : scene.cubes) cubes.push_back(detail::cube_json(c));
  j["cubes"] = cubes;
  j["ground"] = {{"enabled", scene.ground.enabled}, {"extent", scene.ground.extent}};
  Json sensors = Json::array();
  for (const auto& s : scene.sensors) {
    sensors.push_back({{"name", s.name},
                       {"pose", detail::euler_json(transform_to_euler(s.pose_in_vehicle))},
                       {"h_fov", s.h_fov},
                       {"v_fov", s.v_fov},
                       {"channels", s.channels},
                       {"range", s.range},
                       {"azimuth_step", s.azimuth_step},
                       {"noise_sigma", s.noise_sigma},
                       {"min_range", s.min_range},
                       {"random_azimuth_phase", s.random_azimuth_phase}});
  }
  j["sensors"] = sensors;
  j["target_region"] = detail::box_json(scene.target_region);
  if (scene.validation_cube) j["validation_cube"] = detail::cube_json(*scene.validation_cube);
  return j;
}

inline SceneSpec scene_from_json(const nlohmann::json& j, const std::string& context = "scene") {
  detail::check_keys(j, {"schema_version", "cubes", "ground", "sensors", "target_region", "validation_cube"}, context);
  detail::check_schema(j, context);
  SceneSpec scene;
  try {
    if (j.contains("cubes")) {
      for (std::size_t i = 0; i < j["cubes"].size(); ++i) {
        scene.cubes.push_back(detail::cube_from(j["cubes"][i], context + ".cubes[" + std::to_string(i) + "]"));
      }
    }
    if (j.contains("ground")) {
      const auto& g = j["ground"];
      detail::check_keys(g, {"enabled", "extent"}, context + ".ground");
      scene.ground.enabled = detail::get_or(g, "enabled", scene.ground.enabled, context + ".ground");
      scene.ground.extent = detail::get_or(g, "extent", scene.ground.extent, context + ".ground");
    }
    if (!j.contains("sensors")) throw Error(ErrorKind::ConfigError, context + ": missing sensors");
    for (std::size_t i = 0; i < j["sensors"].size(); ++i) {
      const auto& s = j["sensors"][i];
      const std::string ctx = context + ".sensors[" + std::to_string(i) + "]";
      detail::check_keys(s, {"name", "pose", "h_fov", "v_fov", "channels", "range", "azimuth_step", "noise_sigma",
                             "min_range", "random_azimuth_phase"},
                         ctx);
      SensorSpec spec;
      spec.name = detail::require<std::string>(s, "name", ctx);
      if (!s.contains("pose")) throw Error(ErrorKind::ConfigError, ctx + ": missing pose");
      spec.pose_in_vehicle = euler_to_transform(detail::euler_from(s["pose"], ctx + ".pose"));
      spec.h_fov = detail::get_or(s, "h_fov", spec.h_fov, ctx);
      spec.v_fov = detail::get_or(s, "v_fov", spec.v_fov, ctx);
      spec.channels = detail::get_or(s, "channels", spec.channels, ctx);
      spec.range = detail::get_or(s, "range", spec.range, ctx);
      spec.azimuth_step = detail::get_or(s, "azimuth_step", spec.azimuth_step, ctx);
      spec.noise_sigma = detail::get_or(s, "noise_sigma", spec.noise_sigma, ctx);
      spec.min_range = detail::get_or(s, "min_range", spec.min_range, ctx);
      spec.random_azimuth_phase = detail::get_or(s, "random_azimuth_phase", spec.random_azimuth_phase, ctx);
      scene.sensors.push_back(spec);
    }
    if (!j.contains("target_region")) throw Error(ErrorKind::ConfigError, context + ": missing target_region");
    scene.target_region = detail::box_from(j["target_region"], context + ".target_region");
    if (j.contains("validation_cube")) {
      scene.validation_cube = detail::cube_from(j["validation_cube"], context + ".validation_cube");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  try {
    scene.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  return scene;
}

inline SceneSpec read_scene(const std::filesystem::path& path) {
  return scene_from_json(read_json_file(path), path.string());
}

// ---- run config --------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 0;
  GmmConfig gmm;
  IcpConfig icp;
  std::optional<AxisAlignedBox> crop_box;
  std::optional<std::string> prior_path;
  double plausibility_threshold = kPlausibilityThreshold;
  double miscalibration_threshold = 0.1;
};

inline Json run_config_to_json(const RunConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = c.seed;
  j["gmm"] = {{"components", c.gmm.components},         {"outlier_weight", c.gmm.outlier_weight},
              {"tol", c.gmm.tol},                       {"max_iterations", c.gmm.max_iterations},
              {"cube_edge_init", c.gmm.cube_edge_init}, {"variance_floor", c.gmm.variance_floor}};
  j["icp"] = {{"max_correspondence_distance", c.icp.max_correspondence_distance},
              {"max_iterations", c.icp.max_iterations},
              {"transform_tolerance", c.icp.transform_tolerance},
              {"normal_k", c.icp.normal_k},
              {"covariance_k", c.icp.covariance_k},
              {"gicp_epsilon", c.icp.gicp_epsilon}};
  if (c.crop_box) j["crop_box"] = detail::box_json(*c.crop_box);
  if (c.prior_path) j["prior"] = *c.prior_path;
  j["plausibility_threshold"] = c.plausibility_threshold;
  j["miscalibration_threshold"] = c.miscalibration_threshold;
  return j;
}

/// The seed is mandatory; algorithm blocks and thresholds default.
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& context = "config") {
  detail::check_keys(j, {"schema_version", "seed", "gmm", "icp", "crop_box", "prior", "plausibility_threshold",
                         "miscalibration_threshold"},
                     context);
  detail::check_schema(j, context);
  RunConfig c;
  c.seed = detail::require<std::uint64_t>(j, "seed", context);
  if (j.contains("gmm")) {
    const auto& g = j["gmm"];
    const std::string ctx = context + ".gmm";
    detail::check_keys(g, {"components", "outlier_weight", "tol", "max_iterations", "cube_edge_init", "variance_floor"},
                       ctx);
    c.gmm.components = detail::get_or(g, "components", c.gmm.components, ctx);
    c.gmm.outlier_weight = detail::get_or(g, "outlier_weight", c.gmm.outlier_weight, ctx);
    c.gmm.tol = detail::get_or(g, "tol", c.gmm.tol, ctx);
    c.gmm.max_iterations = detail::get_or(g, "max_iterations", c.gmm.max_iterations, ctx);
    c.gmm.cube_edge_init = detail::get_or(g, "cube_edge_init", c.gmm.cube_edge_init, ctx);
    c.gmm.variance_floor = detail::get_or(g, "variance_floor", c.gmm.variance_floor, ctx);
  }
  c.gmm.seed = c.seed;
  if (j.contains("icp")) {
    const auto& i = j["icp"];
    const std::string ctx = context + ".icp";
    detail::check_keys(i, {"max_correspondence_distance", "max_iterations", "transform_tolerance", "normal_k",
                           "covariance_k", "gicp_epsilon"},
                       ctx);
    c.icp.max_correspondence_distance =
        detail::get_or(i, "max_correspondence_distance", c.icp.max_correspondence_distance, ctx);
    c.icp.max_iterations = detail::get_or(i, "max_iterations", c.icp.max_iterations, ctx);
    c.icp.transform_tolerance = detail::get_or(i, "transform_tolerance", c.icp.transform_tolerance, ctx);
    c.icp.normal_k = detail::get_or(i, "normal_k", c.icp.normal_k, ctx);
    c.icp.covariance_k = detail::get_or(i, "covariance_k", c.icp.covariance_k, ctx);
    c.icp.gicp_epsilon = detail::get_or(i, "gicp_epsilon", c.icp.gicp_epsilon, ctx);
  }
  if (j.contains("crop_box")) c.crop_box = detail::box_from(j["crop_box"], context + ".crop_box");
  if (j.contains("prior")) c.prior_path = detail::require<std::string>(j, "prior", context);
  c.plausibility_threshold = detail::get_or(j, "plausibility_threshold", c.plausibility_threshold, context);
  c.miscalibration_threshold = detail::get_or(j, "miscalibration_threshold", c.miscalibration_threshold, context);
  try {
    c.icp.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  if (!(c.gmm.outlier_weight >= 0.0 && c.gmm.outlier_weight < 1.0) || !(c.gmm.tol >= 0.0) ||
      !(c.gmm.variance_floor > 0.0) || !(c.gmm.cube_edge_init > 0.0)) {
    throw Error(ErrorKind::ConfigError, context + ".gmm: parameter out of range");
  }
  if (!(c.miscalibration_threshold > 0.0) || !(c.plausibility_threshold >= 0.0)) {
    throw Error(ErrorKind::ConfigError, context + ": thresholds must be positive");
  }
  return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path), path.string());
}

// ---- mixture model -------------------------------------------------------------

inline Json model_to_json(const GmmModel& m) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["outlier_weight"] = m.outlier_weight;
  j["outlier_density"] = m.outlier_density;
  Json comps = Json::array();
  for (std::size_t k = 0; k < m.size(); ++k) {
    comps.push_back({{"mean", detail::vec3_json(m.means[k])}, {"variance", m.variances[k]}, {"weight", m.weights[k]}});
  }
  j["components"] = comps;
  return j;
}

inline GmmModel model_from_json(const nlohmann::json& j, const std::string& context = "model") {
  detail::check_keys(j, {"schema_version", "outlier_weight", "outlier_density", "components"}, context);
  detail::check_schema(j, context);
  GmmModel m;
  try {
    m.outlier_weight = detail::require<double>(j, "outlier_weight", context);
    m.outlier_density = detail::require<double>(j, "outlier_density", context);
    for (const auto& c : j.at("components")) {
      detail::check_keys(c, {"mean", "variance", "weight"}, context + ".components");
      m.means.push_back(detail::vec3_from(c.at("mean"), context + ".components.mean"));
      m.variances.push_back(c.at("variance").get<double>());
      m.weights.push_back(c.at("weight").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  return m;
}

// ---- ground truth --------------------------------------------------------------

struct GroundTruthRecord {
  RigidTransform transform;
  EulerPose injected_error;
  std::uint64_t seed = 0;
};

inline Json ground_truth_to_json(const GroundTruthRecord& g) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = g.seed;
  j["injected_error"] = detail::euler_json(g.injected_error);
  j["transform"] = detail::matrix_json(g.transform);
  return j;
}

inline GroundTruthRecord ground_truth_from_json(const nlohmann::json& j, const std::string& context = "ground truth") {
  detail::check_keys(j, {"schema_version", "seed", "injected_error", "transform"}, context);
  detail::check_schema(j, context);
  GroundTruthRecord g;
  g.seed = detail::require<std::uint64_t>(j, "seed", context);
  if (!j.contains("injected_error") || !j.contains("transform")) {
    throw Error(ErrorKind::ConfigError, context + ": needs injected_error and transform");
  }
  g.injected_error = detail::euler_from(j["injected_error"], context + ".injected_error");
  g.transform = detail::matrix_from(j["transform"], context + ".transform");
  return g;
}

// ---- observation manifest -------------------------------------------------------

/// Files of one observation set, listed pair by pair (first sensor, second
/// sensor), relative to the manifest's directory.
struct ObservationManifest {
  std::array<std::string, 2> sensors;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::optional<std::string> full_scene;  // uncropped second-sensor scan for range profiles
};

inline Json manifest_to_json(const ObservationManifest& m) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["sensors"] = Json::array({m.sensors[0], m.sensors[1]});
  Json pairs = Json::array();
  for (const auto& [a, b] : m.pairs) pairs.push_back(Json::array({a, b}));
  j["pairs"] = pairs;
  if (m.full_scene) j["full_scene"] = *m.full_scene;
  return j;
}

inline ObservationManifest manifest_from_json(const nlohmann::json& j, const std::string& context = "manifest") {
  detail::check_keys(j, {"schema_version", "sensors", "pairs", "full_scene"}, context);
  detail::check_schema(j, context);
  ObservationManifest m;
  try {
    const auto sensors = j.at("sensors").get<std::vector<std::string>>();
    if (sensors.size() != 2) throw Error(ErrorKind::ConfigError, context + ": exactly two sensors are required");
    m.sensors = {sensors[0], sensors[1]};
    for (const auto& p : j.at("pairs")) {
      const auto files = p.get<std::vector<std::string>>();
      if (files.size() != 2) throw Error(ErrorKind::ConfigError, context + ": each pair lists two files");
      m.pairs.emplace_back(files[0], files[1]);
    }
    if (j.contains("full_scene")) m.full_scene = j["full_scene"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  return m;
}

inline constexpr const char* kManifestName = "observations.json";

/// Loads the clouds listed in dir/observations.json. Sensor ids default to
/// the manifest's names when a file carries none. An optional crop box is
/// applied to every cloud.
inline ObservationSet load_observations(const std::filesystem::path& dir,
                                        const std::optional<AxisAlignedBox>& crop = std::nullopt) {
  const auto manifest = manifest_from_json(read_json_file(dir / kManifestName), (dir / kManifestName).string());
  if (manifest.pairs.empty()) throw Error(ErrorKind::EmptyInput, (dir / kManifestName).string() + ": no pairs");
  std::vector<PointCloud> first, second;
  for (const auto& [a, b] : manifest.pairs) {
    for (int s = 0; s < 2; ++s) {
      PointCloud c = read_cloud(dir / (s == 0 ? a : b));
      if (c.sensor_id.empty()) c.sensor_id = manifest.sensors[s];
      if (c.sensor_id != manifest.sensors[s]) {
        throw Error(ErrorKind::MisalignedBookkeeping, (dir / (s == 0 ? a : b)).string() + ": sensor '" + c.sensor_id +
                                                          "' listed under '" + manifest.sensors[s] + "'");
      }
      if (crop) c = crop_box(c, crop->min, crop->max);
      (s == 0 ? first : second).push_back(std::move(c));
    }
  }
  return ObservationSet(std::move(first), std::move(second));
}

// ---- calibration report -----------------------------------------------------------

inline Json report_to_json(const CalibrationReport& r, const ObservationSet& pairs, const Json& config_echo) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["algorithm"] = std::string(to_string(r.algorithm));
  j["config"] = config_echo;
  j["sensors"] = Json::array({pairs.sensors()[0], pairs.sensors()[1]});
  j["pair_count"] = r.per_pair_transforms.size();
  j["mean_transform"] = detail::matrix_json(r.mean_transform);
  j["mean_euler"] = detail::euler_json(transform_to_euler(r.mean_transform));
  Json per_pair = Json::array();
  for (std::size_t k = 0; k < r.per_pair_transforms.size(); ++k) {
    per_pair.push_back({{"pair_index", k},
                        {"failed", r.pair_failed(k)},
                        {"transform", detail::matrix_json(r.per_pair_transforms[k])},
                        {"euler", detail::euler_json(r.per_pair_euler[k])}});
  }
  j["pairs"] = per_pair;
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"pair_index", f.pair_index}, {"kind", std::string(to_string(f.kind))}, {"message", f.message}});
  }
  j["failures"] = failures;
  j["plausibility"] = r.plausibility ? Json(*r.plausibility) : Json(nullptr);
  j["reconstruction"] = r.reconstruction ? model_to_json(*r.reconstruction) : Json(nullptr);
  return j;
}

inline ErrorKind error_kind_from_string(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::ConfigError); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == s) return static_cast<ErrorKind>(k);
  }
  throw Error(ErrorKind::ConfigError, "unknown error kind '" + std::string(s) + "'");
}

inline CalibrationReport report_from_json(const nlohmann::json& j, const std::string& context = "report") {
  detail::check_keys(j, {"schema_version", "algorithm", "config", "sensors", "pair_count", "mean_transform",
                         "mean_euler", "pairs", "failures", "plausibility", "reconstruction"},
                     context);
  detail::check_schema(j, context);
  CalibrationReport r;
  try {
    r.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    r.mean_transform = detail::matrix_from(j.at("mean_transform"), context + ".mean_transform");
    for (const auto& p : j.at("pairs")) {
      r.per_pair_transforms.push_back(detail::matrix_from(p.at("transform"), context + ".pairs.transform"));
      r.per_pair_euler.push_back(detail::euler_from(p.at("euler"), context + ".pairs.euler"));
    }
    for (const auto& f : j.at("failures")) {
      r.failures.push_back({f.at("pair_index").get<std::size_t>(),
                            error_kind_from_string(f.at("kind").get<std::string>()),
                            f.at("message").get<std::string>()});
    }
    if (j.at("pair_count").get<std::size_t>() != r.per_pair_transforms.size()) {
      throw Error(ErrorKind::ConfigError, context + ": pair_count disagrees with the pair list");
    }
    if (!j.at("plausibility").is_null()) r.plausibility = j["plausibility"].get<double>();
    if (!j.at("reconstruction").is_null()) r.reconstruction = model_from_json(j["reconstruction"], context + ".reconstruction");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    throw Error(ErrorKind::ConfigError, context + ": " + e.what());
  }
  return r;
}

}  // namespace gmmcalib
