#pragma once

// Joint rigid registration of N point sets against one latent isotropic
// Gaussian mixture, solved by expectation-conditional-maximization:
//   E: posteriors of every transformed point over M components + outlier
//   M: per-set rigid transform (weighted Procrustes on virtual targets),
//      then means, variances and mixing weights given the new transforms.
// Every conditional step maximizes the expected complete-data
// log-likelihood, so the observed-data log-likelihood never decreases.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gmmcalib/alignment.hpp"
#include "gmmcalib/point_cloud.hpp"

namespace gmmcalib {

struct GmmModel {
  std::vector<Vec3> means;
  std::vector<double> variances;  // isotropic, m^2
  std::vector<double> weights;
  double outlier_weight = 0.0;
  double outlier_density = 0.0;  // 1/m^3

  std::size_t size() const { return means.size(); }

  /// Indices of components with weight >= threshold.
  std::vector<std::size_t> surviving(double threshold) const {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < size(); ++m) {
      if (weights[m] >= threshold) out.push_back(m);
    }
    return out;
  }
};

struct GmmConfig {
  std::size_t components = 0;  // 0 selects default_component_count()
  double outlier_weight = 0.05;
  double tol = 1e-6;
  std::size_t max_iterations = 200;
  std::uint64_t seed = 0;
  double cube_edge_init = 0.5;
  double variance_floor = 1e-6;
};

struct JointRegistrationResult {
  std::vector<RigidTransform> transforms;  // observation frame -> latent frame
  GmmModel model;
  std::vector<double> log_likelihood_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Posteriors of one E-step. gaussian[i] is N_i x M, outlier[i] is N_i.
struct Responsibilities {
  std::vector<Eigen::MatrixXd> gaussian;
  std::vector<Eigen::VectorXd> outlier;
  double log_likelihood = 0.0;
};

struct MStepResult {
  std::vector<RigidTransform> transforms;
  GmmModel model;
};

/// Roughly one component per 1000 points, capped at 400 and never below the
/// 8 needed by the cube initialization.
inline std::size_t default_component_count(std::size_t total_points) {
  return std::max<std::size_t>(8, std::min<std::size_t>(400, total_points / 1000));
}

/// Means sampled on the surfaces of axis-aligned cubes (edge `cube_edge`)
/// whose centers are uniform in the union bounding box inflated by 10%.
/// One cube per 50 components. Variances (diag/10)^2, uniform weights.
inline GmmModel initialize_model(std::span<const PointCloud> observations, std::size_t m, std::uint64_t seed,
                                 double cube_edge = 0.5, double outlier_weight = 0.05) {
  if (m < 8) throw Error(ErrorKind::InvalidComponentCount, "at least 8 mixture components are required");
  if (observations.empty()) throw Error(ErrorKind::EmptyInput, "no observations");
  if (!(outlier_weight >= 0.0 && outlier_weight < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "outlier weight must lie in [0, 1)");
  }
  if (!(cube_edge > 0.0)) throw Error(ErrorKind::InvalidArgument, "cube edge must be positive");

  bool any = false;
  AxisAlignedBox box;
  for (const auto& obs : observations) {
    if (obs.empty()) continue;
    const AxisAlignedBox b = bounding_box(obs.points);
    box = any ? AxisAlignedBox{box.min.cwiseMin(b.min), box.max.cwiseMax(b.max)} : b;
    any = true;
  }
  if (!any) throw Error(ErrorKind::EmptyCloud, "all observations are empty");

  const Vec3 center = 0.5 * (box.min + box.max);
  const Vec3 half = 0.55 * (box.max - box.min);
  const Vec3 lo = center - half;
  const Vec3 hi = center + half;
  const Vec3 extent = (hi - lo).cwiseMax(1e-3);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cube_count = std::max<std::size_t>(1, m / 50);
  std::vector<Vec3> cube_centers(cube_count);
  for (auto& c : cube_centers) {
    for (int a = 0; a < 3; ++a) c(a) = lo(a) + unit(rng) * (hi(a) - lo(a));
  }

  GmmModel model;
  model.means.reserve(m);
  const double h = 0.5 * cube_edge;
  for (std::size_t k = 0; k < m; ++k) {
    const Vec3& c = cube_centers[k % cube_count];
    const auto face = static_cast<int>(std::min(5.0, std::floor(unit(rng) * 6.0)));
    const int axis = face / 2;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p(a) = (2.0 * unit(rng) - 1.0) * h;
    p(axis) = (face % 2 == 0) ? -h : h;
    model.means.push_back(c + p);
  }
  const double diag = (box.max - box.min).norm();
  const double var0 = std::max(std::pow(diag / 10.0, 2), 1e-6);
  model.variances.assign(m, var0);
  model.weights.assign(m, (1.0 - outlier_weight) / static_cast<double>(m));
  model.outlier_weight = outlier_weight;
  model.outlier_density = 1.0 / (extent.x() * extent.y() * extent.z());
  return model;
}

inline GmmModel initialize_model(const ObservationSet& observations, std::size_t m, std::uint64_t seed,
                                 double cube_edge = 0.5, double outlier_weight = 0.05) {
  return initialize_model(std::span<const PointCloud>(observations.observations()), m, seed, cube_edge,
                          outlier_weight);
}

namespace detail {

// Posterior terms below exp(-40) relative to the largest are dropped; they
// are beneath double resolution of the row sum.
inline constexpr double kLogCutoff = -40.0;

struct ComponentTable {
  std::vector<double> mx, my, mz, inv_two_var, inv_var, log_norm;
  double log_outlier = -std::numeric_limits<double>::infinity();

  explicit ComponentTable(const GmmModel& model) {
    const std::size_t m = model.size();
    mx.resize(m);
    my.resize(m);
    mz.resize(m);
    inv_two_var.resize(m);
    inv_var.resize(m);
    log_norm.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      mx[k] = model.means[k].x();
      my[k] = model.means[k].y();
      mz[k] = model.means[k].z();
      inv_var[k] = 1.0 / model.variances[k];
      inv_two_var[k] = 0.5 * inv_var[k];
      log_norm[k] = std::log(model.weights[k]) - 1.5 * std::log(2.0 * std::numbers::pi * model.variances[k]);
    }
    if (model.outlier_weight > 0.0 && model.outlier_density > 0.0) {
      log_outlier = std::log(model.outlier_weight * model.outlier_density);
    }
  }
};

// Per-observation sufficient statistics of one E-step, enough for every
// conditional maximization in the M-step.
struct ObservationStats {
  std::vector<double> lambda;       // per point: sum_m alpha/var
  std::vector<Vec3> virtual_target;  // per point: sum_m (alpha/var) mu / lambda
  std::vector<double> mass;         // per component: sum_k alpha
  std::vector<Vec3> first;          // per component: sum_k alpha x
  std::vector<double> second;       // per component: sum_k alpha |x|^2
  double log_likelihood = 0.0;

  void reset(std::size_t points, std::size_t components) {
    lambda.assign(points, 0.0);
    virtual_target.assign(points, Vec3::Zero());
    mass.assign(components, 0.0);
    first.assign(components, Vec3::Zero());
    second.assign(components, 0.0);
    log_likelihood = 0.0;
  }
};

// Posterior row of one point: the non-negligible components and their
// normalized posteriors, the outlier posterior and the log normalizer.
struct PosteriorRow {
  std::vector<double> terms;
  std::vector<std::size_t> active;
  std::vector<double> alpha;
  double outlier = 0.0;
  double log_norm = 0.0;
};

inline void posterior_row(const ComponentTable& table, const Vec3& y, PosteriorRow& row) {
  const std::size_t m = table.mx.size();
  row.terms.resize(m);
  double* terms = row.terms.data();
  const double yx = y.x(), yy = y.y(), yz = y.z();
  double best = table.log_outlier;
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = yx - table.mx[k];
    const double dy = yy - table.my[k];
    const double dz = yz - table.mz[k];
    terms[k] = table.log_norm[k] - (dx * dx + dy * dy + dz * dz) * table.inv_two_var[k];
  }
  for (std::size_t k = 0; k < m; ++k) best = std::max(best, terms[k]);
  if (!std::isfinite(best)) {
    throw Error(ErrorKind::NumericUnderflow, "point has zero density under every component");
  }
  row.active.clear();
  row.alpha.clear();
  const double outlier = std::isfinite(table.log_outlier) ? std::exp(table.log_outlier - best) : 0.0;
  double sum = outlier;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = terms[k] - best;
    if (d < kLogCutoff) continue;
    const double e = std::exp(d);
    row.active.push_back(k);
    row.alpha.push_back(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (double& a : row.alpha) a *= inv;
  row.outlier = outlier * inv;
  row.log_norm = best + std::log(sum);
}

// Adds point k with coordinates x (observation frame) and its posterior row.
inline void accumulate_point(const Vec3& x, std::size_t k, const ComponentTable& table, const PosteriorRow& row,
                             ObservationStats& stats) {
  double lam = 0.0;
  Vec3 target = Vec3::Zero();
  const double x2 = x.squaredNorm();
  for (std::size_t j = 0; j < row.active.size(); ++j) {
    const std::size_t m = row.active[j];
    const double a = row.alpha[j];
    const double w = a * table.inv_var[m];
    lam += w;
    target += w * Vec3(table.mx[m], table.my[m], table.mz[m]);
    stats.mass[m] += a;
    stats.first[m] += a * x;
    stats.second[m] += a * x2;
  }
  stats.lambda[k] = lam;
  stats.virtual_target[k] = lam > 0.0 ? Vec3(target / lam) : x;
}

// Streaming E-step for one observation: posteriors are consumed on the fly.
inline void expect_observation(const PointCloud& obs, const RigidTransform& t, const ComponentTable& table,
                               ObservationStats& stats) {
  stats.reset(obs.size(), table.mx.size());
  PosteriorRow row;
  CompensatedSum ll;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Vec3& x = obs.points[k];
    posterior_row(table, t.apply(x), row);
    ll.add(row.log_norm);
    accumulate_point(x, k, table, row, stats);
  }
  stats.log_likelihood = ll.value();
}

// Conditional maximizations given the E-step statistics.
inline MStepResult maximize(std::span<const PointCloud> observations, std::span<const ObservationStats> stats,
                            const GmmModel& model, double variance_floor) {
  MStepResult out;
  out.transforms.resize(observations.size());
  parallel_for(observations.size(), [&](std::size_t i) {
    out.transforms[i] = weighted_rigid_alignment(observations[i].points, stats[i].virtual_target,
                                                 stats[i].lambda, ErrorKind::DegenerateAlignment);
  });

  const std::size_t m = model.size();
  out.model = model;
  std::vector<double> mass(m, 0.0);
  std::vector<Vec3> first(m, Vec3::Zero());
  std::vector<double> second(m, 0.0);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const RigidTransform& t = out.transforms[i];
    const double t2 = t.translation.squaredNorm();
    for (std::size_t c = 0; c < m; ++c) {
      const double a = stats[i].mass[c];
      if (a == 0.0) continue;
      const Vec3 rs = t.rotation * stats[i].first[c];
      mass[c] += a;
      first[c] += rs + a * t.translation;
      second[c] += stats[i].second[c] + 2.0 * t.translation.dot(rs) + a * t2;
    }
  }

  double total = 0.0;
  for (double a : mass) total += a;
  for (std::size_t c = 0; c < m; ++c) {
    if (mass[c] > 1e-12) {
      const Vec3 mu = first[c] / mass[c];
      const double var = (second[c] - mass[c] * mu.squaredNorm()) / (3.0 * mass[c]);
      out.model.means[c] = mu;
      out.model.variances[c] = std::max(var, variance_floor);
    }
    out.model.weights[c] = total > 0.0 ? (1.0 - model.outlier_weight) * mass[c] / total : model.weights[c];
  }
  return out;
}

}  // namespace detail

/// Dense E-step: every posterior materialized. Rows sum to 1 with the
/// outlier column included.
inline Responsibilities e_step(std::span<const PointCloud> observations, std::span<const RigidTransform> transforms,
                               const GmmModel& model) {
  if (observations.size() != transforms.size()) {
    throw Error(ErrorKind::InvalidArgument, "one transform per observation is required");
  }
  const detail::ComponentTable table(model);
  Responsibilities r;
  r.gaussian.resize(observations.size());
  r.outlier.resize(observations.size());
  std::vector<double> ll(observations.size(), 0.0);
  parallel_for(observations.size(), [&](std::size_t i) {
    const auto& obs = observations[i];
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(obs.size(), model.size());
    Eigen::VectorXd o(obs.size());
    detail::PosteriorRow row;
    CompensatedSum sum;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      detail::posterior_row(table, transforms[i].apply(obs.points[k]), row);
      sum.add(row.log_norm);
      for (std::size_t j = 0; j < row.active.size(); ++j) g(k, row.active[j]) = row.alpha[j];
      o(k) = row.outlier;
    }
    r.gaussian[i] = std::move(g);
    r.outlier[i] = std::move(o);
    ll[i] = sum.value();
  });
  CompensatedSum total;
  for (double v : ll) total.add(v);
  r.log_likelihood = total.value();
  return r;
}

inline Responsibilities e_step(const ObservationSet& observations, std::span<const RigidTransform> transforms,
                               const GmmModel& model) {
  return e_step(std::span<const PointCloud>(observations.observations()), transforms, model);
}

inline MStepResult m_step(std::span<const PointCloud> observations, const Responsibilities& resp,
                          const GmmModel& model, double variance_floor = 1e-6) {
  if (resp.gaussian.size() != observations.size()) {
    throw Error(ErrorKind::InvalidArgument, "responsibilities do not match the observations");
  }
  const detail::ComponentTable table(model);
  std::vector<detail::ObservationStats> stats(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& g = resp.gaussian[i];
    if (static_cast<std::size_t>(g.rows()) != observations[i].size() ||
        static_cast<std::size_t>(g.cols()) != model.size()) {
      throw Error(ErrorKind::InvalidArgument, "responsibility matrix has the wrong shape");
    }
    stats[i].reset(observations[i].size(), model.size());
    detail::PosteriorRow row;
    for (std::size_t k = 0; k < observations[i].size(); ++k) {
      row.active.clear();
      row.alpha.clear();
      for (std::size_t c = 0; c < model.size(); ++c) {
        if (g(k, c) == 0.0) continue;
        row.active.push_back(c);
        row.alpha.push_back(g(k, c));
      }
      detail::accumulate_point(observations[i].points[k], k, table, row, stats[i]);
    }
  }
  return detail::maximize(observations, stats, model, variance_floor);
}

inline MStepResult m_step(const ObservationSet& observations, const Responsibilities& resp, const GmmModel& model,
                          double variance_floor = 1e-6) {
  return m_step(std::span<const PointCloud>(observations.observations()), resp, model, variance_floor);
}

/// Observed-data log-likelihood of the observations under (transforms, model).
inline double log_likelihood(std::span<const PointCloud> observations, std::span<const RigidTransform> transforms,
                             const GmmModel& model) {
  const detail::ComponentTable table(model);
  detail::PosteriorRow row;
  CompensatedSum sum;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    for (const auto& x : observations[i].points) {
      detail::posterior_row(table, transforms[i].apply(x), row);
      sum.add(row.log_norm);
    }
  }
  return sum.value();
}

/// EM from an explicit starting point. Registration runs in coordinates
/// centered on the union centroid; results are mapped back exactly.
inline JointRegistrationResult joint_register(std::span<const PointCloud> observations, const GmmConfig& config,
                                              GmmModel initial_model, std::vector<RigidTransform> initial_transforms) {
  if (observations.size() < 2) throw Error(ErrorKind::InvalidArgument, "joint registration needs >= 2 observations");
  for (const auto& obs : observations) {
    if (obs.size() < 10) throw Error(ErrorKind::TooFewPoints, "every observation needs >= 10 points");
  }
  if (initial_transforms.size() != observations.size()) {
    throw Error(ErrorKind::InvalidArgument, "one initial transform per observation is required");
  }

  // Centering shift c: x~ = x - c, mu~ = mu - c, t~ = t + R c - c.
  Vec3 c = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& obs : observations) {
    for (const auto& p : obs.points) c += p;
    count += obs.size();
  }
  c /= static_cast<double>(count);
  std::vector<PointCloud> centered(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    centered[i].points.reserve(observations[i].size());
    for (const auto& p : observations[i].points) centered[i].points.push_back(p - c);
  }
  GmmModel model = std::move(initial_model);
  for (auto& mu : model.means) mu -= c;
  std::vector<RigidTransform> transforms = std::move(initial_transforms);
  for (auto& t : transforms) t.translation += t.rotation * c - c;

  JointRegistrationResult result;
  std::vector<detail::ObservationStats> stats(centered.size());
  auto expect = [&]() {
    const detail::ComponentTable table(model);
    parallel_for(centered.size(),
                 [&](std::size_t i) { detail::expect_observation(centered[i], transforms[i], table, stats[i]); });
    CompensatedSum ll;
    for (const auto& s : stats) ll.add(s.log_likelihood);
    return ll.value();
  };

  double previous = expect();
  result.log_likelihood_trace.push_back(previous);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    auto next = detail::maximize(centered, stats, model, config.variance_floor);
    transforms = std::move(next.transforms);
    model = std::move(next.model);
    ++result.iterations;
    const double current = expect();
    result.log_likelihood_trace.push_back(current);
    const double rel = (current - previous) / std::max(std::abs(previous), 1e-300);
    previous = current;
    if (std::abs(rel) < config.tol) {
      result.converged = true;
      break;
    }
  }

  for (auto& mu : model.means) mu += c;
  for (auto& t : transforms) t.translation -= t.rotation * c - c;
  result.transforms = std::move(transforms);
  result.model = std::move(model);
  return result;
}

inline JointRegistrationResult joint_register(std::span<const PointCloud> observations, const GmmConfig& config) {
  const std::size_t total = [&] {
    std::size_t n = 0;
    for (const auto& o : observations) n += o.size();
    return n;
  }();
  const std::size_t m = config.components > 0 ? config.components : default_component_count(total);
  GmmModel model = initialize_model(observations, m, config.seed, config.cube_edge_init, config.outlier_weight);
  return joint_register(observations, config, std::move(model),
                        std::vector<RigidTransform>(observations.size(), RigidTransform::identity()));
}

inline JointRegistrationResult joint_register(const ObservationSet& observations, const GmmConfig& config) {
  return joint_register(std::span<const PointCloud>(observations.observations()), config);
}

}  // namespace gmmcalib
