#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmmcalib/se3.hpp"

namespace gmmcalib {

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;
  std::string sensor_id;
  std::string frame_label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.has_value(); }
};

/// Throws InvalidArgument if coordinates are non-finite or normals are
/// malformed (count mismatch or non-unit length beyond 1e-6).
inline void validate(const PointCloud& cloud) {
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite coordinate in cloud");
  }
  if (cloud.normals) {
    if (cloud.normals->size() != cloud.points.size()) {
      throw Error(ErrorKind::InvalidArgument, "normal count differs from point count");
    }
    for (const auto& n : *cloud.normals) {
      if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
        throw Error(ErrorKind::InvalidArgument, "normal is not unit length");
      }
    }
  }
}

/// Applies `t` to every point (and rotates normals). Labels are preserved
/// unless `frame_label` is given.
inline PointCloud transformed(const PointCloud& cloud, const RigidTransform& t,
                              std::optional<std::string> frame_label = std::nullopt) {
  PointCloud out;
  out.sensor_id = cloud.sensor_id;
  out.frame_label = frame_label.value_or(cloud.frame_label);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  if (cloud.normals) {
    std::vector<Vec3> n;
    n.reserve(cloud.normals->size());
    for (const auto& v : *cloud.normals) n.push_back(t.rotation * v);
    out.normals = std::move(n);
  }
  return out;
}

struct AxisAlignedBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// Points inside the closed box [min, max]. Normals follow their points.
inline PointCloud crop_box(const PointCloud& cloud, const Vec3& min, const Vec3& max) {
  if (!(min.array() < max.array()).all()) {
    throw Error(ErrorKind::InvalidArgument, "crop box min must be below max on every axis");
  }
  const AxisAlignedBox box{min, max};
  PointCloud out;
  out.sensor_id = cloud.sensor_id;
  out.frame_label = cloud.frame_label;
  if (cloud.normals) out.normals.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!box.contains(cloud.points[i])) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.normals) out.normals->push_back((*cloud.normals)[i]);
  }
  return out;
}

inline AxisAlignedBox bounding_box(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorKind::EmptyCloud, "bounding box of empty point set");
  AxisAlignedBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact Euclidean nearest-neighbor search over a fixed point set (k-d tree).
/// Immutable after construction; concurrent queries are safe.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error(ErrorKind::EmptyCloud, "cannot index an empty cloud");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }

  explicit SpatialIndex(const PointCloud& cloud) : SpatialIndex(std::span<const Vec3>(cloud.points)) {}

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Closest point; ties resolve to the lowest index.
  Neighbor nearest(const Vec3& query) const {
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    search_nearest(0, query, best);
    return best;
  }

  /// The k closest points sorted by (distance, index). k is clamped to size().
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    k = std::min(k, points_.size());
    std::vector<Neighbor> heap;  // max-heap on (distance, index)
    heap.reserve(k + 1);
    if (k > 0) search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end(), worse);
    return heap;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
  };

  static bool worse(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }

  static bool better(const Neighbor& a, const Neighbor& b) { return worse(a, b); }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi(axis) == lo(axis)) return id;  // all coincident
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a](axis) < points_[b](axis); });
    const double split = points_[order_[mid]](axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_distance2(const Node& n, const Vec3& q) {
    const Vec3 d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void search_nearest(std::size_t id, const Vec3& q, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (box_distance2(n, q) > best.squared_distance) return;
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (better(cand, best)) best = cand;
      }
      return;
    }
    const bool go_left = q(n.axis) < n.split;
    search_nearest(go_left ? n.left : n.right, q, best);
    search_nearest(go_left ? n.right : n.left, q, best);
  }

  void search_knn(std::size_t id, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[id];
    if (heap.size() == k && box_distance2(n, q) > heap.front().squared_distance) return;
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), worse);
        } else if (better(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), worse);
        }
      }
      return;
    }
    const bool go_left = q(n.axis) < n.split;
    search_knn(go_left ? n.left : n.right, q, k, heap);
    search_knn(go_left ? n.right : n.left, q, k, heap);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

inline SpatialIndex build_spatial_index(const PointCloud& cloud) { return SpatialIndex(cloud); }

/// Default neighborhood size for normal estimation.
inline constexpr std::size_t kDefaultNormalK = 15;

/// Smallest-eigenvalue eigenvectors of the k-NN covariance (the query point
/// included), oriented toward the sensor origin (0,0,0) of the cloud's frame.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k = kDefaultNormalK) {
  if (k < 3 || cloud.size() < k) {
    throw Error(ErrorKind::TooFewPoints, "normal estimation needs size >= k >= 3");
  }
  const SpatialIndex index(cloud);
  std::vector<Vec3> normals(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nn = index.knn(cloud.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nn) mean += cloud.points[n.index];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nn) {
      const Vec3 d = cloud.points[n.index] - mean;
      cov.noalias() += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(-cloud.points[i]) < 0.0) normal = -normal;
    normals[i] = normal;
  });
  PointCloud out = cloud;
  out.normals = std::move(normals);
  return out;
}

/// N observations from exactly two sensors, L1 observations first. Pair j
/// couples observation j (sensor one) with observation N/2 + j (sensor two).
class ObservationSet {
 public:
  ObservationSet() = default;

  ObservationSet(std::vector<PointCloud> first_sensor, std::vector<PointCloud> second_sensor) {
    if (first_sensor.size() != second_sensor.size()) {
      throw Error(ErrorKind::InvalidArgument, "both sensors must contribute the same number of observations");
    }
    if (first_sensor.empty()) throw Error(ErrorKind::EmptyInput, "observation set is empty");
    std::set<std::string> ids_a;
    std::set<std::string> ids_b;
    for (const auto& c : first_sensor) ids_a.insert(c.sensor_id);
    for (const auto& c : second_sensor) ids_b.insert(c.sensor_id);
    if (ids_a.size() != 1 || ids_b.size() != 1 || *ids_a.begin() == *ids_b.begin()) {
      throw Error(ErrorKind::InvalidArgument, "observations must come from exactly two distinct sensors");
    }
    sensors_ = {*ids_a.begin(), *ids_b.begin()};
    const std::size_t half = first_sensor.size();
    observations_.reserve(2 * half);
    for (auto& c : first_sensor) observations_.push_back(std::move(c));
    for (auto& c : second_sensor) observations_.push_back(std::move(c));
    for (std::size_t j = 0; j < half; ++j) pairs_.emplace_back(j, half + j);
  }

  const std::vector<PointCloud>& observations() const { return observations_; }
  const PointCloud& observation(std::size_t i) const { return observations_.at(i); }
  std::size_t size() const { return observations_.size(); }
  std::size_t pair_count() const { return pairs_.size(); }

  /// (first-sensor index, second-sensor index) of pair j.
  std::pair<std::size_t, std::size_t> pair(std::size_t j) const { return pairs_.at(j); }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const { return pairs_; }
  const std::array<std::string, 2>& sensors() const { return sensors_; }

  const PointCloud& first(std::size_t j) const { return observations_[pair(j).first]; }
  const PointCloud& second(std::size_t j) const { return observations_[pair(j).second]; }

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& c : observations_) n += c.size();
    return n;
  }

 private:
  std::vector<PointCloud> observations_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::array<std::string, 2> sensors_;
};

}  // namespace gmmcalib
