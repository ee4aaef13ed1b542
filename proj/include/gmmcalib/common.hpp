#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gmmcalib {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Failure classes raised across the library. Each maps onto one error
/// condition of a public operation; callers dispatch on `kind()`.
enum class ErrorKind {
  InvalidArgument,
  GimbalProximity,
  EmptyInput,
  DegenerateMean,
  EmptyCloud,
  TooFewPoints,
  ParseError,
  UnsupportedFormat,
  IoError,
  InvalidComponentCount,
  NumericUnderflow,
  DegenerateAlignment,
  NoCorrespondences,
  DegenerateGeometry,
  IllConditioned,
  EmptyTargetRegion,
  MisalignedBookkeeping,
  EmptyModel,
  ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::GimbalProximity: return "GimbalProximity";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateMean: return "DegenerateMean";
    case ErrorKind::EmptyCloud: return "EmptyCloud";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidComponentCount: return "InvalidComponentCount";
    case ErrorKind::NumericUnderflow: return "NumericUnderflow";
    case ErrorKind::DegenerateAlignment: return "DegenerateAlignment";
    case ErrorKind::NoCorrespondences: return "NoCorrespondences";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::EmptyTargetRegion: return "EmptyTargetRegion";
    case ErrorKind::MisalignedBookkeeping: return "MisalignedBookkeeping";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Neumaier-compensated running sum. Summation order is the caller's loop
/// order, so results are reproducible for a fixed input order.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Worker count: hardware concurrency, capped by GMMCALIB_THREADS if set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GMMCALIB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Runs fn(i) for i in [0, count) on up to worker_count() threads. Work is
/// split into contiguous blocks; fn must only write to slots owned by i.
/// The first exception thrown by any worker is rethrown on the caller.
/// Nested calls from inside a worker run serially.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = detail::inside_parallel_region ? 1 : std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      const std::size_t begin = w * block;
      const std::size_t end = std::min(count, begin + block);
      detail::inside_parallel_region = true;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gmmcalib
