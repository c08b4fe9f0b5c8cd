// Helpers shared by the unit tests: seeded generators and scratch directories.
#pragma once

#include "funnel/types.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace funnel::test {

/// Seeded generator for property tests; each test case uses its own seed.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }

  Vec vec(int n, double sd = 1.0) {
    Vec v(n);
    for (int k = 0; k < n; ++k) v[k] = normal(sd);
    return v;
  }

  Mat mat(int rows, int cols, double sd = 1.0) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = normal(sd);
    }
    return m;
  }

  /// Vector with norm drawn uniformly from [0, radius).
  Vec in_ball(int n, double radius) {
    Vec v = vec(n);
    const double norm = v.norm();
    if (norm == 0.0) return v;
    return v * (uniform(0.0, radius) / norm);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(FUNNEL_SOURCE_DIR) / rel;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("funnel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace funnel::test
