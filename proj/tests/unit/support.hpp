#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wmlab/field.hpp"

namespace testsupport {

inline constexpr double kPi = 3.14159265358979323846;

// Fixed-seed generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  int sign() { return uniform(0.0, 1.0) < 0.5 ? -1 : 1; }

  // Random smooth bump c·(1 − x²)⁴ supported in [a, a + w] with a > 0.
  std::vector<double> bump(const wmlab::RadialGrid& g, double a_lo, double a_hi, double w_max) {
    const double a = uniform(a_lo, a_hi);
    const double w = uniform(0.3, w_max);
    const double c = uniform(-1.0, 1.0);
    const double mid = a + 0.5 * w;
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = (g.node(i) - mid) / (0.5 * w);
      const double y = std::abs(x) < 1.0 ? 1.0 - x * x : 0.0;
      v[i] = c * y * y * y * y;
    }
    return v;
  }

 private:
  std::mt19937_64 rng_;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wmlab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
