#pragma once

// Deterministic random-number generation with per-replicate substreams.
// The engine (std::mt19937_64) and all variate transforms are pinned here, so
// a (seed, substream) pair reproduces bit-identical draws on any platform and
// under any thread schedule.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace surrlad {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  /// Independent stream index'ed off a base seed; replicate r of a run uses
  /// substream(seed, r) so parallel execution cannot reorder draws.
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(detail::splitmix64(seed) ^ detail::splitmix64(index + 0x51ED270B7A14C2F1ULL));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Chi-squared with integer degrees of freedom (sum of squared normals).
  double chisq(int dof) {
    double s = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace surrlad
