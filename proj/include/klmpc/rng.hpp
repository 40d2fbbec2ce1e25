#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace klmpc {

/// Deterministic splitmix64 generator. All randomness in the toolkit flows
/// through explicit seeds so that every artifact is rerunnable bit for bit;
/// the standard <random> distributions are implementation-defined, which is
/// why the few distributions we need are spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  /// Uniform direction on the unit sphere.
  Eigen::VectorXd unit_vector(int dim) {
    Eigen::VectorXd v = normal_vector(dim);
    double norm = v.norm();
    while (norm < 1e-12) {
      v = normal_vector(dim);
      norm = v.norm();
    }
    return v / norm;
  }

  /// Uniform over the solid ball of the given radius.
  Eigen::VectorXd in_ball(int dim, double radius) {
    const double scale = radius * std::pow(uniform(), 1.0 / dim);
    return scale * unit_vector(dim);
  }

  /// Uniform over the centered box [-half_width, half_width]^dim.
  Eigen::VectorXd in_box(int dim, double half_width) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = uniform(-half_width, half_width);
    return v;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace klmpc
