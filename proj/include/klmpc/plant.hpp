#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace klmpc {

/// Control-affine plant xdot = F(x) + sum_i u_i G_i(x). The drift and the
/// control fields are plain callables so tests can assemble toy systems
/// inline; the shipped benchmarks have F(0) = 0 and a single input channel.
struct Plant {
  std::string name;
  int n = 0;
  int m = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> control_fields;

  Eigen::VectorXd field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// x1dot = x2, x2dot = (1 - x1^2) x2 - x1 + u. Unforced: limit cycle with an
/// unstable equilibrium at the origin.
Plant make_vanderpol();

/// x1dot = x2, x2dot = 0.01 x2 - sin(x1) + u. The positive damping term makes
/// the origin unstable; the open-loop orbit spirals out toward the basin
/// boundary.
Plant make_pendulum();

/// Lookup by name ("vanderpol" | "pendulum").
Plant make_plant(const std::string& name);

}  // namespace klmpc
