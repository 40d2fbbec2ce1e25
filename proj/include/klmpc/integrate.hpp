#pragma once

#include <functional>

#include <Eigen/Dense>

namespace klmpc {

using VectorField =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// One classical 4th-order Runge-Kutta step of xdot = f(x, u) with u held
/// constant over the step. Throws NumericalError if the result is not finite.
Eigen::VectorXd rk4_step(const VectorField& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double h);

/// RK4 step of the lifted bilinear flow zdot = (Lambda + u B) z. Kept as a
/// plain-matrix overload because the LMPC rollout calls it in a tight loop.
Eigen::VectorXd rk4_bilinear_step(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& z, double u, double h);

}  // namespace klmpc
