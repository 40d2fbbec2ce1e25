#include "klmpc/integrate.hpp"

#include "klmpc/errors.hpp"

namespace klmpc {

Eigen::VectorXd rk4_step(const VectorField& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double h) {
  if (!(h > 0.0)) throw ValidationError("rk4_step: step size must be positive");
  const Eigen::VectorXd k1 = f(x, u);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1, u);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2, u);
  const Eigen::VectorXd k4 = f(x + h * k3, u);
  Eigen::VectorXd next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw NumericalError("rk4_step: non-finite state");
  return next;
}

Eigen::VectorXd rk4_bilinear_step(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& z, double u, double h) {
  const Eigen::VectorXd k1 = Lambda * z + u * (B * z);
  Eigen::VectorXd s = z + 0.5 * h * k1;
  const Eigen::VectorXd k2 = Lambda * s + u * (B * s);
  s = z + 0.5 * h * k2;
  const Eigen::VectorXd k3 = Lambda * s + u * (B * s);
  s = z + h * k3;
  const Eigen::VectorXd k4 = Lambda * s + u * (B * s);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace klmpc
