#include "klmpc/plant.hpp"

#include <cmath>

#include "klmpc/errors.hpp"

namespace klmpc {

Eigen::VectorXd Plant::field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (x.size() != n) throw ValidationError("plant " + name + ": state dimension mismatch");
  if (u.size() != m) throw ValidationError("plant " + name + ": input dimension mismatch");
  Eigen::VectorXd dx = drift(x);
  for (int i = 0; i < m; ++i) dx += u[i] * control_fields[i](x);
  return dx;
}

Plant make_vanderpol() {
  Plant plant;
  plant.name = "vanderpol";
  plant.n = 2;
  plant.m = 1;
  plant.drift = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(2);
    dx[0] = x[1];
    dx[1] = (1.0 - x[0] * x[0]) * x[1] - x[0];
    return dx;
  };
  plant.control_fields = {[](const Eigen::VectorXd&) {
    Eigen::VectorXd g(2);
    g << 0.0, 1.0;
    return g;
  }};
  return plant;
}

Plant make_pendulum() {
  Plant plant;
  plant.name = "pendulum";
  plant.n = 2;
  plant.m = 1;
  plant.drift = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(2);
    dx[0] = x[1];
    dx[1] = 0.01 * x[1] - std::sin(x[0]);
    return dx;
  };
  plant.control_fields = {[](const Eigen::VectorXd&) {
    Eigen::VectorXd g(2);
    g << 0.0, 1.0;
    return g;
  }};
  return plant;
}

Plant make_plant(const std::string& name) {
  if (name == "vanderpol") return make_vanderpol();
  if (name == "pendulum") return make_pendulum();
  throw ValidationError("unknown plant '" + name + "' (expected vanderpol or pendulum)");
}

}  // namespace klmpc
