#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "klmpc/bilinear.hpp"
#include "klmpc/clf.hpp"
#include "klmpc/controller.hpp"
#include "klmpc/integrate.hpp"
#include "klmpc/plant.hpp"

namespace klmpc {

enum class ControllerKind { OpenLoop, Sontag, Gain, Lmpc };

ControllerKind controller_kind_from_string(const std::string& s);
const char* to_string(ControllerKind kind);

struct SimOptions {
  double horizon = 10.0;
  int substeps_per_hold = 10;  // integrator substep = hold dt / this
  double sim_box = 5.0;        // |x_i| beyond this is a divergence error
  bool box_escape_error = true;
};

/// Closed- or open-loop record on the substep grid. states holds the true
/// plant states; lifted holds the measurement re-lift Psi(x(t)) used for
/// feedback and V; predicted_lifted and predicted hold the bilinear model
/// propagated open loop from Psi(x(0)) under the same applied inputs, i.e.
/// the x_hat = C z of the prediction-error diagnostic. Inputs are piecewise
/// constant across each hold interval. Write-once, then immutable.
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;            // n x T
  Eigen::MatrixXd lifted;            // N x T
  Eigen::MatrixXd predicted_lifted;  // N x T
  Eigen::MatrixXd predicted;         // n x T
  Eigen::VectorXd inputs;            // T
  Eigen::VectorXd V;                 // T, NaN when no CLF is attached
  std::vector<int> mode;             // LmpcMode per grid point, -1 otherwise
  std::vector<ControlDecision> decisions;  // one per hold instant (lmpc only)
  int substeps_per_hold = 1;
  bool left_region = false;  // lift left Omega_r at some hold instant

  int length() const { return static_cast<int>(times.size()); }
  int holds() const { return (length() - 1) / substeps_per_hold; }

  /// V(Psi(x(t_k))) at hold instant k.
  double hold_V(int k) const { return V[k * substeps_per_hold]; }
};

/// Sample-and-hold loop: at every hold instant the true state is re-lifted
/// through the eigenfunctions, the selected controller produces one input,
/// and the true plant is integrated with RK4 substeps while the input is
/// held. Closed-loop kinds require Psi(x0) inside Omega_r; leaving Omega_r
/// mid-run is recorded as a flag and the run continues on the explicit
/// controller (diagnostic value), while escaping the simulation box throws.
Trajectory run_closed_loop(const Plant& plant, const KoopmanBilinearModel& model,
                           const Clf* clf, const LmpcConfig& config, ControllerKind kind,
                           const Eigen::VectorXd& x0, const SimOptions& options);

void write_trajectory_csv(const Trajectory& traj, const std::string& path);

/// Lyapunov-decrease violations at hold instants: counts k with
/// V(z(t_k)) > r_hat and V(z(t_{k+1})) not smaller than V(z(t_k)).
int count_lyapunov_violations(const Trajectory& traj, double r_hat);

struct ErrorBoundReport {
  double nu = 0.0;   // modeling-error bound, max instantaneous discrepancy
  double l_x = 0.0;  // Lipschitz estimate of the true field
  std::vector<double> times;
  std::vector<double> bound;     // (nu / l_x)(exp(l_x t) - 1)
  std::vector<double> measured;  // max over trajectories of |x(t) - x_hat(t)|
  bool satisfied = false;

  nlohmann::json to_json() const;
};

/// Empirical check of the prediction-error bound: nu is estimated as the
/// worst instantaneous gap between the true field and the model field along
/// the predicted paths, l_x from difference quotients over the (x, x_hat)
/// pairs plus seeded random pairs in the box. All trajectories must share
/// x_hat(0) = x(0) by construction.
ErrorBoundReport check_error_bound(const Plant& plant, const KoopmanBilinearModel& model,
                                   const std::vector<Trajectory>& trajectories, double t_max,
                                   std::uint64_t seed);

}  // namespace klmpc
