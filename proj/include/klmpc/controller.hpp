#pragma once

#include <Eigen/Dense>

#include "klmpc/bilinear.hpp"
#include "klmpc/clf.hpp"

namespace klmpc {

/// Saturated Sontag universal formula:
///   b(z) = -(L_Lambda V + sqrt(L_Lambda V^2 + L_B V^4)) / L_B V
/// when |L_B V| exceeds the numeric floor (1e-10), otherwise 0; the result is
/// clamped to [u_min, u_max].
double sontag_control(const Clf& clf, const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                      const Eigen::Ref<const Eigen::VectorXd>& z, double u_min, double u_max);

/// h(z) = clamp(-k L_B V(z)).
double gain_control(const Clf& clf, const Eigen::MatrixXd& B,
                    const Eigen::Ref<const Eigen::VectorXd>& z, double k, double u_min,
                    double u_max);

enum class ExplicitKind { Sontag, Gain };

struct LmpcSolverOptions {
  int max_outer_iters = 12;
  double penalty_weight = 1e4;
  double step_size = 0.1;
  int grid_fallback_points = 0;  // 0 disables the first-input grid rescue
};

struct LmpcConfig {
  int N_p = 100;            // prediction steps
  double dt = 0.01;         // sampling / hold interval
  Eigen::MatrixXd W;        // N x N, positive definite
  double R = 1.0;           // input cost, positive
  double u_min = -10.0;
  double u_max = 10.0;
  ExplicitKind explicit_kind = ExplicitKind::Sontag;
  double gain_k = 10.0;
  LmpcSolverOptions solver;

  void validate(int lifted_dim) const;
};

enum class LmpcMode { SafeRegion, Contraction, ExplicitFallback };

const char* to_string(LmpcMode mode);

struct ControlDecision {
  Eigen::VectorXd u_sequence;  // length N_p, all entries inside the input box
  double applied_u = 0.0;      // first element
  LmpcMode mode = LmpcMode::ExplicitFallback;
  double cost = 0.0;        // <= guess_cost, always
  double guess_cost = 0.0;  // objective of the explicit-controller rollout
  double constraint_residual = 0.0;  // violation of the active Lyapunov constraint
};

/// One Lyapunov-constrained MPC step from the lifted state z_k. The explicit
/// controller rollout is the (always feasible) initial guess; penalized
/// projected gradient in the piecewise-constant input sequence improves it.
/// Inside Omega_r_hat the predicted V stays below r_hat at every knot; in the
/// contraction ring the first input must not decay V slower than h does. If
/// no strictly feasible improvement is found, the guess itself is returned
/// (ExplicitFallback). Throws OutsideStabilityRegionError when V(z_k) > r.
ControlDecision lmpc_step(const KoopmanBilinearModel& model, const Clf& clf,
                          const LmpcConfig& config, const Eigen::VectorXd& z_k);

/// The configured explicit controller h(z) evaluated with the config bounds.
double explicit_control(const KoopmanBilinearModel& model, const Clf& clf,
                        const LmpcConfig& config, const Eigen::VectorXd& z);

}  // namespace klmpc
