#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "klmpc/bilinear.hpp"

namespace klmpc {

struct SynthesisReport {
  double objective = 0.0;  // lambda_max(P Lambda + Lambda^T P) - gamma trace(P B)
  double sigma = 0.0;      // achieved lambda_max term at the returned P
  int iterations = 0;
  bool converged = false;
  std::vector<double> best_objective_history;  // nonincreasing by construction

  nlohmann::json to_json() const;
  static SynthesisReport from_json(const nlohmann::json& j);
};

/// Quadratic stability certificate V(z) = z^T P z with level-set radii:
/// Omega_r is the certified stability region, Omega_r_hat the inner safe zone
/// absorbing sample-and-hold excursions (0 < r_hat < r once estimated).
struct Clf {
  Eigen::MatrixXd P;
  double r = std::numeric_limits<double>::quiet_NaN();
  double r_hat = std::numeric_limits<double>::quiet_NaN();
  SynthesisReport synthesis_report;

  int size() const { return static_cast<int>(P.rows()); }
  bool radii_set() const { return std::isfinite(r) && std::isfinite(r_hat); }

  nlohmann::json to_json() const;
  static Clf from_json(const nlohmann::json& j);
};

struct SynthesisOptions {
  double step_scale = 0.1;  // initial step = step_scale * c_high, decays 1/sqrt(k)
  int max_iters = 5000;
  double tol = 1e-6;        // best-objective stall threshold
  int stall_window = 200;
  double tie_tol = 1e-10;   // lambda_max multiplicity detection
};

/// Minimizes f(P) = lambda_max(P Lambda + Lambda^T P) - gamma trace(P B) over
/// the box c_low I <= P <= c_high I by projected subgradient descent. The
/// projection clamps the eigenvalues of the symmetric iterate into
/// [c_low, c_high]; the best iterate seen is returned. Non-convergence within
/// max_iters returns that best iterate with converged = false.
Clf synthesize_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B, double gamma,
                   double c_low, double c_high, const SynthesisOptions& options = {});

struct StabilizabilityReport {
  int samples = 0;
  int violations = 0;      // L_Lambda V >= 0 with |L_B V| <= 1e-9
  int antecedent_count = 0;  // samples where L_Lambda V >= 0
  double worst_margin = 0.0;  // min over samples of max(-L_Lambda V, |L_B V|)

  nlohmann::json to_json() const;
};

/// Monte Carlo surrogate for the stabilizability condition: draws unit-norm
/// z and counts points where the Lyapunov drift is non-negative yet the
/// control channel has no grip.
StabilizabilityReport check_stabilizability(const Eigen::MatrixXd& P,
                                            const Eigen::MatrixXd& Lambda,
                                            const Eigen::MatrixXd& B, int n_samples,
                                            std::uint64_t seed);

double eval_V(const Clf& clf, const Eigen::Ref<const Eigen::VectorXd>& z);
double eval_LLambdaV(const Clf& clf, const Eigen::MatrixXd& Lambda,
                     const Eigen::Ref<const Eigen::VectorXd>& z);
double eval_LBV(const Clf& clf, const Eigen::MatrixXd& B,
                const Eigen::Ref<const Eigen::VectorXd>& z);

struct LevelSetOptions {
  int n_levels = 32;       // logarithmically spaced
  int n_directions = 64;   // per level
  double rho = 1e-3;       // required decay margin: Vdot <= -rho V
  int hold_substeps = 10;  // RK4 substeps across one hold interval
  // Default level cap: headroom times the largest V(Psi(x)) over states
  // sampled in the ball of state_radius, spanning span_decades downward.
  double state_radius = 1.5;
  double headroom = 4.0;
  double span_decades = 2.0;
  std::optional<std::pair<double, double>> explicit_range;  // overrides the cap heuristic
};

struct LevelSetResult {
  double r = 0.0;
  double r_hat = 0.0;
  std::vector<double> levels;
  std::vector<bool> decrease_ok;        // per level
  std::vector<double> decrease_margin;  // per level, max over dirs of Vdot + rho V (<= 0 passes)

  nlohmann::json to_json() const;
};

/// Monte Carlo estimate of the radii. r is the top of the contiguous band of
/// sampled levels on which the explicit controller h certifies
/// Vdot <= -rho V in every sampled direction. r_hat is the largest sampled
/// level below r such that one sample-and-hold step of duration dt from every
/// sampled point at or below it ends back inside the level and never leaves
/// Omega_r mid-hold. Throws NumericalError when no admissible r exists.
LevelSetResult estimate_level_sets(const Clf& clf, const KoopmanBilinearModel& model,
                                   const std::function<double(const Eigen::VectorXd&)>& controller_h,
                                   double dt, const LevelSetOptions& options, std::uint64_t seed);

}  // namespace klmpc
