#include "klmpc/controller.hpp"

#include <cmath>

#include "klmpc/errors.hpp"
#include "klmpc/integrate.hpp"

namespace klmpc {

namespace {

constexpr double kLbvFloor = 1e-10;       // decides the L_B V = 0 branch of Sontag
constexpr double kFeasibilityTol = 1e-6;  // accepted Lyapunov-constraint residual

double clamp(double u, double lo, double hi) { return std::min(std::max(u, lo), hi); }

}  // namespace

double sontag_control(const Clf& clf, const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                      const Eigen::Ref<const Eigen::VectorXd>& z, double u_min, double u_max) {
  const double lfv = eval_LLambdaV(clf, Lambda, z);
  const double lgv = eval_LBV(clf, B, z);
  double b = 0.0;
  if (std::abs(lgv) > kLbvFloor) {
    b = -(lfv + std::sqrt(lfv * lfv + lgv * lgv * lgv * lgv)) / lgv;
  }
  return clamp(b, u_min, u_max);
}

double gain_control(const Clf& clf, const Eigen::MatrixXd& B,
                    const Eigen::Ref<const Eigen::VectorXd>& z, double k, double u_min,
                    double u_max) {
  if (!(k > 0.0)) throw ValidationError("gain_control: k must be positive");
  return clamp(-k * eval_LBV(clf, B, z), u_min, u_max);
}

void LmpcConfig::validate(int lifted_dim) const {
  if (N_p < 1) throw ValidationError("lmpc: N_p must be >= 1");
  if (!(dt > 0.0)) throw ValidationError("lmpc: dt must be positive");
  if (!(R > 0.0)) throw ValidationError("lmpc: R must be positive");
  if (!(u_min < u_max)) throw ValidationError("lmpc: need u_min < u_max");
  if (W.rows() != lifted_dim || W.cols() != lifted_dim) {
    throw ValidationError("lmpc: W must be N x N for the lifted dimension");
  }
  if (explicit_kind == ExplicitKind::Gain && !(gain_k > 0.0)) {
    throw ValidationError("lmpc: gain k must be positive");
  }
}

const char* to_string(LmpcMode mode) {
  switch (mode) {
    case LmpcMode::SafeRegion: return "safe_region";
    case LmpcMode::Contraction: return "contraction";
    case LmpcMode::ExplicitFallback: return "explicit_fallback";
  }
  return "?";
}

double explicit_control(const KoopmanBilinearModel& model, const Clf& clf,
                        const LmpcConfig& config, const Eigen::VectorXd& z) {
  if (config.explicit_kind == ExplicitKind::Gain) {
    return gain_control(clf, model.B.at(0), z, config.gain_k, config.u_min, config.u_max);
  }
  return sontag_control(clf, model.spectrum.Lambda, model.B.at(0), z, config.u_min, config.u_max);
}

namespace {

// Single-shooting workspace for one lmpc_step call. The prediction model is
// linear once an input is frozen, so one RK4 step is the degree-4 polynomial
// R(M) z with M = dt (Lambda + u B); gradients use exact derivatives of that
// polynomial, all as matrix-vector products.
struct ShootingProblem {
  const Eigen::MatrixXd& Lambda;
  const Eigen::MatrixXd& B;
  Eigen::MatrixXd Lambda_t;
  Eigen::MatrixXd B_t;
  const Clf& clf;
  const LmpcConfig& cfg;
  Eigen::VectorXd z0;
  bool safe_mode = false;
  double h0 = 0.0;    // explicit control at z0
  double lgv0 = 0.0;  // L_B V(z0)

  ShootingProblem(const KoopmanBilinearModel& model, const Clf& clf_in, const LmpcConfig& cfg_in,
                  Eigen::VectorXd z)
      : Lambda(model.spectrum.Lambda),
        B(model.B.at(0)),
        Lambda_t(Lambda.transpose()),
        B_t(B.transpose()),
        clf(clf_in),
        cfg(cfg_in),
        z0(std::move(z)) {}

  Eigen::VectorXd apply_m(double u, const Eigen::VectorXd& v) const {
    return cfg.dt * (Lambda * v + u * (B * v));
  }
  Eigen::VectorXd apply_mt(double u, const Eigen::VectorXd& v) const {
    return cfg.dt * (Lambda_t * v + u * (B_t * v));
  }

  // z' = R(M) z, identical to classical RK4 on the frozen-input linear flow.
  Eigen::VectorXd step(double u, const Eigen::VectorXd& z) const {
    const Eigen::VectorXd p1 = apply_m(u, z);
    const Eigen::VectorXd p2 = apply_m(u, p1);
    const Eigen::VectorXd p3 = apply_m(u, p2);
    const Eigen::VectorXd p4 = apply_m(u, p3);
    return z + p1 + 0.5 * p2 + p3 / 6.0 + p4 / 24.0;
  }

  void rollout(const Eigen::VectorXd& u, std::vector<Eigen::VectorXd>& states) const {
    states.resize(cfg.N_p + 1);
    states[0] = z0;
    for (int i = 0; i < cfg.N_p; ++i) states[i + 1] = step(u[i], states[i]);
  }

  double stage_cost(const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& u) const {
    double j = 0.0;
    for (int i = 0; i < cfg.N_p; ++i) {
      j += (states[i].dot(cfg.W * states[i]) + cfg.R * u[i] * u[i]) * cfg.dt;
    }
    return j;
  }

  // Active Lyapunov-constraint violation for the given rollout.
  double constraint_residual(const std::vector<Eigen::VectorXd>& states,
                             const Eigen::VectorXd& u) const {
    if (safe_mode) {
      double worst = 0.0;
      for (int i = 1; i <= cfg.N_p; ++i) {
        worst = std::max(worst, eval_V(clf, states[i]) - clf.r_hat);
      }
      return std::max(worst, 0.0);
    }
    return std::max(0.0, (u[0] - h0) * lgv0);
  }

  double penalized(const std::vector<Eigen::VectorXd>& states, const Eigen::VectorXd& u,
                   double* cost_out = nullptr) const {
    const double j = stage_cost(states, u);
    if (cost_out) *cost_out = j;
    double pen = 0.0;
    const double mu = cfg.solver.penalty_weight;
    if (safe_mode) {
      for (int i = 1; i <= cfg.N_p; ++i) {
        const double v = std::max(0.0, eval_V(clf, states[i]) - clf.r_hat);
        pen += mu * v * v;
      }
    } else {
      const double v = std::max(0.0, (u[0] - h0) * lgv0);
      pen += mu * v * v;
    }
    return j + pen;
  }

  // d(step)/du applied to z: derivative of R(M(u)) z with D = dM/du = dt B.
  Eigen::VectorXd step_input_derivative(double u, const Eigen::VectorXd& z) const {
    const Eigen::VectorXd p1 = apply_m(u, z);
    const Eigen::VectorXd p2 = apply_m(u, p1);
    const Eigen::VectorXd p3 = apply_m(u, p2);
    const Eigen::VectorXd q0 = cfg.dt * (B * z);
    const Eigen::VectorXd q1 = cfg.dt * (B * p1);
    const Eigen::VectorXd q2 = cfg.dt * (B * p2);
    const Eigen::VectorXd q3 = cfg.dt * (B * p3);
    const Eigen::VectorXd t2 = q1 + apply_m(u, q0);
    const Eigen::VectorXd t3 = q2 + apply_m(u, t2);
    const Eigen::VectorXd t4 = q3 + apply_m(u, t3);
    return q0 + 0.5 * t2 + t3 / 6.0 + t4 / 24.0;
  }

  // R(M)^T lambda by Horner in M^T.
  Eigen::VectorXd step_state_adjoint(double u, const Eigen::VectorXd& lambda) const {
    Eigen::VectorXd t = lambda / 24.0;
    t = apply_mt(u, t) + lambda / 6.0;
    t = apply_mt(u, t) + lambda / 2.0;
    t = apply_mt(u, t) + lambda;
    t = apply_mt(u, t) + lambda;
    return t;
  }

  Eigen::VectorXd gradient(const std::vector<Eigen::VectorXd>& states,
                           const Eigen::VectorXd& u) const {
    const double mu = cfg.solver.penalty_weight;
    Eigen::VectorXd grad(cfg.N_p);
    Eigen::VectorXd adj = Eigen::VectorXd::Zero(z0.size());
    for (int i = cfg.N_p; i >= 0; --i) {
      if (i >= 1 && safe_mode) {
        const double v = std::max(0.0, eval_V(clf, states[i]) - clf.r_hat);
        if (v > 0.0) adj += 4.0 * mu * v * (clf.P * states[i]);
      }
      if (i == 0) break;
      grad[i - 1] = 2.0 * cfg.R * u[i - 1] * cfg.dt +
                    adj.dot(step_input_derivative(u[i - 1], states[i - 1]));
      adj = step_state_adjoint(u[i - 1], adj) + 2.0 * cfg.dt * (cfg.W * states[i - 1]);
    }
    if (!safe_mode) {
      const double v = std::max(0.0, (u[0] - h0) * lgv0);
      if (v > 0.0) grad[0] += 2.0 * mu * v * lgv0;
    }
    return grad;
  }
};

}  // namespace

ControlDecision lmpc_step(const KoopmanBilinearModel& model, const Clf& clf,
                          const LmpcConfig& config, const Eigen::VectorXd& z_k) {
  config.validate(model.lifted_dim());
  if (model.input_dim() != 1) {
    throw ValidationError("lmpc_step: shipped controller is single-input");
  }
  if (!clf.radii_set()) throw ValidationError("lmpc_step: CLF level-set radii are not set");
  if (z_k.size() != model.lifted_dim()) throw ValidationError("lmpc_step: lifted state dimension mismatch");

  const double v0 = eval_V(clf, z_k);
  if (v0 > clf.r * (1.0 + 1e-9)) {
    throw OutsideStabilityRegionError("lmpc_step: V(z_k) = " + std::to_string(v0) +
                                      " exceeds the stability region r = " + std::to_string(clf.r));
  }

  ShootingProblem prob(model, clf, config, z_k);
  prob.safe_mode = v0 <= clf.r_hat;
  prob.h0 = explicit_control(model, clf, config, z_k);
  prob.lgv0 = eval_LBV(clf, model.B.at(0), z_k);

  // Feasible initial guess: roll the explicit controller forward.
  Eigen::VectorXd u = Eigen::VectorXd::Zero(config.N_p);
  std::vector<Eigen::VectorXd> states(config.N_p + 1);
  states[0] = z_k;
  for (int i = 0; i < config.N_p; ++i) {
    u[i] = explicit_control(model, clf, config, states[i]);
    states[i + 1] = prob.step(u[i], states[i]);
  }
  if (!states[config.N_p].allFinite()) {
    throw NumericalError("lmpc_step: non-finite prediction in the explicit-controller rollout");
  }

  const Eigen::VectorXd u_guess = u;
  const double guess_cost = prob.stage_cost(states, u);
  const double guess_residual = prob.constraint_residual(states, u);

  // Projected gradient with backtracking on the penalized objective.
  double f_current = prob.penalized(states, u);
  std::vector<Eigen::VectorXd> trial_states;
  for (int iter = 0; iter < config.solver.max_outer_iters; ++iter) {
    const Eigen::VectorXd grad = prob.gradient(states, u);
    const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    double alpha = config.solver.step_size / scale;
    bool accepted = false;
    for (int bt = 0; bt < 8; ++bt) {
      Eigen::VectorXd u_trial = u - alpha * grad;
      for (int i = 0; i < config.N_p; ++i) u_trial[i] = clamp(u_trial[i], config.u_min, config.u_max);
      prob.rollout(u_trial, trial_states);
      if (trial_states[config.N_p].allFinite()) {
        const double f_trial = prob.penalized(trial_states, u_trial);
        if (f_trial < f_current - 1e-14) {
          u = std::move(u_trial);
          states.swap(trial_states);
          f_current = f_trial;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }

  double cost = 0.0;
  prob.penalized(states, u, &cost);
  double residual = prob.constraint_residual(states, u);

  bool usable = residual <= kFeasibilityTol && cost <= guess_cost;

  if (!usable && config.solver.grid_fallback_points > 0) {
    // Last resort before falling back to the guess: scan the first input on a
    // grid, keeping the guess tail.
    const int points = config.solver.grid_fallback_points;
    for (int g = 0; g < points; ++g) {
      Eigen::VectorXd u_trial = u_guess;
      u_trial[0] = config.u_min + (config.u_max - config.u_min) * g / (points - 1);
      prob.rollout(u_trial, trial_states);
      const double res_trial = prob.constraint_residual(trial_states, u_trial);
      const double cost_trial = prob.stage_cost(trial_states, u_trial);
      if (res_trial <= kFeasibilityTol && cost_trial < (usable ? cost : guess_cost)) {
        u = u_trial;
        states = trial_states;
        cost = cost_trial;
        residual = res_trial;
        usable = true;
      }
    }
  }

  ControlDecision decision;
  if (usable) {
    decision.u_sequence = u;
    decision.cost = cost;
    decision.constraint_residual = residual;
    decision.mode = prob.safe_mode ? LmpcMode::SafeRegion : LmpcMode::Contraction;
  } else {
    decision.u_sequence = u_guess;
    decision.cost = guess_cost;
    decision.constraint_residual = guess_residual;
    decision.mode = LmpcMode::ExplicitFallback;
  }
  decision.guess_cost = guess_cost;
  decision.applied_u = decision.u_sequence[0];
  return decision;
}

}  // namespace klmpc
