#include "klmpc/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "klmpc/errors.hpp"
#include "klmpc/rng.hpp"

namespace klmpc {

ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "open_loop") return ControllerKind::OpenLoop;
  if (s == "sontag") return ControllerKind::Sontag;
  if (s == "gain") return ControllerKind::Gain;
  if (s == "lmpc") return ControllerKind::Lmpc;
  throw ValidationError("unknown controller kind '" + s + "'");
}

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::OpenLoop: return "open_loop";
    case ControllerKind::Sontag: return "sontag";
    case ControllerKind::Gain: return "gain";
    case ControllerKind::Lmpc: return "lmpc";
  }
  return "?";
}

Trajectory run_closed_loop(const Plant& plant, const KoopmanBilinearModel& model,
                           const Clf* clf, const LmpcConfig& config, ControllerKind kind,
                           const Eigen::VectorXd& x0, const SimOptions& options) {
  if (!x0.allFinite()) throw ValidationError("run_closed_loop: x0 must be finite");
  if (x0.size() != plant.n) throw ValidationError("run_closed_loop: x0 dimension mismatch");
  if (plant.n != model.state_dim() || plant.m != model.input_dim()) {
    throw ValidationError("run_closed_loop: plant and model dimensions disagree");
  }
  const bool closed = kind != ControllerKind::OpenLoop;
  if (closed && clf == nullptr) {
    throw ValidationError("run_closed_loop: closed-loop kinds require a CLF");
  }
  if (closed && !clf->radii_set()) {
    throw ValidationError("run_closed_loop: CLF radii not estimated");
  }
  if (!(options.horizon > 0.0)) throw ValidationError("run_closed_loop: horizon must be positive");

  const double hold_dt = config.dt;
  const int n_holds = static_cast<int>(std::llround(options.horizon / hold_dt));
  const int sub = options.substeps_per_hold;
  const double sub_h = hold_dt / sub;
  const int total = n_holds * sub + 1;
  const int n = plant.n;
  const int N = model.lifted_dim();

  Eigen::VectorXd z0 = model.lift(x0);
  if (closed) {
    const double v0 = eval_V(*clf, z0);
    if (v0 > clf->r * (1.0 + 1e-9)) {
      throw OutsideStabilityRegionError(
          "run_closed_loop: Psi(x0) outside the stability region (V = " + std::to_string(v0) +
          " > r = " + std::to_string(clf->r) + ")");
    }
  }

  Trajectory traj;
  traj.substeps_per_hold = sub;
  traj.times.resize(total);
  traj.states.resize(n, total);
  traj.lifted.resize(N, total);
  traj.predicted_lifted.resize(N, total);
  traj.predicted.resize(n, total);
  traj.inputs.resize(total);
  traj.V.resize(total);
  traj.mode.assign(total, -1);

  const VectorField plant_field = [&plant](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return plant.field(x, u);
  };

  Eigen::VectorXd x = x0;
  Eigen::VectorXd z_model = z0;  // open-loop model propagation for x_hat

  auto record = [&](int idx, double t, double u_value, int mode_value) {
    traj.times[idx] = t;
    traj.states.col(idx) = x;
    traj.lifted.col(idx) = model.lift(x);
    traj.predicted_lifted.col(idx) = z_model;
    traj.predicted.col(idx) = model.C * z_model;
    traj.inputs[idx] = u_value;
    traj.V[idx] = clf ? eval_V(*clf, traj.lifted.col(idx)) : std::numeric_limits<double>::quiet_NaN();
    traj.mode[idx] = mode_value;
  };

  double u_current = 0.0;
  record(0, 0.0, 0.0, -1);

  for (int k = 0; k < n_holds; ++k) {
    const Eigen::VectorXd z_k = traj.lifted.col(k * sub);  // measurement re-lift
    int mode_value = -1;

    switch (kind) {
      case ControllerKind::OpenLoop:
        u_current = 0.0;
        break;
      case ControllerKind::Sontag:
        u_current = sontag_control(*clf, model.spectrum.Lambda, model.B.at(0), z_k,
                                   config.u_min, config.u_max);
        break;
      case ControllerKind::Gain:
        u_current = gain_control(*clf, model.B.at(0), z_k, config.gain_k, config.u_min,
                                 config.u_max);
        break;
      case ControllerKind::Lmpc: {
        if (eval_V(*clf, z_k) > clf->r * (1.0 + 1e-9)) {
          // Lift left the certified region mid-run: flag it and fall back to
          // the bounded explicit controller rather than aborting the run.
          traj.left_region = true;
          u_current = explicit_control(model, *clf, config, z_k);
        } else {
          ControlDecision decision = lmpc_step(model, *clf, config, z_k);
          u_current = decision.applied_u;
          mode_value = static_cast<int>(decision.mode);
          traj.decisions.push_back(std::move(decision));
        }
        break;
      }
    }

    const Eigen::VectorXd u_vec = Eigen::VectorXd::Constant(1, u_current);
    traj.inputs[k * sub] = u_current;
    traj.mode[k * sub] = mode_value;

    for (int s = 0; s < sub; ++s) {
      const int idx = k * sub + s + 1;
      try {
        x = rk4_step(plant_field, x, u_vec, sub_h);
      } catch (const NumericalError&) {
        throw NumericalError("run_closed_loop: non-finite state at t = " +
                             std::to_string(traj.times[idx - 1]));
      }
      z_model = rk4_bilinear_step(model.spectrum.Lambda, model.B.at(0), z_model, u_current, sub_h);
      if (options.box_escape_error && x.cwiseAbs().maxCoeff() > options.sim_box) {
        throw NumericalError("run_closed_loop: state escaped the simulation box [-" +
                             std::to_string(options.sim_box) + ", " + std::to_string(options.sim_box) +
                             "]^n at t = " + std::to_string(idx * sub_h));
      }
      record(idx, (k * sub + s + 1) * sub_h, u_current, mode_value);
    }
  }
  return traj;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  const int n = static_cast<int>(traj.states.rows());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= n; ++i) out << ",xhat_" << i;
  out << ",u,V,mode\n";
  for (int idx = 0; idx < traj.length(); ++idx) {
    out << format_double(traj.times[idx]);
    for (int i = 0; i < n; ++i) out << "," << format_double(traj.states(i, idx));
    for (int i = 0; i < n; ++i) out << "," << format_double(traj.predicted(i, idx));
    out << "," << format_double(traj.inputs[idx]) << "," << format_double(traj.V[idx]) << ","
        << traj.mode[idx] << "\n";
  }
}

int count_lyapunov_violations(const Trajectory& traj, double r_hat) {
  int violations = 0;
  for (int k = 0; k + 1 <= traj.holds(); ++k) {
    const double v_now = traj.hold_V(k);
    const double v_next = traj.hold_V(k + 1);
    if (v_now > r_hat && !(v_next < v_now)) ++violations;
  }
  return violations;
}

ErrorBoundReport check_error_bound(const Plant& plant, const KoopmanBilinearModel& model,
                                   const std::vector<Trajectory>& trajectories, double t_max,
                                   std::uint64_t seed) {
  if (trajectories.empty()) throw ValidationError("check_error_bound: empty evaluation set");

  ErrorBoundReport report;
  double nu = 0.0;
  double l_x = 0.0;

  // nu: worst gap between the true field and the model-implied field along
  // the predicted paths, f_hat = C (Lambda z + u B z).
  for (const auto& traj : trajectories) {
    for (int idx = 0; idx < traj.length(); ++idx) {
      if (traj.times[idx] > t_max) break;
      const Eigen::VectorXd x_hat = traj.predicted.col(idx);
      const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, traj.inputs[idx]);
      const Eigen::VectorXd f_true = plant.field(x_hat, u);
      const Eigen::VectorXd f_model =
          model.C * model.field(traj.predicted_lifted.col(idx), u);
      nu = std::max(nu, (f_true - f_model).norm());

      // Difference quotient over the pair actually entering the bound.
      const Eigen::VectorXd x = traj.states.col(idx);
      const double gap = (x - x_hat).norm();
      if (gap > 1e-12) {
        l_x = std::max(l_x, (plant.field(x, u) - f_true).norm() / gap);
      }
    }
  }

  // Random pairs in the box tighten the Lipschitz estimate beyond the
  // realized trajectories.
  Rng rng(seed);
  for (int s = 0; s < 2000; ++s) {
    const Eigen::VectorXd a = rng.in_box(plant.n, 2.5);
    const Eigen::VectorXd b = rng.in_box(plant.n, 2.5);
    const double gap = (a - b).norm();
    if (gap < 1e-9) continue;
    Eigen::VectorXd u = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
    l_x = std::max(l_x, (plant.field(a, u) - plant.field(b, u)).norm() / gap);
  }

  report.nu = nu;
  report.l_x = l_x;

  // Compare curves on the first trajectory's grid (all runs share it).
  const Trajectory& ref = trajectories.front();
  bool ok = true;
  for (int idx = 0; idx < ref.length(); ++idx) {
    const double t = ref.times[idx];
    if (t > t_max) break;
    double measured = 0.0;
    for (const auto& traj : trajectories) {
      if (idx >= traj.length()) continue;
      measured = std::max(measured,
                          (traj.states.col(idx) - traj.predicted.col(idx)).norm());
    }
    const double bound = l_x > 0.0 ? (nu / l_x) * (std::exp(l_x * t) - 1.0) : nu * t;
    report.times.push_back(t);
    report.measured.push_back(measured);
    report.bound.push_back(bound);
    if (measured > bound + 1e-12) ok = false;
  }
  report.satisfied = ok;
  return report;
}

nlohmann::json ErrorBoundReport::to_json() const {
  return {{"nu", nu},
          {"l_x", l_x},
          {"times", times},
          {"bound", bound},
          {"measured", measured},
          {"satisfied", satisfied}};
}

}  // namespace klmpc
