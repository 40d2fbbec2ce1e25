#include "klmpc/clf.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "klmpc/errors.hpp"
#include "klmpc/integrate.hpp"
#include "klmpc/jsonio.hpp"
#include "klmpc/rng.hpp"

namespace klmpc {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

// Spectral clamp onto {P = P^T : c_low I <= P <= c_high I}.
Eigen::MatrixXd project_to_box(const Eigen::MatrixXd& P, double c_low, double c_high) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(P));
  Eigen::VectorXd d = eig.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d[i] = std::clamp(d[i], c_low, c_high);
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

double quadratic_form(const Eigen::MatrixXd& M, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return z.dot(M * z);
}

}  // namespace

Clf synthesize_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B, double gamma,
                   double c_low, double c_high, const SynthesisOptions& options) {
  if (Lambda.rows() != Lambda.cols() || B.rows() != B.cols() || Lambda.rows() != B.rows()) {
    throw ValidationError("synthesize_clf: Lambda and B must be square with equal size");
  }
  if (!(0.0 < c_low && c_low < c_high)) {
    throw ValidationError("synthesize_clf: need 0 < c_low < c_high");
  }
  if (gamma < 0.0) throw ValidationError("synthesize_clf: gamma must be >= 0");

  const int N = static_cast<int>(Lambda.rows());
  const Eigen::MatrixXd trace_grad = gamma * symmetrize(B);
  const double step0 = options.step_scale * c_high;

  Eigen::MatrixXd P = project_to_box(0.5 * (c_low + c_high) * Eigen::MatrixXd::Identity(N, N),
                                     c_low, c_high);

  Clf best;
  best.P = P;
  double best_objective = std::numeric_limits<double>::infinity();
  double best_sigma = 0.0;
  double window_start_best = best_objective;
  int iters_done = 0;
  bool converged = false;
  std::vector<double> history;

  for (int k = 1; k <= options.max_iters; ++k) {
    iters_done = k;
    const Eigen::MatrixXd M = P * Lambda + Lambda.transpose() * P;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(M));
    const Eigen::VectorXd& evals = eig.eigenvalues();
    const double lambda_max = evals[N - 1];
    const double objective = lambda_max - gamma * (P * B).trace();

    if (objective < best_objective) {
      best_objective = objective;
      best_sigma = lambda_max;
      best.P = P;
    }
    history.push_back(best_objective);

    // Stall test on the best objective over the trailing window.
    if (k % options.stall_window == 0) {
      if (window_start_best - best_objective < options.tol) {
        converged = true;
        break;
      }
      window_start_best = best_objective;
    }

    // Subgradient of lambda_max: sym(Lambda v v^T + v v^T Lambda^T) for the
    // top eigenvector v; near-ties within tie_tol average their subgradients.
    Eigen::MatrixXd vvt = Eigen::MatrixXd::Zero(N, N);
    int tied = 0;
    for (int i = N - 1; i >= 0 && lambda_max - evals[i] <= options.tie_tol; --i) {
      vvt += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
      ++tied;
    }
    vvt /= tied;
    const Eigen::MatrixXd grad = (Lambda * vvt + vvt * Lambda.transpose()) - trace_grad;

    const double step = step0 / std::sqrt(static_cast<double>(k));
    P = project_to_box(P - step * grad, c_low, c_high);
  }

  best.synthesis_report.objective = best_objective;
  best.synthesis_report.sigma = best_sigma;
  best.synthesis_report.iterations = iters_done;
  best.synthesis_report.converged = converged;
  best.synthesis_report.best_objective_history = std::move(history);
  return best;
}

StabilizabilityReport check_stabilizability(const Eigen::MatrixXd& P,
                                            const Eigen::MatrixXd& Lambda,
                                            const Eigen::MatrixXd& B, int n_samples,
                                            std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("check_stabilizability: n_samples must be >= 1");
  const int N = static_cast<int>(P.rows());
  const Eigen::MatrixXd drift_form = P * Lambda + Lambda.transpose() * P;
  const Eigen::MatrixXd control_form = P * B + B.transpose() * P;

  Rng rng(seed);
  StabilizabilityReport report;
  report.samples = n_samples;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd z = rng.unit_vector(N);
    const double drift = quadratic_form(drift_form, z);
    const double grip = std::abs(quadratic_form(control_form, z));
    if (drift >= 0.0) {
      ++report.antecedent_count;
      if (grip <= 1e-9) ++report.violations;
    }
    report.worst_margin = std::min(report.worst_margin, std::max(-drift, grip));
  }
  return report;
}

double eval_V(const Clf& clf, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != clf.size()) throw ValidationError("eval_V: dimension mismatch");
  return quadratic_form(clf.P, z);
}

double eval_LLambdaV(const Clf& clf, const Eigen::MatrixXd& Lambda,
                     const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != clf.size()) throw ValidationError("eval_LLambdaV: dimension mismatch");
  return quadratic_form(clf.P * Lambda + Lambda.transpose() * clf.P, z);
}

double eval_LBV(const Clf& clf, const Eigen::MatrixXd& B,
                const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != clf.size()) throw ValidationError("eval_LBV: dimension mismatch");
  return quadratic_form(clf.P * B + B.transpose() * clf.P, z);
}

LevelSetResult estimate_level_sets(const Clf& clf, const KoopmanBilinearModel& model,
                                   const std::function<double(const Eigen::VectorXd&)>& controller_h,
                                   double dt, const LevelSetOptions& options, std::uint64_t seed) {
  if (!(dt > 0.0)) throw ValidationError("estimate_level_sets: dt must be positive");
  if (clf.size() != model.lifted_dim()) {
    throw ValidationError("estimate_level_sets: CLF dimension does not match model");
  }
  if (options.n_levels < 2 || options.n_directions < 1) {
    throw ValidationError("estimate_level_sets: need at least 2 levels and 1 direction");
  }
  const int N = clf.size();
  const Eigen::MatrixXd& Lambda = model.spectrum.Lambda;
  const Eigen::MatrixXd& B = model.B.at(0);

  Rng rng(seed);

  // Level grid. By default the cap is anchored to the image of the lift over
  // a state-space ball, so the certified band covers the states experiments
  // actually start from; a V floor exists whenever the spectrum carries a
  // constant-like eigenfunction (Psi(0) != 0), and levels below it are
  // unreachable from lifted states.
  double level_lo, level_hi;
  if (options.explicit_range) {
    level_lo = options.explicit_range->first;
    level_hi = options.explicit_range->second;
    if (!(0.0 < level_lo && level_lo < level_hi)) {
      throw ValidationError("estimate_level_sets: bad explicit level range");
    }
  } else {
    const int n = model.state_dim();
    double v_max = 0.0;
    for (int s = 0; s < 256; ++s) {
      const Eigen::VectorXd x = rng.in_ball(n, options.state_radius);
      v_max = std::max(v_max, eval_V(clf, model.lift(x)));
    }
    const double v_floor = eval_V(clf, model.lift(Eigen::VectorXd::Zero(n)));
    if (!(v_max > 0.0)) throw NumericalError("estimate_level_sets: degenerate lift, V == 0 on samples");
    level_hi = options.headroom * v_max;
    level_lo = level_hi * std::pow(10.0, -options.span_decades);
    if (v_floor > 0.0) level_lo = std::max(level_lo, 1.05 * v_floor);
    if (level_lo >= level_hi) level_lo = level_hi * 1e-2;
  }

  LevelSetResult result;
  result.levels.resize(options.n_levels);
  const double log_lo = std::log(level_lo);
  const double log_hi = std::log(level_hi);
  for (int i = 0; i < options.n_levels; ++i) {
    const double f = static_cast<double>(i) / (options.n_levels - 1);
    result.levels[i] = std::exp(log_lo + f * (log_hi - log_lo));
  }

  // Decrease test per level: every sampled direction on the shell must give
  // Vdot under h at or below -rho V.
  result.decrease_ok.resize(options.n_levels);
  result.decrease_margin.resize(options.n_levels);
  const Eigen::MatrixXd drift_form = clf.P * Lambda + Lambda.transpose() * clf.P;
  const Eigen::MatrixXd control_form = clf.P * B + B.transpose() * clf.P;
  for (int i = 0; i < options.n_levels; ++i) {
    const double level = result.levels[i];
    double worst = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < options.n_directions; ++d) {
      const Eigen::VectorXd dir = rng.unit_vector(N);
      const double denom = dir.dot(clf.P * dir);
      const Eigen::VectorXd z = std::sqrt(level / denom) * dir;
      const double u = controller_h(z);
      const double vdot = z.dot(drift_form * z) + u * z.dot(control_form * z);
      worst = std::max(worst, vdot + options.rho * level);
    }
    result.decrease_margin[i] = worst;
    result.decrease_ok[i] = worst <= 0.0;
  }

  // r = top of the contiguous passing band that ends highest. Decrease below
  // the band is not claimed; the band is what certifies convergence into the
  // safe zone.
  int band_top = -1, band_low = -1;
  {
    int i = 0;
    while (i < options.n_levels) {
      if (!result.decrease_ok[i]) {
        ++i;
        continue;
      }
      const int start = i;
      while (i < options.n_levels && result.decrease_ok[i]) ++i;
      band_top = i - 1;  // later bands end higher; keep the last one
      band_low = start;
    }
  }
  if (band_top < 0) {
    throw NumericalError(
        "estimate_level_sets: no admissible r; the explicit controller fails the Lyapunov "
        "decrease margin at every sampled level");
  }
  if (band_top == band_low) {
    throw NumericalError(
        "estimate_level_sets: certified band contains a single sampled level; cannot place "
        "r_hat strictly below r");
  }
  result.r = result.levels[band_top];

  // Sample-and-hold excursions: integrate one hold of length dt with the
  // control frozen at its start value, from shells at every sampled level up
  // to the candidate. Record, per shell level, the worst end-of-hold V and
  // the worst mid-hold V.
  const double sub_h = dt / options.hold_substeps;
  std::vector<double> end_v_max(band_top, 0.0);
  std::vector<double> excursion_max(band_top, 0.0);
  for (int i = 0; i < band_top; ++i) {
    double worst_end = 0.0, worst_mid = 0.0;
    for (int d = 0; d < options.n_directions; ++d) {
      const Eigen::VectorXd dir = rng.unit_vector(N);
      const double denom = dir.dot(clf.P * dir);
      Eigen::VectorXd z = std::sqrt(result.levels[i] / denom) * dir;
      const double u = controller_h(z);
      double peak = eval_V(clf, z);
      for (int s = 0; s < options.hold_substeps; ++s) {
        z = rk4_bilinear_step(Lambda, B, z, u, sub_h);
        peak = std::max(peak, eval_V(clf, z));
      }
      worst_end = std::max(worst_end, eval_V(clf, z));
      worst_mid = std::max(worst_mid, peak);
    }
    end_v_max[i] = worst_end;
    excursion_max[i] = worst_mid;
  }

  // r_hat: largest sampled level below r such that holds started anywhere at
  // or below it land back inside it and never leave Omega_r on the way. As
  // dt shrinks the excursions vanish and r_hat climbs toward r.
  const double slack = 1.0 + 1e-9;
  int chosen = -1;
  for (int cand = band_top - 1; cand >= band_low; --cand) {
    bool ok = true;
    for (int i = 0; i <= cand && ok; ++i) {
      if (end_v_max[i] > result.levels[cand] * slack) ok = false;
      if (excursion_max[i] > result.r * slack) ok = false;
    }
    if (ok) {
      chosen = cand;
      break;
    }
  }
  if (chosen < 0) {
    throw NumericalError(
        "estimate_level_sets: no sample-and-hold safe level found below r; hold time too "
        "coarse for the certified band");
  }
  result.r_hat = result.levels[chosen];
  return result;
}

nlohmann::json SynthesisReport::to_json() const {
  return {{"objective", objective},
          {"sigma", sigma},
          {"iterations", iterations},
          {"converged", converged}};
}

SynthesisReport SynthesisReport::from_json(const nlohmann::json& j) {
  SynthesisReport r;
  r.objective = j.at("objective").get<double>();
  r.sigma = j.at("sigma").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

nlohmann::json Clf::to_json() const {
  return {{"P", matrix_to_json(P)},
          {"r", r},
          {"r_hat", r_hat},
          {"synthesis_report", synthesis_report.to_json()}};
}

Clf Clf::from_json(const nlohmann::json& j) {
  Clf clf;
  clf.P = matrix_from_json(j.at("P"));
  clf.r = j.at("r").get<double>();
  clf.r_hat = j.at("r_hat").get<double>();
  clf.synthesis_report = SynthesisReport::from_json(j.at("synthesis_report"));
  return clf;
}

nlohmann::json StabilizabilityReport::to_json() const {
  nlohmann::json j{{"samples", samples},
                   {"violations", violations},
                   {"antecedent_count", antecedent_count}};
  j["worst_margin"] = std::isfinite(worst_margin) ? worst_margin : -1.0;
  return j;
}

nlohmann::json LevelSetResult::to_json() const {
  return {{"r", r},
          {"r_hat", r_hat},
          {"levels", levels},
          {"decrease_ok", decrease_ok},
          {"decrease_margin", decrease_margin}};
}

}  // namespace klmpc
