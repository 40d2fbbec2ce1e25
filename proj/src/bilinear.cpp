#include "klmpc/bilinear.hpp"

#include <cmath>

#include "klmpc/errors.hpp"
#include "klmpc/jsonio.hpp"

namespace klmpc {

namespace {

// Stacks Psi(x_k) as columns and rejects rank-deficient regressors: with
// fewer than N independent lifted samples the coefficient matching of the
// Lie-derivative fit is underdetermined.
Eigen::MatrixXd lifted_regressor(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                 const std::vector<Eigen::VectorXd>& states,
                                 const char* caller) {
  const int N = spectrum.size();
  if (dict.size() != N) {
    throw ValidationError(std::string(caller) + ": dictionary size does not match spectrum");
  }
  const int count = static_cast<int>(states.size());
  Eigen::MatrixXd Z(N, count);
  for (int k = 0; k < count; ++k) {
    Z.col(k) = spectrum.lift_matrix * dict.evaluate(states[k]);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z.transpose());
  if (qr.rank() < N) {
    throw NumericalError(std::string(caller) + ": lifted sample matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(N) +
                         "); need more samples in general position");
  }
  return Z;
}

// Solves min_M || M Z - R ||_F given full-rank Z (N x K).
Eigen::MatrixXd solve_rows(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd gram = Z * Z.transpose();
  return gram.ldlt().solve(Z * R.transpose()).transpose();
}

}  // namespace

Eigen::MatrixXd fit_control_matrix(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                   const std::vector<Eigen::VectorXd>& states,
                                   const std::vector<Eigen::VectorXd>& g_values,
                                   double* residual_rms, double* residual_max) {
  if (states.size() != g_values.size()) {
    throw ValidationError("fit_control_matrix: states and g_values must align");
  }
  const Eigen::MatrixXd Z = lifted_regressor(spectrum, dict, states, "fit_control_matrix");
  const int count = static_cast<int>(states.size());
  const int N = spectrum.size();

  // Right-hand side: realified E^T Jphi(x) G(x). Since Jphi(x) G(x) is real,
  // realify(E^T v) is exactly lift_matrix * v.
  Eigen::MatrixXd rhs(N, count);
  for (int k = 0; k < count; ++k) {
    rhs.col(k) = spectrum.lift_matrix * (dict.jacobian(states[k]) * g_values[k]);
  }

  const Eigen::MatrixXd B = solve_rows(Z, rhs);

  const Eigen::MatrixXd err = B * Z - rhs;
  if (residual_rms) *residual_rms = std::sqrt(err.squaredNorm() / count);
  if (residual_max) {
    double worst = 0.0;
    for (int k = 0; k < count; ++k) worst = std::max(worst, err.col(k).norm());
    *residual_max = worst;
  }
  return B;
}

Eigen::MatrixXd fit_inverse_map(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                const std::vector<Eigen::VectorXd>& states,
                                Eigen::VectorXd* residual_per_coordinate) {
  const Eigen::MatrixXd Z = lifted_regressor(spectrum, dict, states, "fit_inverse_map");
  const int count = static_cast<int>(states.size());
  const int n = dict.n_states();

  Eigen::MatrixXd Xs(n, count);
  for (int k = 0; k < count; ++k) Xs.col(k) = states[k];

  const Eigen::MatrixXd C = solve_rows(Z, Xs);

  if (residual_per_coordinate) {
    *residual_per_coordinate = (Xs - C * Z).cwiseAbs().rowwise().maxCoeff();
  }
  return C;
}

Eigen::VectorXd KoopmanBilinearModel::lift(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return eval_eigenfunctions(spectrum, dict, x);
}

Eigen::VectorXd KoopmanBilinearModel::field(const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& u) const {
  if (z.size() != lifted_dim()) throw ValidationError("model field: lifted state dimension mismatch");
  if (u.size() != input_dim()) throw ValidationError("model field: input dimension mismatch");
  Eigen::VectorXd dz = spectrum.Lambda * z;
  for (int i = 0; i < input_dim(); ++i) dz += u[i] * (B[i] * z);
  return dz;
}

KoopmanBilinearModel assemble_model(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                    std::vector<Eigen::MatrixXd> B, Eigen::MatrixXd C,
                                    std::vector<std::array<double, 2>> input_bounds,
                                    BilinearFitReport fit_report) {
  const int N = spectrum.size();
  if (dict.size() != N) throw ValidationError("assemble_model: dictionary size does not match spectrum");
  for (const auto& Bi : B) {
    if (Bi.rows() != N || Bi.cols() != N) {
      throw ValidationError("assemble_model: control matrix must be " + std::to_string(N) + "x" +
                            std::to_string(N));
    }
  }
  if (C.rows() != dict.n_states() || C.cols() != N) {
    throw ValidationError("assemble_model: inverse map must be n x N");
  }
  if (input_bounds.size() != B.size()) {
    throw ValidationError("assemble_model: one input bound pair required per control matrix");
  }
  for (const auto& b : input_bounds) {
    if (b[0] > b[1]) {
      throw ValidationError("assemble_model: input bounds must satisfy u_min <= u_max");
    }
  }
  KoopmanBilinearModel model{spectrum, dict, std::move(B), std::move(C), std::move(input_bounds),
                             std::move(fit_report)};
  return model;
}

nlohmann::json BilinearFitReport::to_json() const {
  return {{"b_residual_rms", b_residual_rms},
          {"b_residual_max", b_residual_max},
          {"c_residual_per_coordinate", vector_to_json(c_residual_per_coordinate)},
          {"c_residual_max", c_residual_max},
          {"koopman",
           {{"residual", koopman.residual},
            {"ridge", koopman.ridge},
            {"rank", koopman.rank},
            {"rank_deficient", koopman.rank_deficient}}}};
}

BilinearFitReport BilinearFitReport::from_json(const nlohmann::json& j) {
  BilinearFitReport r;
  r.b_residual_rms = j.at("b_residual_rms").get<std::vector<double>>();
  r.b_residual_max = j.at("b_residual_max").get<std::vector<double>>();
  r.c_residual_per_coordinate = vector_from_json(j.at("c_residual_per_coordinate"));
  r.c_residual_max = j.at("c_residual_max").get<double>();
  const auto& k = j.at("koopman");
  r.koopman.residual = k.at("residual").get<double>();
  r.koopman.ridge = k.at("ridge").get<double>();
  r.koopman.rank = k.at("rank").get<int>();
  r.koopman.rank_deficient = k.at("rank_deficient").get<bool>();
  return r;
}

nlohmann::json KoopmanBilinearModel::to_json() const {
  nlohmann::json b_json = nlohmann::json::array();
  for (const auto& Bi : B) b_json.push_back(matrix_to_json(Bi));
  nlohmann::json bounds_json = nlohmann::json::array();
  for (const auto& b : input_bounds) bounds_json.push_back({b[0], b[1]});
  return {{"dictionary", dict.to_json()},
          {"spectrum", spectrum.to_json()},
          {"B", b_json},
          {"C", matrix_to_json(C)},
          {"input_bounds", bounds_json},
          {"fit_report", fit_report.to_json()}};
}

KoopmanBilinearModel KoopmanBilinearModel::from_json(const nlohmann::json& j) {
  KoopmanSpectrum spectrum = KoopmanSpectrum::from_json(j.at("spectrum"));
  Dictionary dict = Dictionary::from_json(j.at("dictionary"));
  std::vector<Eigen::MatrixXd> B;
  for (const auto& b : j.at("B")) B.push_back(matrix_from_json(b));
  Eigen::MatrixXd C = matrix_from_json(j.at("C"));
  std::vector<std::array<double, 2>> bounds;
  for (const auto& b : j.at("input_bounds")) {
    bounds.push_back({b[0].get<double>(), b[1].get<double>()});
  }
  return assemble_model(spectrum, dict, std::move(B), std::move(C), std::move(bounds),
                        BilinearFitReport::from_json(j.at("fit_report")));
}

}  // namespace klmpc
