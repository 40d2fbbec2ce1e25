#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "klmpc/dictionary.hpp"
#include "klmpc/edmd.hpp"

namespace klmpc {

struct BilinearFitReport {
  std::vector<double> b_residual_rms;  // per input channel
  std::vector<double> b_residual_max;  // per input channel, worst sample
  Eigen::VectorXd c_residual_per_coordinate;  // max abs reconstruction error
  double c_residual_max = 0.0;
  KoopmanFitReport koopman;

  nlohmann::json to_json() const;
  static BilinearFitReport from_json(const nlohmann::json& j);
};

/// The identified surrogate zdot = Lambda z + sum_i u_i B_i z with linear
/// inverse map x ~ C z. This is the contract between the identification CLI
/// stage and the control stage; it serializes to a single JSON document.
/// Immutable after assembly.
struct KoopmanBilinearModel {
  KoopmanSpectrum spectrum;
  Dictionary dict;
  std::vector<Eigen::MatrixXd> B;
  Eigen::MatrixXd C;  // n x N
  std::vector<std::array<double, 2>> input_bounds;
  BilinearFitReport fit_report;

  int lifted_dim() const { return spectrum.size(); }
  int state_dim() const { return static_cast<int>(C.rows()); }
  int input_dim() const { return static_cast<int>(B.size()); }

  /// z = Psi(x).
  Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Lambda z + sum_i u_i B_i z.
  Eigen::VectorXd field(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

  nlohmann::json to_json() const;
  static KoopmanBilinearModel from_json(const nlohmann::json& j);
};

/// Least-squares realization of L_{G_i} Psi = B_i Psi over the sample cloud:
/// B_i minimizes sum_k || B_i Psi(x_k) - realify(E^T Jphi(x_k) G_i(x_k)) ||^2,
/// with the same realification applied to both sides. Residuals (rms and
/// worst sample) are written to the optional outputs; the fit never hides a
/// poor span match behind a failure.
Eigen::MatrixXd fit_control_matrix(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                   const std::vector<Eigen::VectorXd>& states,
                                   const std::vector<Eigen::VectorXd>& g_values,
                                   double* residual_rms = nullptr,
                                   double* residual_max = nullptr);

/// C minimizing sum_k || x_k - C Psi(x_k) ||^2.
Eigen::MatrixXd fit_inverse_map(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                const std::vector<Eigen::VectorXd>& states,
                                Eigen::VectorXd* residual_per_coordinate = nullptr);

KoopmanBilinearModel assemble_model(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                    std::vector<Eigen::MatrixXd> B, Eigen::MatrixXd C,
                                    std::vector<std::array<double, 2>> input_bounds,
                                    BilinearFitReport fit_report = {});

}  // namespace klmpc
