#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "klmpc/dictionary.hpp"
#include "klmpc/snapshots.hpp"

namespace klmpc {

/// One realified slot of the spectrum: either a single real eigenvalue at
/// lifted index `index`, or a conjugate pair occupying (index, index + 1)
/// with the positive-imaginary member stored first.
struct RealBlock {
  enum class Kind { Real, Pair };
  Kind kind;
  int index;
};

struct KoopmanFitReport {
  double residual = 0.0;  // Frobenius norm of phi(Y) - K phi(X)
  double ridge = 0.0;
  int rank = 0;
  bool rank_deficient = false;
};

/// Spectrum of the fitted Koopman matrix after realification.
///
/// Conventions, fixed once so that every downstream artifact is reproducible:
///  - e_j are eigenvectors of K^T, so psi_j(x) = phi(x)^T e_j propagates as
///    psi_j(flow_dt(x)) ~ lambda_j psi_j(x) on the training data;
///  - continuous eigenvalues are log(lambda)/dt on the principal branch;
///  - slots are sorted by descending real part of the continuous eigenvalue,
///    ties by descending imaginary part; conjugate pairs are adjacent with
///    the positive-imaginary member first;
///  - each eigenvector has unit 2-norm and its largest-magnitude entry
///    rotated real-positive.
///
/// The real lifted coordinates are z = Psi(x) = lift_matrix * phi(x): a real
/// slot contributes psi_j itself, a pair contributes (2 Re psi_j, -2 Im psi_j).
/// Immutable after construction.
struct KoopmanSpectrum {
  Eigen::MatrixXd K;
  double dt = 0.0;
  Eigen::VectorXcd discrete_eigenvalues;
  Eigen::VectorXcd continuous_eigenvalues;
  Eigen::MatrixXcd E;  // columns e_j, pair slot j+1 holds conj(e_j)
  std::vector<RealBlock> blocks;
  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd lift_matrix;

  int size() const { return static_cast<int>(K.rows()); }

  nlohmann::json to_json() const;
  static KoopmanSpectrum from_json(const nlohmann::json& j);
};

/// Default Tikhonov weight used by the pipeline: 1e-10 times the mean
/// diagonal of phi_XX, zero for an empty dictionary.
double default_ridge(const Eigen::MatrixXd& phi_xx);

/// Least-squares fit of phi(y_k) ~ K phi(x_k) over all snapshot pairs.
/// ridge = 0 uses the pseudoinverse of phi_XX (the analytic solution of the
/// unregularized problem); the report flags rank deficiency instead of
/// failing because a deficient fit restricted to the data span is still
/// usable.
Eigen::MatrixXd fit_koopman_matrix(const SnapshotSet& data, const Dictionary& dict,
                                   double ridge, KoopmanFitReport* report = nullptr);

/// Eigendecomposition of K plus conversion to continuous time and
/// realification of the conjugate structure. Eigenvalue magnitudes below
/// 1e-12 are rejected (the continuous-time generator is undefined there), as
/// are complex eigenvalues without a conjugate partner within tolerance. A
/// negative-real discrete eigenvalue is accepted only when a second equal one
/// exists; the two then form a degenerate pair with imaginary part pi/dt.
KoopmanSpectrum decompose_and_realify(const Eigen::MatrixXd& K, double dt);

/// z = Psi(x), the realified eigenfunction coordinates at x.
Eigen::VectorXd eval_eigenfunctions(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                    const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace klmpc
