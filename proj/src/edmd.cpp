#include "klmpc/edmd.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "klmpc/errors.hpp"
#include "klmpc/jsonio.hpp"

namespace klmpc {

double default_ridge(const Eigen::MatrixXd& phi_xx) {
  if (phi_xx.rows() == 0) return 0.0;
  return 1e-10 * phi_xx.diagonal().mean();
}

Eigen::MatrixXd fit_koopman_matrix(const SnapshotSet& data, const Dictionary& dict,
                                   double ridge, KoopmanFitReport* report) {
  if (data.count() < 1) throw ValidationError("fit_koopman_matrix: need at least one snapshot pair");
  if (data.n() != dict.n_states()) {
    throw ValidationError("fit_koopman_matrix: snapshot dimension does not match dictionary");
  }
  if (ridge < 0.0) throw ValidationError("fit_koopman_matrix: ridge must be non-negative");

  const int N = dict.size();
  const int count = data.count();
  Eigen::MatrixXd phi_x(N, count);
  Eigen::MatrixXd phi_y(N, count);
  for (int k = 0; k < count; ++k) {
    phi_x.col(k) = dict.evaluate(data.X.col(k));
    phi_y.col(k) = dict.evaluate(data.Y.col(k));
  }

  const Eigen::MatrixXd phi_xx = phi_x * phi_x.transpose();
  const Eigen::MatrixXd phi_xy = phi_y * phi_x.transpose();

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi_xx);
  const int rank = static_cast<int>(cod.rank());

  Eigen::MatrixXd K;
  if (ridge > 0.0) {
    Eigen::MatrixXd reg = phi_xx;
    reg.diagonal().array() += ridge;
    K = reg.ldlt().solve(phi_xy.transpose()).transpose();
  } else {
    K = phi_xy * cod.pseudoInverse();
  }

  if (report) {
    report->residual = (phi_y - K * phi_x).norm();
    report->ridge = ridge;
    report->rank = rank;
    report->rank_deficient = rank < N;
  }
  return K;
}

namespace {

constexpr double kEigenvalueFloor = 1e-12;

double pairing_tol(const std::complex<double>& lam) {
  return 1e-8 * std::max(1.0, std::abs(lam));
}

// One spectral slot before layout: a real eigenvalue or a conjugate pair
// represented by its positive-imaginary member.
struct SpectralGroup {
  bool is_pair = false;
  std::complex<double> discrete;
  std::complex<double> continuous;
  Eigen::VectorXcd eigenvector;
};

// Unit norm, then rotate the largest-magnitude entry to be real-positive so
// eigenfunction scaling is deterministic (the math leaves it free).
Eigen::VectorXcd canonicalize_eigenvector(Eigen::VectorXcd e) {
  e.normalize();
  int imax = 0;
  double best = -1.0;
  for (int i = 0; i < e.size(); ++i) {
    const double mag = std::abs(e[i]);
    if (mag > best) {
      best = mag;
      imax = i;
    }
  }
  const std::complex<double> pivot = e[imax];
  if (std::abs(pivot) > 0.0) e *= std::conj(pivot) / std::abs(pivot);
  return e;
}

}  // namespace

KoopmanSpectrum decompose_and_realify(const Eigen::MatrixXd& K, double dt) {
  if (K.rows() != K.cols()) throw ValidationError("decompose_and_realify: K must be square");
  if (!(dt > 0.0)) throw ValidationError("decompose_and_realify: dt must be positive");
  const int N = static_cast<int>(K.rows());

  // Eigenvectors of K^T: with phi(y) ~ K phi(x), psi = phi^T e propagates by
  // its eigenvalue only when K^T e = lambda e.
  Eigen::EigenSolver<Eigen::MatrixXd> solver(K.transpose());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("decompose_and_realify: eigendecomposition did not converge");
  }
  const Eigen::VectorXcd lam = solver.eigenvalues();
  const Eigen::MatrixXcd vecs = solver.eigenvectors();

  for (int j = 0; j < N; ++j) {
    if (std::abs(lam[j]) <= kEigenvalueFloor) {
      throw NumericalError(
          "decompose_and_realify: |eigenvalue| below floor, continuous generator undefined "
          "(discrete eigenvalue magnitude " +
          std::to_string(std::abs(lam[j])) + ")");
    }
  }

  std::vector<bool> used(N, false);
  std::vector<SpectralGroup> groups;

  auto is_real = [](const std::complex<double>& v) {
    return std::abs(v - std::conj(v)) <= pairing_tol(v);
  };

  // Real eigenvalues first. Positive ones become real slots. Negative ones
  // have log with imaginary part pi/dt, which is only representable when a
  // matching partner exists to absorb the rotation into a 2x2 block.
  for (int j = 0; j < N; ++j) {
    if (used[j] || !is_real(lam[j])) continue;
    if (lam[j].real() > 0.0) {
      used[j] = true;
      SpectralGroup g;
      g.is_pair = false;
      g.discrete = {lam[j].real(), 0.0};
      g.continuous = {std::log(lam[j].real()) / dt, 0.0};
      g.eigenvector = vecs.col(j);
      groups.push_back(std::move(g));
    } else {
      int partner = -1;
      for (int k = j + 1; k < N; ++k) {
        if (used[k] || !is_real(lam[k]) || lam[k].real() > 0.0) continue;
        if (std::abs(lam[j] - std::conj(lam[k])) <= pairing_tol(lam[j])) {
          partner = k;
          break;
        }
      }
      if (partner < 0) {
        throw NumericalError(
            "decompose_and_realify: negative real eigenvalue " +
            std::to_string(lam[j].real()) +
            " has no equal partner; its continuous log (imaginary part pi/dt) cannot be "
            "realified");
      }
      used[j] = used[partner] = true;
      SpectralGroup g;
      g.is_pair = true;
      const double value = 0.5 * (lam[j].real() + lam[partner].real());
      g.discrete = {value, 0.0};
      g.continuous = std::log(std::complex<double>(value, 0.0)) / dt;  // Im = pi/dt
      g.eigenvector =
          (vecs.col(j) + std::complex<double>(0.0, 1.0) * vecs.col(partner)).eval();
      groups.push_back(std::move(g));
    }
  }

  // Complex eigenvalues: match each positive-imaginary one with its conjugate.
  for (int j = 0; j < N; ++j) {
    if (used[j] || lam[j].imag() <= 0.0) continue;
    int partner = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < N; ++k) {
      if (used[k] || k == j || lam[k].imag() >= 0.0) continue;
      const double gap = std::abs(lam[j] - std::conj(lam[k]));
      if (gap < best) {
        best = gap;
        partner = k;
      }
    }
    if (partner < 0 || best > pairing_tol(lam[j])) {
      throw NumericalError("decompose_and_realify: complex eigenvalue without conjugate partner "
                           "within tolerance (conjugacy violation)");
    }
    used[j] = used[partner] = true;
    SpectralGroup g;
    g.is_pair = true;
    g.discrete = 0.5 * (lam[j] + std::conj(lam[partner]));
    g.continuous = std::log(g.discrete) / dt;
    g.eigenvector = vecs.col(j);
    groups.push_back(std::move(g));
  }

  for (int j = 0; j < N; ++j) {
    if (!used[j]) {
      throw NumericalError("decompose_and_realify: complex eigenvalue without conjugate partner "
                           "within tolerance (conjugacy violation)");
    }
  }

  std::stable_sort(groups.begin(), groups.end(), [](const SpectralGroup& a, const SpectralGroup& b) {
    if (a.continuous.real() != b.continuous.real()) return a.continuous.real() > b.continuous.real();
    return a.continuous.imag() > b.continuous.imag();
  });

  KoopmanSpectrum spectrum;
  spectrum.K = K;
  spectrum.dt = dt;
  spectrum.discrete_eigenvalues.resize(N);
  spectrum.continuous_eigenvalues.resize(N);
  spectrum.E.resize(N, N);
  spectrum.Lambda = Eigen::MatrixXd::Zero(N, N);
  spectrum.lift_matrix.resize(N, N);

  int idx = 0;
  for (auto& g : groups) {
    Eigen::VectorXcd e = canonicalize_eigenvector(std::move(g.eigenvector));
    if (!g.is_pair) {
      // The eigenvector of a simple real eigenvalue is real after rotation;
      // drop the numerical imaginary dust so the lift is exactly real.
      Eigen::VectorXd re = e.real();
      re.normalize();
      e = re.cast<std::complex<double>>();

      spectrum.blocks.push_back({RealBlock::Kind::Real, idx});
      spectrum.discrete_eigenvalues[idx] = g.discrete;
      spectrum.continuous_eigenvalues[idx] = g.continuous;
      spectrum.E.col(idx) = e;
      spectrum.Lambda(idx, idx) = g.continuous.real();
      spectrum.lift_matrix.row(idx) = re.transpose();
      idx += 1;
    } else {
      spectrum.blocks.push_back({RealBlock::Kind::Pair, idx});
      spectrum.discrete_eigenvalues[idx] = g.discrete;
      spectrum.discrete_eigenvalues[idx + 1] = std::conj(g.discrete);
      spectrum.continuous_eigenvalues[idx] = g.continuous;
      spectrum.continuous_eigenvalues[idx + 1] = std::conj(g.continuous);
      spectrum.E.col(idx) = e;
      spectrum.E.col(idx + 1) = e.conjugate();
      // |lambda| [[cos, sin], [-sin, cos]] written via Re/Im, which is the
      // same block without a polar round trip.
      const double re_l = g.continuous.real();
      const double im_l = g.continuous.imag();
      spectrum.Lambda(idx, idx) = re_l;
      spectrum.Lambda(idx, idx + 1) = im_l;
      spectrum.Lambda(idx + 1, idx) = -im_l;
      spectrum.Lambda(idx + 1, idx + 1) = re_l;
      spectrum.lift_matrix.row(idx) = 2.0 * e.real().transpose();
      spectrum.lift_matrix.row(idx + 1) = -2.0 * e.imag().transpose();
      idx += 2;
    }
  }
  return spectrum;
}

Eigen::VectorXd eval_eigenfunctions(const KoopmanSpectrum& spectrum, const Dictionary& dict,
                                    const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (dict.size() != spectrum.size()) {
    throw ValidationError("eval_eigenfunctions: dictionary size does not match spectrum");
  }
  return spectrum.lift_matrix * dict.evaluate(x);
}

nlohmann::json KoopmanSpectrum::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"kind", b.kind == RealBlock::Kind::Real ? "real" : "pair"},
                           {"index", b.index}});
  }
  return {{"K", matrix_to_json(K)},
          {"dt", dt},
          {"discrete_eigenvalues", cvector_to_json(discrete_eigenvalues)},
          {"continuous_eigenvalues", cvector_to_json(continuous_eigenvalues)},
          {"E", cmatrix_to_json(E)},
          {"realifier", blocks_json},
          {"Lambda", matrix_to_json(Lambda)},
          {"lift_matrix", matrix_to_json(lift_matrix)}};
}

KoopmanSpectrum KoopmanSpectrum::from_json(const nlohmann::json& j) {
  KoopmanSpectrum s;
  s.K = matrix_from_json(j.at("K"));
  s.dt = j.at("dt").get<double>();
  s.discrete_eigenvalues = cvector_from_json(j.at("discrete_eigenvalues"));
  s.continuous_eigenvalues = cvector_from_json(j.at("continuous_eigenvalues"));
  s.E = cmatrix_from_json(j.at("E"));
  s.Lambda = matrix_from_json(j.at("Lambda"));
  s.lift_matrix = matrix_from_json(j.at("lift_matrix"));
  for (const auto& b : j.at("realifier")) {
    const std::string kind = b.at("kind").get<std::string>();
    s.blocks.push_back({kind == "real" ? RealBlock::Kind::Real : RealBlock::Kind::Pair,
                        b.at("index").get<int>()});
  }
  const int N = s.size();
  if (s.Lambda.rows() != N || s.E.rows() != N || s.lift_matrix.rows() != N ||
      s.discrete_eigenvalues.size() != N || s.continuous_eigenvalues.size() != N) {
    throw ValidationError("KoopmanSpectrum: inconsistent dimensions in JSON");
  }
  return s;
}

}  // namespace klmpc
