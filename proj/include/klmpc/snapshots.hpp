#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "klmpc/plant.hpp"

namespace klmpc {

/// Paired snapshot data (x_k, y_k) of the unforced flow: y_k is x_k advanced
/// by dt. Pairs need not be temporally ordered; trajectory ids and times are
/// carried only for the CSV format. control_samples holds G_i evaluated at
/// each x_k, one n x N_t matrix per input channel (not serialized; the
/// identification stage re-evaluates G from the plant definition).
struct SnapshotSet {
  Eigen::MatrixXd X;  // n x N_t
  Eigen::MatrixXd Y;  // n x N_t
  double dt = 0.0;
  std::vector<Eigen::MatrixXd> control_samples;
  std::vector<int> trajectory_ids;
  std::vector<double> times;

  int n() const { return static_cast<int>(X.rows()); }
  int count() const { return static_cast<int>(X.cols()); }
};

/// Rolls the unforced plant forward from each initial condition with one RK4
/// step per dt, recording (x_k, flow_dt(x_k)) pairs chained along each
/// trajectory. Throws NumericalError naming the offending trajectory if the
/// state goes non-finite.
SnapshotSet generate_snapshots(const Plant& plant,
                               const std::vector<Eigen::VectorXd>& initial_conditions,
                               double dt, int steps_per_trajectory);

void write_snapshots_csv(const SnapshotSet& data, const std::string& path);

/// Reads the CSV written above; dt is not stored in the file and must be
/// supplied by the caller (the pipeline takes it from the config).
SnapshotSet read_snapshots_csv(const std::string& path, double dt);

}  // namespace klmpc
