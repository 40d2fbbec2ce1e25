#include "klmpc/snapshots.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "klmpc/errors.hpp"
#include "klmpc/integrate.hpp"

namespace klmpc {

SnapshotSet generate_snapshots(const Plant& plant,
                               const std::vector<Eigen::VectorXd>& initial_conditions,
                               double dt, int steps_per_trajectory) {
  if (!(dt > 0.0)) throw ValidationError("generate_snapshots: dt must be positive");
  if (steps_per_trajectory < 1) {
    throw ValidationError("generate_snapshots: steps_per_trajectory must be >= 1");
  }

  const int n = plant.n;
  const int total = static_cast<int>(initial_conditions.size()) * steps_per_trajectory;
  SnapshotSet data;
  data.dt = dt;
  data.X.resize(n, total);
  data.Y.resize(n, total);
  data.control_samples.assign(plant.m, Eigen::MatrixXd(n, total));
  data.trajectory_ids.resize(total);
  data.times.resize(total);

  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(plant.m);
  const VectorField unforced = [&plant](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return plant.field(x, u);
  };

  int col = 0;
  for (int traj = 0; traj < static_cast<int>(initial_conditions.size()); ++traj) {
    Eigen::VectorXd x = initial_conditions[traj];
    if (x.size() != n) throw ValidationError("generate_snapshots: initial condition dimension mismatch");
    for (int k = 0; k < steps_per_trajectory; ++k, ++col) {
      Eigen::VectorXd y;
      try {
        y = rk4_step(unforced, x, u0, dt);
      } catch (const NumericalError&) {
        throw NumericalError("generate_snapshots: non-finite state on trajectory " +
                             std::to_string(traj) + " at step " + std::to_string(k));
      }
      data.X.col(col) = x;
      data.Y.col(col) = y;
      for (int i = 0; i < plant.m; ++i) data.control_samples[i].col(col) = plant.control_fields[i](x);
      data.trajectory_ids[col] = traj;
      data.times[col] = k * dt;
      x = y;
    }
  }
  return data;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_snapshots_csv(const SnapshotSet& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  const int n = data.n();
  out << "traj,t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= n; ++i) out << ",y_" << i;
  out << "\n";
  for (int k = 0; k < data.count(); ++k) {
    out << data.trajectory_ids[k] << "," << format_double(data.times[k]);
    for (int i = 0; i < n; ++i) out << "," << format_double(data.X(i, k));
    for (int i = 0; i < n; ++i) out << "," << format_double(data.Y(i, k));
    out << "\n";
  }
}

SnapshotSet read_snapshots_csv(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing artifact: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ValidationError("empty snapshot file: " + path);

  int columns = 1;
  for (char c : header) {
    if (c == ',') ++columns;
  }
  const int n = (columns - 2) / 2;
  if (n < 1 || columns != 2 + 2 * n) {
    throw ValidationError("snapshot CSV has malformed header: " + path);
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != columns) {
      throw ValidationError("snapshot CSV row has wrong column count: " + path);
    }
    ids.push_back(static_cast<int>(row[0]));
    rows.push_back(std::move(row));
  }

  SnapshotSet data;
  data.dt = dt;
  const int total = static_cast<int>(rows.size());
  data.X.resize(n, total);
  data.Y.resize(n, total);
  data.trajectory_ids = std::move(ids);
  data.times.resize(total);
  for (int k = 0; k < total; ++k) {
    data.times[k] = rows[k][1];
    for (int i = 0; i < n; ++i) {
      data.X(i, k) = rows[k][2 + i];
      data.Y(i, k) = rows[k][2 + n + i];
    }
  }
  return data;
}

}  // namespace klmpc
