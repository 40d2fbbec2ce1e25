#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "klmpc/clf.hpp"
#include "klmpc/controller.hpp"
#include "klmpc/rng.hpp"
#include "klmpc/simulator.hpp"

namespace klmpc {

/// Initial-condition sampler spec shared by the data and simulation sections.
struct SamplerConfig {
  std::string kind;  // "circle" | "ball" | "annulus" | "box"
  double radius = 1.0;
  double inner_radius = 0.0;  // annulus only
  double half_width = 1.0;    // box only

  Eigen::VectorXd sample(int dim, Rng& rng) const;
};

struct DataConfig {
  int n_trajectories = 20;
  SamplerConfig ic_sampler;
  double dt = 0.01;
  int steps_per_trajectory = 1000;
  std::uint64_t seed = 1;
};

struct IdentificationConfig {
  double ridge = -1.0;  // negative means the automatic default
};

struct ClfConfig {
  double gamma = 2.0;
  double c_low = 0.1;
  double c_high = 10.0;
  SynthesisOptions solver;
  LevelSetOptions level_sets;
  std::uint64_t level_seed = 2;
  int stabilizability_samples = 10000;
  std::uint64_t stabilizability_seed = 3;
  ExplicitKind explicit_kind = ExplicitKind::Sontag;
  double gain_k = 10.0;
};

struct ControllerConfig {
  std::string kind = "lmpc";  // controller used by closed-loop runs
  int N_p = 100;
  double W_scale = 1.0;  // W = scale * I in the lifted dimension
  double R = 1.0;
  double u_min = -10.0;
  double u_max = 10.0;
  LmpcSolverOptions solver;
};

struct SimulationConfig {
  SamplerConfig x0_sampler;
  int n_runs = 10;
  double horizon = 10.0;
  int substeps_per_hold = 10;
  std::uint64_t seed = 4;
  bool open_loop_runs = true;
  double error_bound_horizon = 1.0;
  std::uint64_t error_bound_seed = 5;
};

/// Whole-pipeline configuration; every section carries explicit seeds so any
/// stage is rerunnable bit for bit. Unknown keys anywhere are rejected.
struct ExperimentConfig {
  std::string plant_name;
  DataConfig data;
  int dictionary_max_degree = 5;
  IdentificationConfig identification;
  ClfConfig clf;
  ControllerConfig controller;
  SimulationConfig simulation;
  std::string output_dir = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);

  /// The LMPC / explicit-controller configuration for a model of dimension N.
  LmpcConfig make_lmpc_config(int lifted_dim) const;
};

}  // namespace klmpc
