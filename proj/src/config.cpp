#include "klmpc/config.hpp"

#include <set>

#include "klmpc/errors.hpp"
#include "klmpc/jsonio.hpp"

namespace klmpc {

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: expected an object at " + where);
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

SamplerConfig parse_sampler(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "radius", "inner_radius", "half_width"}, where);
  SamplerConfig s;
  s.kind = j.at("kind").get<std::string>();
  s.radius = get_or(j, "radius", 1.0);
  s.inner_radius = get_or(j, "inner_radius", 0.0);
  s.half_width = get_or(j, "half_width", 1.0);
  if (s.kind != "circle" && s.kind != "ball" && s.kind != "annulus" && s.kind != "box") {
    throw ValidationError("config: sampler kind must be circle|ball|annulus|box in " + where);
  }
  if ((s.kind == "circle" || s.kind == "ball" || s.kind == "annulus") && !(s.radius > 0.0)) {
    throw ValidationError("config: sampler radius must be positive in " + where);
  }
  if (s.kind == "annulus" && !(s.inner_radius >= 0.0 && s.inner_radius < s.radius)) {
    throw ValidationError("config: annulus needs 0 <= inner_radius < radius in " + where);
  }
  if (s.kind == "box" && !(s.half_width > 0.0)) {
    throw ValidationError("config: box half_width must be positive in " + where);
  }
  return s;
}

}  // namespace

Eigen::VectorXd SamplerConfig::sample(int dim, Rng& rng) const {
  if (kind == "circle") {
    // Uniform on the sphere of the given radius.
    return radius * rng.unit_vector(dim);
  }
  if (kind == "ball") return rng.in_ball(dim, radius);
  if (kind == "annulus") {
    const double lo = inner_radius, hi = radius;
    // Uniform in radius over [lo, hi]; adequate for seeding experiments.
    return rng.uniform(lo, hi) * rng.unit_vector(dim);
  }
  return rng.in_box(dim, half_width);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"plant", "data", "dictionary", "identification", "clf", "controller",
                       "simulation", "output_dir"},
                      "the top level");
  ExperimentConfig cfg;

  {
    const auto& p = j.at("plant");
    reject_unknown_keys(p, {"name"}, "plant");
    cfg.plant_name = p.at("name").get<std::string>();
  }

  {
    const auto& d = j.at("data");
    reject_unknown_keys(d, {"n_trajectories", "ic_sampler", "dt", "steps_per_trajectory", "seed"},
                        "data");
    cfg.data.n_trajectories = d.at("n_trajectories").get<int>();
    cfg.data.ic_sampler = parse_sampler(d.at("ic_sampler"), "data.ic_sampler");
    cfg.data.dt = d.at("dt").get<double>();
    cfg.data.steps_per_trajectory = d.at("steps_per_trajectory").get<int>();
    cfg.data.seed = d.at("seed").get<std::uint64_t>();
    if (cfg.data.n_trajectories < 1) throw ValidationError("config: data.n_trajectories must be >= 1");
    if (!(cfg.data.dt > 0.0)) throw ValidationError("config: data.dt must be positive");
    if (cfg.data.steps_per_trajectory < 1) {
      throw ValidationError("config: data.steps_per_trajectory must be >= 1");
    }
  }

  {
    const auto& d = j.at("dictionary");
    reject_unknown_keys(d, {"max_degree"}, "dictionary");
    cfg.dictionary_max_degree = d.at("max_degree").get<int>();
    if (cfg.dictionary_max_degree < 0) {
      throw ValidationError("config: dictionary.max_degree must be >= 0");
    }
  }

  {
    const auto& d = j.at("identification");
    reject_unknown_keys(d, {"ridge"}, "identification");
    if (d.at("ridge").is_string()) {
      if (d.at("ridge").get<std::string>() != "auto") {
        throw ValidationError("config: identification.ridge must be a number or \"auto\"");
      }
      cfg.identification.ridge = -1.0;
    } else {
      cfg.identification.ridge = d.at("ridge").get<double>();
      if (cfg.identification.ridge < 0.0) {
        throw ValidationError("config: identification.ridge must be >= 0");
      }
    }
  }

  {
    const auto& c = j.at("clf");
    reject_unknown_keys(c,
                        {"gamma", "c_low", "c_high", "solver", "level_sets", "explicit_controller",
                         "stabilizability"},
                        "clf");
    cfg.clf.gamma = c.at("gamma").get<double>();
    cfg.clf.c_low = c.at("c_low").get<double>();
    cfg.clf.c_high = c.at("c_high").get<double>();
    if (cfg.clf.gamma < 0.0) throw ValidationError("config: clf.gamma must be >= 0");
    if (!(0.0 < cfg.clf.c_low && cfg.clf.c_low < cfg.clf.c_high)) {
      throw ValidationError("config: clf needs 0 < c_low < c_high");
    }
    if (c.contains("solver")) {
      const auto& s = c.at("solver");
      reject_unknown_keys(s, {"max_iters", "tol", "step_scale", "stall_window"}, "clf.solver");
      cfg.clf.solver.max_iters = get_or(s, "max_iters", cfg.clf.solver.max_iters);
      cfg.clf.solver.tol = get_or(s, "tol", cfg.clf.solver.tol);
      cfg.clf.solver.step_scale = get_or(s, "step_scale", cfg.clf.solver.step_scale);
      cfg.clf.solver.stall_window = get_or(s, "stall_window", cfg.clf.solver.stall_window);
      if (cfg.clf.solver.max_iters < 1) throw ValidationError("config: clf.solver.max_iters must be >= 1");
    }
    if (c.contains("level_sets")) {
      const auto& s = c.at("level_sets");
      reject_unknown_keys(s,
                          {"rho", "n_levels", "n_directions", "state_radius", "headroom",
                           "span_decades", "seed"},
                          "clf.level_sets");
      cfg.clf.level_sets.rho = get_or(s, "rho", cfg.clf.level_sets.rho);
      cfg.clf.level_sets.n_levels = get_or(s, "n_levels", cfg.clf.level_sets.n_levels);
      cfg.clf.level_sets.n_directions = get_or(s, "n_directions", cfg.clf.level_sets.n_directions);
      cfg.clf.level_sets.state_radius = get_or(s, "state_radius", cfg.clf.level_sets.state_radius);
      cfg.clf.level_sets.headroom = get_or(s, "headroom", cfg.clf.level_sets.headroom);
      cfg.clf.level_sets.span_decades = get_or(s, "span_decades", cfg.clf.level_sets.span_decades);
      cfg.clf.level_seed = get_or(s, "seed", cfg.clf.level_seed);
      if (cfg.clf.level_sets.n_levels < 2 || cfg.clf.level_sets.n_directions < 1) {
        throw ValidationError("config: clf.level_sets needs n_levels >= 2 and n_directions >= 1");
      }
      if (!(cfg.clf.level_sets.rho >= 0.0)) throw ValidationError("config: clf.level_sets.rho must be >= 0");
    }
    if (c.contains("stabilizability")) {
      const auto& s = c.at("stabilizability");
      reject_unknown_keys(s, {"samples", "seed"}, "clf.stabilizability");
      cfg.clf.stabilizability_samples = get_or(s, "samples", cfg.clf.stabilizability_samples);
      cfg.clf.stabilizability_seed = get_or(s, "seed", cfg.clf.stabilizability_seed);
      if (cfg.clf.stabilizability_samples < 1) {
        throw ValidationError("config: clf.stabilizability.samples must be >= 1");
      }
    }
    {
      const auto& e = c.at("explicit_controller");
      reject_unknown_keys(e, {"kind", "k"}, "clf.explicit_controller");
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "sontag") {
        cfg.clf.explicit_kind = ExplicitKind::Sontag;
      } else if (kind == "gain") {
        cfg.clf.explicit_kind = ExplicitKind::Gain;
        cfg.clf.gain_k = e.at("k").get<double>();
        if (!(cfg.clf.gain_k > 0.0)) throw ValidationError("config: explicit_controller.k must be positive");
      } else {
        throw ValidationError("config: explicit_controller.kind must be sontag|gain");
      }
    }
  }

  {
    const auto& c = j.at("controller");
    reject_unknown_keys(c, {"kind", "N_p", "W", "R", "u_min", "u_max", "solver"}, "controller");
    cfg.controller.kind = c.at("kind").get<std::string>();
    controller_kind_from_string(cfg.controller.kind);  // validates the name
    cfg.controller.N_p = c.at("N_p").get<int>();
    if (c.contains("W")) {
      if (c.at("W").is_string()) {
        if (c.at("W").get<std::string>() != "identity") {
          throw ValidationError("config: controller.W must be \"identity\" or a positive scale");
        }
        cfg.controller.W_scale = 1.0;
      } else {
        cfg.controller.W_scale = c.at("W").get<double>();
      }
    }
    cfg.controller.R = c.at("R").get<double>();
    cfg.controller.u_min = c.at("u_min").get<double>();
    cfg.controller.u_max = c.at("u_max").get<double>();
    if (c.contains("solver")) {
      const auto& s = c.at("solver");
      reject_unknown_keys(s, {"max_outer_iters", "penalty_weight", "step_size", "grid_fallback_points"},
                          "controller.solver");
      cfg.controller.solver.max_outer_iters =
          get_or(s, "max_outer_iters", cfg.controller.solver.max_outer_iters);
      cfg.controller.solver.penalty_weight =
          get_or(s, "penalty_weight", cfg.controller.solver.penalty_weight);
      cfg.controller.solver.step_size = get_or(s, "step_size", cfg.controller.solver.step_size);
      cfg.controller.solver.grid_fallback_points =
          get_or(s, "grid_fallback_points", cfg.controller.solver.grid_fallback_points);
    }
    if (cfg.controller.N_p < 1) throw ValidationError("config: controller.N_p must be >= 1");
    if (!(cfg.controller.W_scale > 0.0)) throw ValidationError("config: controller.W must be positive");
    if (!(cfg.controller.R > 0.0)) throw ValidationError("config: controller.R must be positive");
    if (!(cfg.controller.u_min < cfg.controller.u_max)) {
      throw ValidationError("config: controller needs u_min < u_max");
    }
  }

  {
    const auto& s = j.at("simulation");
    reject_unknown_keys(s,
                        {"x0_sampler", "n_runs", "horizon", "substeps_per_hold", "seed",
                         "open_loop_runs", "error_bound_horizon", "error_bound_seed"},
                        "simulation");
    cfg.simulation.x0_sampler = parse_sampler(s.at("x0_sampler"), "simulation.x0_sampler");
    cfg.simulation.n_runs = s.at("n_runs").get<int>();
    cfg.simulation.horizon = s.at("horizon").get<double>();
    cfg.simulation.substeps_per_hold = get_or(s, "substeps_per_hold", 10);
    cfg.simulation.seed = s.at("seed").get<std::uint64_t>();
    cfg.simulation.open_loop_runs = get_or(s, "open_loop_runs", true);
    cfg.simulation.error_bound_horizon = get_or(s, "error_bound_horizon", 1.0);
    cfg.simulation.error_bound_seed = get_or(s, "error_bound_seed", cfg.simulation.error_bound_seed);
    if (cfg.simulation.n_runs < 1) throw ValidationError("config: simulation.n_runs must be >= 1");
    if (!(cfg.simulation.horizon > 0.0)) throw ValidationError("config: simulation.horizon must be positive");
    if (cfg.simulation.substeps_per_hold < 1) {
      throw ValidationError("config: simulation.substeps_per_hold must be >= 1");
    }
  }

  cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json(load_json_file(path));
}

LmpcConfig ExperimentConfig::make_lmpc_config(int lifted_dim) const {
  LmpcConfig lmpc;
  lmpc.N_p = controller.N_p;
  lmpc.dt = data.dt;
  lmpc.W = controller.W_scale * Eigen::MatrixXd::Identity(lifted_dim, lifted_dim);
  lmpc.R = controller.R;
  lmpc.u_min = controller.u_min;
  lmpc.u_max = controller.u_max;
  lmpc.explicit_kind = clf.explicit_kind;
  lmpc.gain_k = clf.gain_k;
  lmpc.solver = controller.solver;
  return lmpc;
}

}  // namespace klmpc
