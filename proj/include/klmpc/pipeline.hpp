#pragma once

#include <string>

#include "klmpc/config.hpp"

namespace klmpc {

/// Pipeline stages. Each stage reads only the documented artifacts of the
/// previous stages plus the config, and writes its own artifacts into
/// `out_dir`; with fixed seeds a rerun of any stage reproduces its outputs
/// bit for bit.
///
/// Artifacts: snapshots.csv -> model.json -> clf.json -> traj_*.csv ->
/// report.json.

void stage_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_identify(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_synthesize_clf(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_simulate(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_report(const ExperimentConfig& cfg, const std::string& out_dir);

/// All stages in order.
void run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace klmpc
