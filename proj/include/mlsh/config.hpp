#pragma once

#include <string>

#include <json.hpp>

#include "mlsh/trainer.hpp"

namespace mlsh {

/// Everything a run needs, loadable from one declarative JSON file. The
/// snapshot written next to a run's outputs is this same format, so any run
/// can be replayed exactly from its snapshot.
struct ExperimentConfig {
  std::string preset;            // resolved preset name, "" for custom
  std::string label;             // curve label; defaults to preset + kind
  std::string run_kind = "train";  // train | shared | scratch | finetune | adapt
  MlshConfig mlsh;               // includes the seed and env selection
  // io
  int checkpoint_every = 0;
  bool save_theta = false;
  bool dump_trajectories = false;
  std::string runner = "parallel";  // parallel | sequential
  // adaptation / per-task baselines
  int adapt_tasks = 1;
  int adapt_budget = 10;
  bool adapt_holdout = false;
  std::string checkpoint_path;

  std::string resolved_label() const;
  RunnerMode runner_mode() const;
  /// Workers whose experience advances a curve point by one batch each
  /// iteration (per-task runs have a single worker per curve).
  int curve_workers() const;
};

/// Built-in presets: bandits, fourrooms, obstacle-transfer.
ExperimentConfig preset_config(const std::string& name);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

/// key=value override; bare K/N/T/W/U/D and other training scalars address
/// the mlsh section, dotted paths (e.g. master_ppo.lr) address anything.
void apply_override(nlohmann::ordered_json& j, const std::string& kv);

void write_config_snapshot(const ExperimentConfig& cfg,
                           const std::string& out_dir);

}  // namespace mlsh
