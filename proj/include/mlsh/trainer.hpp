#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mlsh/checkpoint.hpp"
#include "mlsh/hierarchy.hpp"
#include "mlsh/metrics.hpp"

namespace mlsh {

/// All scalars of the training scheme. Config-file keys use the operator
/// names K/N/T/W/U/D for the first six.
struct MlshConfig {
  int sub_count = 2;       // K: number of shared sub-policies
  int macro_period = 10;   // N: primitive steps per master action
  int episode_len = 50;    // T: env episode length (must match the env)
  int warmup_iters = 9;    // W: master-only iterations per task
  int joint_iters = 1;     // U: joint iterations per task
  int batch_steps = 2000;  // D: primitive steps collected per iteration
  int groups = 10;         // G: task groups
  int workers_per_group = 1;
  long budget = 600;       // meta-iterations (lockstep ticks)
  int plateau_window = 0;  // early stop when mean return stops improving; 0 = off
  PpoConfig master_ppo;
  PpoConfig sub_ppo;
  std::string env_name = "bandits";
  bool env_exclude_holdout = false;
  uint64_t seed = 0;

  int total_workers() const { return groups * workers_per_group; }
  void validate() const;
};

/// Phase offset of each group within the (W+U)-cycle: group g starts at
/// floor(g*(W+U)/G), so warmups are staggered and, whenever G*U >= W+U, some
/// group is contributing sub-policy gradients at every iteration.
std::vector<int> schedule_offsets(int groups, int warmup_iters, int joint_iters);

/// True when G*U < W+U, i.e. some iterations may have no contributing group.
bool schedule_has_starvation(int groups, int warmup_iters, int joint_iters);

enum class RunnerMode { Sequential, Parallel };

struct RunResult {
  SubPolicySet phi;
  std::vector<uint64_t> phi_trace;  // hash of the flat parameters per tick
  long ticks = 0;
};

struct RunOptions {
  RunnerMode mode = RunnerMode::Parallel;
  std::string out_dir;        // empty -> no checkpoints
  int checkpoint_every = 0;   // 0 -> final checkpoint only
  bool save_theta = false;
  bool dump_trajectories = false;
};

/// The full meta-training loop: per group, {fresh master, fresh task, W
/// warmup iterations, U joint iterations} repeated in lockstep ticks until
/// the budget. Sub-policy parameters persist across tasks; master gradients
/// stay within a group; sub-policy gradients from non-warmup workers are
/// averaged globally and applied at the tick barrier in ascending order, so
/// parallel and sequential runners produce bit-identical parameter traces.
RunResult run_meta(const MlshConfig& cfg, MetricsSink* sink,
                   const RunOptions& opt = {});

struct AdaptResult {
  std::vector<double> returns;  // mean episode return per iteration
  MasterPolicy theta;
};

/// Warmup-style master-only training on one task with frozen sub-policies:
/// the evaluation protocol for fine-tuning and transfer. budget 0 gives a
/// single unadapted evaluation point.
AdaptResult test_time_adapt(const SubPolicySet& phi, Env& env, TaskSeed task,
                            int budget, const MlshConfig& cfg, uint64_t seed,
                            MetricsSink* sink = nullptr, int group_label = 0,
                            const ObsMap& sub_obs = {});

uint64_t subpolicy_hash(const SubPolicySet& subs);

}  // namespace mlsh
