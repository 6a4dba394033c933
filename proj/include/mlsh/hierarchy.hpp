#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mlsh/env.hpp"
#include "mlsh/net.hpp"
#include "mlsh/ppo.hpp"

namespace mlsh {

/// The shared low-level policies. All nets have identical shape; the set size
/// is fixed for the lifetime of a meta-training run.
struct SubPolicySet {
  std::vector<NetParams> nets;
  int count() const { return static_cast<int>(nets.size()); }
};

/// Per-task selector over the sub-policy indices; reset per task.
using MasterPolicy = NetParams;

/// Optional re-encoding of the environment observation before it reaches a
/// sub-policy (identity when empty). Used when transferring sub-policies to
/// an environment with a larger grid.
using ObsMap = std::function<Vec(const Vec&)>;

struct PrimStep {
  int action = 0;
  double reward = 0;
  uint8_t done = 0;
  int k = 0;  // active sub-policy index
  double sub_logprob = 0;
  double sub_value = 0;
  uint8_t decision = 0;  // master decided at this step
};

struct MacroRec {
  int start_t = 0;
  int k = 0;
  double logprob = 0;
  double value = 0;
};

/// One collection of experience: primitive steps annotated with the active
/// sub-policy, plus the master's decision records, plus the observation after
/// the final step for bootstrapping truncated episodes.
struct Trajectory {
  std::vector<Vec> obs;
  std::vector<PrimStep> steps;
  std::vector<MacroRec> macros;
  Vec final_obs;
  double final_master_value = 0;
  int n() const { return static_cast<int>(steps.size()); }
};

/// An N-step slice viewed as one master-level transition.
struct MacroTransition {
  Vec obs;
  int k = 0;
  double reward_sum = 0;
  uint8_t done = 0;
  double logprob = 0;
  double value = 0;
  int start_t = 0;
  int len = 0;
};

struct ActResult {
  int action = 0;
  int k = 0;
  bool decided = false;
  double master_logprob = 0, master_value = 0;
  double sub_logprob = 0, sub_value = 0;
};

/// One decision step: at step_in_segment 0 the master samples a fresh index,
/// otherwise cached_k is reused (absent cache is a contract violation); the
/// chosen sub-policy then samples the primitive action.
ActResult act(const MasterPolicy& master, const SubPolicySet& subs,
              const Vec& obs, int step_in_segment, std::optional<int> cached_k,
              Rng& rng, const ObsMap& sub_obs = {});

/// Collects exactly `steps` primitive steps with auto-resetting episodes.
/// The master decides every `period` steps of an episode, and a fresh
/// decision is forced at every episode start.
Trajectory rollout(Env& env, TaskSeed task, const MasterPolicy& master,
                   const SubPolicySet& subs, int steps, int period, Rng& rng,
                   const ObsMap& sub_obs = {});

std::vector<MacroTransition> macro_transitions(const Trajectory& traj,
                                               int period);

/// Experience from the master's viewpoint: one entry per decision, action is
/// the chosen index, reward is the exact sum of the segment's primitive
/// rewards. Not yet finalized (no advantages).
RolloutBatch master_view(const Trajectory& traj, int period);

/// Primitive steps routed to the batch of their active sub-policy, in order.
/// Where the active index changes the previous segment is marked truncated,
/// bootstrapped with that sub-policy's own value of the next observation, so
/// credit never leaks across a switch. Batches are not yet finalized.
std::vector<RolloutBatch> sub_view(const Trajectory& traj,
                                   const SubPolicySet& subs,
                                   const ObsMap& sub_obs = {});

/// Total reward of each episode completed within the trajectory.
std::vector<double> episode_returns(const Trajectory& traj);

/// Same, computed from the macro records (the two agree exactly).
std::vector<double> episode_returns_macro(const Trajectory& traj, int period);

}  // namespace mlsh
