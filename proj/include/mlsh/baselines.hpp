#pragma once

#include "mlsh/trainer.hpp"

namespace mlsh {

struct FlatRolloutResult {
  RolloutBatch batch;  // finalized is up to the caller
  double mean_ep_return = 0;
  int episodes = 0;
};

/// Plain on-policy collection with a single flat policy over primitive
/// actions. The final step is marked truncated with the policy's own value
/// of the next observation unless the episode ended there.
FlatRolloutResult flat_rollout(Env& env, TaskSeed task, const NetParams& net,
                               int steps, Rng& rng);

/// One policy trained jointly across the task distribution: tasks are
/// resampled per group at the same staggered cadence as meta-training, the
/// policy is never reset, and every worker's gradients train it each
/// iteration. Returned as a one-element SubPolicySet.
RunResult run_shared(const MlshConfig& cfg, MetricsSink* sink,
                     const RunOptions& opt = {});

/// Per-task training of a flat policy (from scratch when init is null,
/// otherwise fine-tuning a copy of init) on the same iteration budget as
/// test-time adaptation. budget 0 gives a single evaluation point.
AdaptResult adapt_flat(Env& env, TaskSeed task, int budget,
                       const MlshConfig& cfg, uint64_t seed,
                       MetricsSink* sink = nullptr, int group_label = 0,
                       const NetParams* init = nullptr);

}  // namespace mlsh
