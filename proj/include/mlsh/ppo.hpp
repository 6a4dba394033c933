#pragma once

#include <vector>

#include "mlsh/net.hpp"

namespace mlsh {

struct PpoConfig {
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch_size = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;

  void validate() const;
};

/// Generic on-policy experience batch. Besides terminal `dones`, a step may be
/// marked truncated: the advantage recursion is cut there and the stored
/// bootstrap value stands in for the next state's value (used when credit must
/// not leak across a sub-policy switch or a batch boundary).
struct RolloutBatch {
  std::vector<Vec> obs;
  std::vector<int> actions;
  std::vector<double> logprobs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<uint8_t> dones;
  std::vector<uint8_t> truncs;
  std::vector<double> trunc_values;

  std::vector<double> advantages;  // filled by compute_gae
  std::vector<double> returns;
  bool finalized = false;

  void push(Vec o, int action, double logprob, double reward, double value,
            bool done);
  void mark_trunc(double bootstrap_value);  // marks the last pushed step
  size_t size() const { return actions.size(); }
  void check_consistent() const;
};

/// A_t = delta_t + discount*lambda*(1-done_t)*(1-trunc_t)*A_{t+1} with
/// delta_t = r_t + discount*next_value_t - V_t, where next_value_t is 0 past a
/// terminal, the stored bootstrap past a truncation, V_{t+1} inside an
/// episode, and bootstrap_value after the final step. returns = adv + values.
void compute_gae(RolloutBatch& batch, double discount, double lambda,
                 double bootstrap_value);

/// Shift/scale advantages to mean 0, std 1 over the whole batch (population
/// std, floored at 1e-8). Idempotent.
void normalize_advantages(RolloutBatch& batch);

struct LossParts {
  double total = 0;    // policy + value_coef*value - entropy_coef*entropy
  double policy = 0;   // -mean(min(ratio*A, clip(ratio)*A))
  double value = 0;    // mean((V - R)^2)
  double entropy = 0;  // mean policy entropy
};

/// Clipped-surrogate loss over the given index set; optionally accumulates the
/// per-sample gradient sum (count = index count) into grad.
LossParts ppo_loss(const NetParams& net, const RolloutBatch& batch,
                   const std::vector<int>& idx, const PpoConfig& cfg,
                   GradVector* grad);

struct PpoStats {
  double loss = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  int minibatches = 0;

  void add(const LossParts& p);
  void merge(const PpoStats& o);
  void finish();  // divide by minibatches
};

/// In-place update: for each epoch, shuffle, iterate minibatches, clip the
/// mean gradient to max_grad_norm, apply one Adam step each.
PpoStats ppo_update(NetParams& net, AdamState& adam, RolloutBatch& batch,
                    const PpoConfig& cfg, Rng& shuffle_rng);

/// Lockstep variant over several workers' batches sharing one net: per
/// (epoch, minibatch round) the workers' clipped gradients are averaged in
/// ascending order and applied once. With a single batch this is ppo_update.
PpoStats ppo_update_group(NetParams& net, AdamState& adam,
                          const std::vector<RolloutBatch*>& batches,
                          const PpoConfig& cfg, const std::vector<Rng*>& rngs);

/// Distributed emission: the same minibatch gradients, computed at fixed
/// parameters, averaged into one GradVector per epoch instead of applied.
std::vector<GradVector> ppo_epoch_gradients(const NetParams& net,
                                            RolloutBatch& batch,
                                            const PpoConfig& cfg, Rng& rng,
                                            PpoStats* stats);

void clip_grad_norm(Vec& grad, double max_norm);

}  // namespace mlsh
