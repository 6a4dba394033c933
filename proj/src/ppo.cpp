#include "mlsh/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlsh {

void PpoConfig::validate() const {
  require(discount > 0.0 && discount <= 1.0, "PpoConfig: discount in (0,1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "PpoConfig: lambda in [0,1]");
  require(clip_ratio > 0.0, "PpoConfig: clip ratio must be positive");
  require(epochs >= 1 && minibatch_size >= 1, "PpoConfig: epochs/minibatch >= 1");
  require(learning_rate > 0.0, "PpoConfig: learning rate must be positive");
}

void RolloutBatch::push(Vec o, int action, double logprob, double reward,
                        double value, bool done) {
  obs.push_back(std::move(o));
  actions.push_back(action);
  logprobs.push_back(logprob);
  rewards.push_back(reward);
  values.push_back(value);
  dones.push_back(done ? 1 : 0);
  truncs.push_back(0);
  trunc_values.push_back(0.0);
  finalized = false;
}

void RolloutBatch::mark_trunc(double bootstrap_value) {
  require(!truncs.empty(), "mark_trunc: empty batch");
  truncs.back() = 1;
  trunc_values.back() = bootstrap_value;
}

void RolloutBatch::check_consistent() const {
  const size_t n = actions.size();
  require(obs.size() == n && logprobs.size() == n && rewards.size() == n &&
              values.size() == n && dones.size() == n && truncs.size() == n &&
              trunc_values.size() == n,
          "RolloutBatch: field lengths differ");
}

void compute_gae(RolloutBatch& batch, double discount, double lambda,
                 double bootstrap_value) {
  batch.check_consistent();
  const int n = static_cast<int>(batch.size());
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  double carry = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double next_value;
    double next_adv;
    if (batch.dones[t]) {
      next_value = 0.0;
      next_adv = 0.0;
    } else if (batch.truncs[t]) {
      next_value = batch.trunc_values[t];
      next_adv = 0.0;
    } else {
      next_value = (t == n - 1) ? bootstrap_value : batch.values[t + 1];
      next_adv = carry;
    }
    double delta = batch.rewards[t] + discount * next_value - batch.values[t];
    carry = delta + discount * lambda * next_adv;
    batch.advantages[t] = carry;
    batch.returns[t] = carry + batch.values[t];
  }
  batch.finalized = true;
}

void normalize_advantages(RolloutBatch& batch) {
  require(batch.finalized, "normalize_advantages: batch not finalized");
  const int n = static_cast<int>(batch.size());
  if (n == 0) return;
  double mean = std::accumulate(batch.advantages.begin(),
                                batch.advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  double sd = std::sqrt(var / n);
  double denom = std::max(sd, 1e-8);
  for (double& a : batch.advantages) a = (a - mean) / denom;
}

LossParts ppo_loss(const NetParams& net, const RolloutBatch& batch,
                   const std::vector<int>& idx, const PpoConfig& cfg,
                   GradVector* grad) {
  require(batch.finalized, "ppo_loss: batch not finalized");
  require(!idx.empty(), "ppo_loss: empty minibatch");
  const int act = net.action_count();
  const double inv_m = 1.0 / static_cast<double>(idx.size());
  LossParts parts;

  if (grad && grad->sum.size() == 0) *grad = GradVector(net.param_count());

  for (int i : idx) {
    ForwardTrace trace = forward_trace(net, batch.obs[i]);
    Vec logp = log_softmax(trace.logits);
    Eigen::ArrayXd p = logp.array().exp();
    const double new_lp = logp[batch.actions[i]];
    const double ratio = std::exp(new_lp - batch.logprobs[i]);
    const double adv = batch.advantages[i];
    const double clipped =
        std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double surr1 = ratio * adv;
    const double surr2 = clipped * adv;
    const double verr = trace.value - batch.returns[i];
    const double ent = -(p * logp.array()).sum();

    parts.policy += -std::min(surr1, surr2) * inv_m;
    parts.value += verr * verr * inv_m;
    parts.entropy += ent * inv_m;

    if (grad) {
      Vec dlogits = Vec::Zero(act);
      if (surr1 <= surr2) {
        // min picks the unclipped branch; otherwise the clip zeroes d/dratio
        Vec dsoft = -p.matrix();
        dsoft[batch.actions[i]] += 1.0;
        dlogits += (-adv * ratio) * dsoft;
      }
      dlogits += cfg.entropy_coef * (p * (logp.array() + ent)).matrix();
      const double dvalue = cfg.value_coef * 2.0 * verr;
      backward_accum(net, batch.obs[i], trace, dlogits, dvalue, grad->sum);
      grad->count += 1;
    }
  }
  parts.total = parts.policy + cfg.value_coef * parts.value -
                cfg.entropy_coef * parts.entropy;
  return parts;
}

void PpoStats::add(const LossParts& p) {
  loss += p.total;
  policy_loss += p.policy;
  value_loss += p.value;
  entropy += p.entropy;
  minibatches += 1;
}

void PpoStats::merge(const PpoStats& o) {
  loss += o.loss;
  policy_loss += o.policy_loss;
  value_loss += o.value_loss;
  entropy += o.entropy;
  minibatches += o.minibatches;
}

void PpoStats::finish() {
  if (minibatches == 0) return;
  loss /= minibatches;
  policy_loss /= minibatches;
  value_loss /= minibatches;
  entropy /= minibatches;
}

void clip_grad_norm(Vec& grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double n = grad.norm();
  if (n > max_norm) grad *= max_norm / n;
}

namespace {

std::vector<std::vector<int>> minibatch_chunks(std::vector<int>& idx, Rng& rng,
                                               int minibatch_size) {
  rng.shuffle(idx);
  std::vector<std::vector<int>> chunks;
  for (size_t s = 0; s < idx.size(); s += minibatch_size) {
    size_t e = std::min(idx.size(), s + minibatch_size);
    chunks.emplace_back(idx.begin() + s, idx.begin() + e);
  }
  return chunks;
}

}  // namespace

PpoStats ppo_update(NetParams& net, AdamState& adam, RolloutBatch& batch,
                    const PpoConfig& cfg, Rng& shuffle_rng) {
  std::vector<RolloutBatch*> one{&batch};
  std::vector<Rng*> rngs{&shuffle_rng};
  return ppo_update_group(net, adam, one, cfg, rngs);
}

PpoStats ppo_update_group(NetParams& net, AdamState& adam,
                          const std::vector<RolloutBatch*>& batches,
                          const PpoConfig& cfg, const std::vector<Rng*>& rngs) {
  cfg.validate();
  require(!batches.empty() && batches.size() == rngs.size(),
          "ppo_update_group: batches/rngs mismatch");
  const size_t w = batches.size();
  for (auto* b : batches) {
    require(b->finalized, "ppo_update_group: batch not finalized");
    normalize_advantages(*b);
  }
  std::vector<std::vector<int>> base(w);
  for (size_t i = 0; i < w; ++i) {
    base[i].resize(batches[i]->size());
    std::iota(base[i].begin(), base[i].end(), 0);
  }

  PpoStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<std::vector<int>>> chunks(w);
    size_t rounds = 0;
    for (size_t i = 0; i < w; ++i) {
      chunks[i] = minibatch_chunks(base[i], *rngs[i], cfg.minibatch_size);
      rounds = std::max(rounds, chunks[i].size());
    }
    for (size_t r = 0; r < rounds; ++r) {
      Vec acc;
      int contributors = 0;
      for (size_t i = 0; i < w; ++i) {
        if (r >= chunks[i].size()) continue;
        GradVector g;
        LossParts parts = ppo_loss(net, *batches[i], chunks[i][r], cfg, &g);
        if (!std::isfinite(parts.total))
          throw NumericsError("ppo_update: non-finite loss in minibatch " +
                              std::to_string(r) + " of worker " +
                              std::to_string(i));
        stats.add(parts);
        Vec gm = g.mean();
        clip_grad_norm(gm, cfg.max_grad_norm);
        if (acc.size() == 0) acc = Vec::Zero(gm.size());
        acc += gm;
        ++contributors;
      }
      acc /= static_cast<double>(contributors);
      adam_step(net, acc, adam, cfg.learning_rate);
    }
  }
  stats.finish();
  return stats;
}

std::vector<GradVector> ppo_epoch_gradients(const NetParams& net,
                                            RolloutBatch& batch,
                                            const PpoConfig& cfg, Rng& rng,
                                            PpoStats* stats) {
  cfg.validate();
  std::vector<GradVector> out(cfg.epochs);
  if (batch.size() == 0) return out;
  require(batch.finalized, "ppo_epoch_gradients: batch not finalized");
  normalize_advantages(batch);
  std::vector<int> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);

  PpoStats local;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& chunk : minibatch_chunks(idx, rng, cfg.minibatch_size)) {
      GradVector g;
      LossParts parts = ppo_loss(net, batch, chunk, cfg, &g);
      if (!std::isfinite(parts.total))
        throw NumericsError("ppo_epoch_gradients: non-finite loss");
      local.add(parts);
      Vec gm = g.mean();
      clip_grad_norm(gm, cfg.max_grad_norm);
      out[epoch].accumulate(gm, 1);
    }
  }
  if (stats) stats->merge(local);  // raw sums; caller calls finish() once
  return out;
}

}  // namespace mlsh
