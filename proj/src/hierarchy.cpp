#include "mlsh/hierarchy.hpp"

namespace mlsh {

namespace {

inline Vec map_obs(const ObsMap& m, const Vec& obs) {
  return m ? m(obs) : obs;
}

}  // namespace

ActResult act(const MasterPolicy& master, const SubPolicySet& subs,
              const Vec& obs, int step_in_segment, std::optional<int> cached_k,
              Rng& rng, const ObsMap& sub_obs) {
  require(subs.count() >= 1, "act: empty sub-policy set");
  require(step_in_segment >= 0, "act: negative step_in_segment");
  ActResult r;
  if (step_in_segment == 0) {
    auto [logits, value] = forward(master, obs);
    require(logits.size() == subs.count(),
            "act: master output does not match sub-policy count");
    auto [k, lp] = sample_categorical(logits, rng);
    r.k = k;
    r.decided = true;
    r.master_logprob = lp;
    r.master_value = value;
  } else {
    require(cached_k.has_value(),
            "act: no cached sub-policy index mid-segment");
    r.k = *cached_k;
  }
  require(r.k >= 0 && r.k < subs.count(), "act: sub-policy index out of range");
  auto [slogits, svalue] = forward(subs.nets[r.k], map_obs(sub_obs, obs));
  auto [a, slp] = sample_categorical(slogits, rng);
  r.action = a;
  r.sub_logprob = slp;
  r.sub_value = svalue;
  return r;
}

Trajectory rollout(Env& env, TaskSeed task, const MasterPolicy& master,
                   const SubPolicySet& subs, int steps, int period, Rng& rng,
                   const ObsMap& sub_obs) {
  require(steps > 0, "rollout: steps must be positive");
  require(period >= 1, "rollout: period must be >= 1");
  Trajectory traj;
  traj.obs.reserve(steps);
  traj.steps.reserve(steps);

  Vec obs = env.reset(task);
  int ep_step = 0;
  std::optional<int> cached_k;

  for (int t = 0; t < steps; ++t) {
    int in_seg = ep_step % period;
    ActResult r = act(master, subs, obs, in_seg, cached_k, rng, sub_obs);
    if (r.decided) {
      traj.macros.push_back({t, r.k, r.master_logprob, r.master_value});
      cached_k = r.k;
    }
    StepResult sr = env.step(r.action);
    traj.obs.push_back(obs);
    traj.steps.push_back({r.action, sr.reward, sr.done ? uint8_t{1} : uint8_t{0},
                          r.k, r.sub_logprob, r.sub_value,
                          r.decided ? uint8_t{1} : uint8_t{0}});
    if (sr.done) {
      obs = env.reset(task);
      ep_step = 0;
      cached_k.reset();  // forces a fresh master decision
    } else {
      obs = std::move(sr.obs);
      ep_step += 1;
    }
  }
  traj.final_obs = obs;
  traj.final_master_value = forward(master, traj.final_obs).second;
  return traj;
}

std::vector<MacroTransition> macro_transitions(const Trajectory& traj,
                                               int period) {
  std::vector<MacroTransition> out;
  out.reserve(traj.macros.size());
  const int n = traj.n();
  for (size_t i = 0; i < traj.macros.size(); ++i) {
    const MacroRec& m = traj.macros[i];
    int end = (i + 1 < traj.macros.size()) ? traj.macros[i + 1].start_t : n;
    MacroTransition tr;
    tr.obs = traj.obs[m.start_t];
    tr.k = m.k;
    tr.logprob = m.logprob;
    tr.value = m.value;
    tr.start_t = m.start_t;
    tr.len = end - m.start_t;
    require(tr.len >= 1 && tr.len <= period, "macro segment length out of range");
    for (int t = m.start_t; t < end; ++t) {
      require(traj.steps[t].k == m.k, "sub-policy index changed mid-segment");
      tr.reward_sum += traj.steps[t].reward;
    }
    tr.done = traj.steps[end - 1].done;
    out.push_back(std::move(tr));
  }
  return out;
}

RolloutBatch master_view(const Trajectory& traj, int period) {
  RolloutBatch batch;
  for (MacroTransition& tr : macro_transitions(traj, period))
    batch.push(std::move(tr.obs), tr.k, tr.logprob, tr.reward_sum, tr.value,
               tr.done != 0);
  return batch;
}

std::vector<RolloutBatch> sub_view(const Trajectory& traj,
                                   const SubPolicySet& subs,
                                   const ObsMap& sub_obs) {
  std::vector<RolloutBatch> batches(subs.count());
  const int n = traj.n();
  for (int t = 0; t < n; ++t) {
    const PrimStep& s = traj.steps[t];
    RolloutBatch& b = batches[s.k];
    b.push(sub_obs ? sub_obs(traj.obs[t]) : traj.obs[t], s.action,
           s.sub_logprob, s.reward, s.sub_value, s.done != 0);
    if (s.done) continue;  // terminal already cuts the recursion
    bool batch_end = (t + 1 == n);
    bool switched =
        !batch_end && traj.steps[t + 1].decision && traj.steps[t + 1].k != s.k;
    if (batch_end || switched) {
      const Vec& next = batch_end ? traj.final_obs : traj.obs[t + 1];
      double boot = forward(subs.nets[s.k], sub_obs ? sub_obs(next) : next).second;
      b.mark_trunc(boot);
    }
  }
  return batches;
}

std::vector<double> episode_returns(const Trajectory& traj) {
  std::vector<double> out;
  double acc = 0;
  for (const PrimStep& s : traj.steps) {
    acc += s.reward;
    if (s.done) {
      out.push_back(acc);
      acc = 0;
    }
  }
  return out;
}

std::vector<double> episode_returns_macro(const Trajectory& traj, int period) {
  std::vector<double> out;
  double acc = 0;
  for (const MacroTransition& tr : macro_transitions(traj, period)) {
    acc += tr.reward_sum;
    if (tr.done) {
      out.push_back(acc);
      acc = 0;
    }
  }
  return out;
}

}  // namespace mlsh
