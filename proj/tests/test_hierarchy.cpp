#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mlsh/hierarchy.hpp"

using namespace mlsh;

namespace {

SubPolicySet random_subs(int k, int obs_dim, int actions, Rng& rng,
                         int hidden = 8) {
  SubPolicySet subs;
  for (int i = 0; i < k; ++i)
    subs.nets.push_back(init_net(obs_dim, actions, rng, hidden));
  return subs;
}

MasterPolicy random_master(int obs_dim, int k, Rng& rng, int hidden = 8) {
  return init_net(obs_dim, k, rng, hidden);
}

}  // namespace

TEST_CASE("a single sub-policy degenerates to a flat agent") {
  Rng rng(1);
  SubPolicySet subs = random_subs(1, 6, 5, rng);
  MasterPolicy master = random_master(6, 1, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 200, 10, rng);
  for (const PrimStep& s : traj.steps) CHECK(s.k == 0);
}

TEST_CASE("period 1 re-decides every step") {
  Rng rng(2);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 100, 1, rng);
  CHECK(traj.macros.size() == 100);
  for (const PrimStep& s : traj.steps) CHECK(s.decision == 1);
}

TEST_CASE("a 50-step episode with period 10 has exactly 5 decisions") {
  Rng rng(3);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 50, 10, rng);
  CHECK(traj.macros.size() == 5);
  CHECK(traj.steps.back().done == 1);
}

TEST_CASE("rollout collects exactly D steps with dones at episode ends") {
  Rng rng(4);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 100, 10, rng);
  CHECK(traj.n() == 100);
  CHECK(traj.steps[49].done == 1);
  CHECK(traj.steps[99].done == 1);
  for (int t = 0; t < 100; ++t)
    if (t != 49 && t != 99) CHECK(traj.steps[t].done == 0);
}

TEST_CASE("act contract: cached index must exist mid-segment") {
  Rng rng(5);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  Vec obs = Vec::Zero(6);
  CHECK_THROWS_AS(act(master, subs, obs, 3, std::nullopt, rng), ContractError);
  ActResult r = act(master, subs, obs, 0, std::nullopt, rng);
  CHECK(r.decided);
  ActResult r2 = act(master, subs, obs, 1, r.k, rng);
  CHECK(!r2.decided);
  CHECK(r2.k == r.k);
}

TEST_CASE("every aligned segment has a constant sub-policy index") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    int period = 1 + rng.randint(12);
    SubPolicySet subs = random_subs(1 + rng.randint(3), 6, 5, rng);
    MasterPolicy master = random_master(6, subs.count(), rng);
    MovingBandits env;
    Trajectory traj =
        rollout(env, env.sample_task(rng), master, subs, 150, period, rng);
    // oracle scan: k may change only at recorded decision points
    for (int t = 1; t < traj.n(); ++t)
      if (!traj.steps[t].decision)
        CHECK(traj.steps[t].k == traj.steps[t - 1].k);
    // and decisions happen exactly at episode-step multiples of the period
    int ep_step = 0;
    for (int t = 0; t < traj.n(); ++t) {
      CHECK(traj.steps[t].decision == (ep_step % period == 0 ? 1 : 0));
      ep_step = traj.steps[t].done ? 0 : ep_step + 1;
    }
  }
}

TEST_CASE("macro rewards are the exact segment sums") {
  Rng rng(7);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 50, 10, rng);
  // constant-reward arithmetic case: fabricate rewards 1 everywhere
  for (PrimStep& s : traj.steps) s.reward = 1.0;
  RolloutBatch batch = master_view(traj, 10);
  CHECK(batch.size() == 5);
  for (size_t i = 0; i < batch.size(); ++i) CHECK(batch.rewards[i] == 10.0);
}

TEST_CASE("period 1 macro batch mirrors the primitive steps") {
  Rng rng(8);
  SubPolicySet subs = random_subs(3, 6, 5, rng);
  MasterPolicy master = random_master(6, 3, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 80, 1, rng);
  RolloutBatch batch = master_view(traj, 1);
  CHECK(batch.size() == 80);
  for (int t = 0; t < 80; ++t) {
    CHECK(batch.actions[t] == traj.steps[t].k);
    CHECK(batch.rewards[t] == traj.steps[t].reward);
    CHECK(batch.dones[t] == traj.steps[t].done);
  }
}

TEST_CASE("random macro rewards equal a brute-force re-sum") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    int period = 1 + rng.randint(10);
    SubPolicySet subs = random_subs(2, 6, 5, rng);
    MasterPolicy master = random_master(6, 2, rng);
    MovingBandits env;
    Trajectory traj =
        rollout(env, env.sample_task(rng), master, subs, 120, period, rng);
    for (PrimStep& s : traj.steps) s.reward = rng.uniform(-1, 1);
    auto macros = macro_transitions(traj, period);
    for (const MacroTransition& m : macros) {
      double sum = 0;
      for (int t = m.start_t; t < m.start_t + m.len; ++t)
        sum += traj.steps[t].reward;
      CHECK(m.reward_sum == sum);  // identical summation order: exact
    }
    // aggregation invariant: macro rewards re-sum to the trajectory total
    double macro_total = 0, prim_total = 0;
    for (const MacroTransition& m : macros) macro_total += m.reward_sum;
    for (const PrimStep& s : traj.steps) prim_total += s.reward;
    CHECK(macro_total == doctest::Approx(prim_total).epsilon(1e-12));
  }
}

TEST_CASE("sub view routes everything to the only active sub-policy") {
  Rng rng(10);
  SubPolicySet subs = random_subs(3, 6, 5, rng);
  // master that always picks index 0: huge bias on logit 0
  MasterPolicy master(6, 3, 8);
  master.b_pi()[0] = 50.0;
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 100, 10, rng);
  auto batches = sub_view(traj, subs);
  CHECK(batches[0].size() == 100);
  CHECK(batches[1].size() == 0);
  CHECK(batches[2].size() == 0);
}

TEST_CASE("sub view is a disjoint order-preserving partition") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    int period = 1 + rng.randint(10);
    int k = 1 + rng.randint(4);
    SubPolicySet subs = random_subs(k, 6, 5, rng);
    MasterPolicy master = random_master(6, k, rng);
    MovingBandits env;
    Trajectory traj =
        rollout(env, env.sample_task(rng), master, subs, 130, period, rng);
    auto batches = sub_view(traj, subs);
    size_t total = 0;
    for (const auto& b : batches) total += b.size();
    CHECK(total == 130);  // exhaustive
    // disjoint + order preserving: per-k step streams must match a scan
    std::vector<size_t> cursor(k, 0);
    for (int t = 0; t < traj.n(); ++t) {
      const PrimStep& s = traj.steps[t];
      const RolloutBatch& b = batches[s.k];
      size_t i = cursor[s.k]++;
      REQUIRE(i < b.size());
      CHECK(b.actions[i] == s.action);
      CHECK(b.rewards[i] == s.reward);
      CHECK(b.logprobs[i] == s.sub_logprob);
      CHECK(b.values[i] == s.sub_value);
    }
    for (int i = 0; i < k; ++i) CHECK(cursor[i] == batches[i].size());
  }
}

TEST_CASE("sub view truncates where the active index changes") {
  Rng rng(12);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 200, 10, rng);
  auto batches = sub_view(traj, subs);
  // reconstruct expected cut points per sub-policy
  for (int t = 0; t < traj.n(); ++t) {
    const PrimStep& s = traj.steps[t];
    bool batch_end = t + 1 == traj.n();
    bool switched = !batch_end && traj.steps[t + 1].decision &&
                    traj.steps[t + 1].k != s.k;
    if (s.done) continue;
    if (batch_end || switched) {
      // the matching batch entry must be truncated with the sub-policy's own
      // value of the next observation
      const Vec& next = batch_end ? traj.final_obs : traj.obs[t + 1];
      double boot = forward(subs.nets[s.k], next).second;
      // find entry: count occurrences of k up to t
      int idx = -1;
      for (int u = 0; u <= t; ++u)
        if (traj.steps[u].k == s.k) ++idx;
      CHECK(batches[s.k].truncs[idx] == 1);
      CHECK(batches[s.k].trunc_values[idx] == boot);
    }
  }
}

TEST_CASE("alternating segments split the batch in half") {
  // Hand-build a trajectory: 40 steps, k alternates every 10 steps.
  Rng rng(13);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  Trajectory traj;
  for (int t = 0; t < 40; ++t) {
    int k = (t / 10) % 2;
    traj.obs.push_back(Vec::Constant(6, t * 0.01));
    traj.steps.push_back({0, 0.0, static_cast<uint8_t>(t == 39), k, -1.0, 0.0,
                          static_cast<uint8_t>(t % 10 == 0)});
    if (t % 10 == 0) traj.macros.push_back({t, k, -0.7, 0.0});
  }
  traj.final_obs = Vec::Zero(6);
  auto batches = sub_view(traj, subs);
  CHECK(batches[0].size() == 20);
  CHECK(batches[1].size() == 20);
}

TEST_CASE("macro count per full episode is ceil(T/N)") {
  Rng rng(14);
  MovingBandits env;  // T = 50
  for (int period : {1, 3, 7, 10, 50}) {
    SubPolicySet subs = random_subs(2, 6, 5, rng);
    MasterPolicy master = random_master(6, 2, rng);
    Trajectory traj =
        rollout(env, env.sample_task(rng), master, subs, 100, period, rng);
    auto macros = macro_transitions(traj, period);
    // count decisions in the first full episode (steps 0..49)
    int count = 0;
    for (const auto& m : macros)
      if (m.start_t < 50) ++count;
    CHECK(count == (50 + period - 1) / period);
  }
}

TEST_CASE("macro logprob and value are the master's recorded outputs") {
  Rng rng(15);
  SubPolicySet subs = random_subs(2, 6, 5, rng);
  MasterPolicy master = random_master(6, 2, rng);
  MovingBandits env;
  Trajectory traj = rollout(env, env.sample_task(rng), master, subs, 60, 10, rng);
  RolloutBatch batch = master_view(traj, 10);
  for (size_t i = 0; i < traj.macros.size(); ++i) {
    auto [logits, value] = forward(master, traj.obs[traj.macros[i].start_t]);
    CHECK(batch.values[i] == value);
    CHECK(batch.logprobs[i] ==
          doctest::Approx(log_softmax(logits)[batch.actions[i]]).epsilon(1e-12));
  }
}
