#include "mlsh/baselines.hpp"

#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

namespace mlsh {

FlatRolloutResult flat_rollout(Env& env, TaskSeed task, const NetParams& net,
                               int steps, Rng& rng) {
  require(steps > 0, "flat_rollout: steps must be positive");
  FlatRolloutResult out;
  Vec obs = env.reset(task);
  double ep_acc = 0, ret_acc = 0;
  for (int t = 0; t < steps; ++t) {
    auto [logits, value] = forward(net, obs);
    auto [a, lp] = sample_categorical(logits, rng);
    StepResult sr = env.step(a);
    out.batch.push(obs, a, lp, sr.reward, value, sr.done);
    ep_acc += sr.reward;
    if (sr.done) {
      ret_acc += ep_acc;
      out.episodes += 1;
      ep_acc = 0;
      obs = env.reset(task);
    } else {
      obs = std::move(sr.obs);
    }
  }
  if (!out.batch.dones.back())
    out.batch.mark_trunc(forward(net, obs).second);
  out.mean_ep_return =
      out.episodes > 0 ? ret_acc / out.episodes : ep_acc;
  return out;
}

namespace {

void parallel_for(int n, RunnerMode mode, const std::function<void(int)>& fn) {
  if (mode == RunnerMode::Sequential || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::mutex mu;
  std::exception_ptr err;
  for (int i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

RunResult run_shared(const MlshConfig& cfg, MetricsSink* sink,
                     const RunOptions& opt) {
  cfg.validate();
  const int n_groups = cfg.groups;
  const int wpg = cfg.workers_per_group;
  const int n_workers = cfg.total_workers();
  const int cycle = cfg.warmup_iters + cfg.joint_iters;
  const EnvOptions eopt{cfg.env_exclude_holdout};

  std::unique_ptr<Env> proto = make_env(cfg.env_name, eopt);
  require(proto->spec().episode_len == cfg.episode_len,
          "config: T does not match the environment's episode length");

  Rng meta_rng(derive_seed(cfg.seed, 0));
  NetParams net =
      init_net(proto->spec().obs_dim, proto->spec().action_count, meta_rng);
  AdamState adam(net.param_count());
  PpoConfig ppo = cfg.sub_ppo;  // the persistent shared net trains at the
                                // shared-parameter learning rate

  const std::vector<int> offsets =
      schedule_offsets(n_groups, cfg.warmup_iters, cfg.joint_iters);
  std::vector<Rng> group_rng;
  std::vector<TaskSeed> tasks(n_groups);
  std::vector<int> cycle_pos(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    group_rng.emplace_back(derive_seed(cfg.seed, 1, g));
    cycle_pos[g] = offsets[g];
  }

  struct Slot {
    std::unique_ptr<Env> env;
    Rng rng_act, rng_shuffle;
    FlatRolloutResult roll;
  };
  std::vector<Slot> workers(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    workers[w].env = make_env(cfg.env_name, eopt);
    workers[w].rng_act = Rng(derive_seed(cfg.seed, 2, w));
    workers[w].rng_shuffle = Rng(derive_seed(cfg.seed, 3, w));
  }

  RunResult res;
  for (long tick = 0; tick < cfg.budget; ++tick) {
    for (int g = 0; g < n_groups; ++g)
      if (tick == 0 || cycle_pos[g] == 0)
        tasks[g] = proto->sample_task(group_rng[g]);

    parallel_for(n_workers, opt.mode, [&](int w) {
      workers[w].roll = flat_rollout(*workers[w].env, tasks[w / wpg], net,
                                     cfg.batch_steps, workers[w].rng_act);
      compute_gae(workers[w].roll.batch, ppo.discount, ppo.gae_lambda, 0.0);
    });

    std::vector<RolloutBatch*> batches;
    std::vector<Rng*> rngs;
    for (int w = 0; w < n_workers; ++w) {
      batches.push_back(&workers[w].roll.batch);
      rngs.push_back(&workers[w].rng_shuffle);
    }
    PpoStats st = ppo_update_group(net, adam, batches, ppo, rngs);

    for (int g = 0; g < n_groups; ++g) {
      MetricsRecord rec;
      rec.iter = tick;
      rec.group = g;
      rec.phase = "shared";
      rec.task_seed = tasks[g].value;
      double rp = 0;
      for (int m = 0; m < wpg; ++m) {
        rec.episodes += workers[g * wpg + m].roll.episodes;
        rp += workers[g * wpg + m].roll.mean_ep_return;
      }
      rec.ret_primitive = rp / wpg;
      rec.ret_macro = rec.ret_primitive;
      rec.master_loss = st.loss;
      rec.master_entropy = st.entropy;
      if (sink) sink->write(rec);
    }

    SubPolicySet as_set;
    as_set.nets.push_back(net);
    res.phi_trace.push_back(subpolicy_hash(as_set));
    res.ticks = tick + 1;
    for (int g = 0; g < n_groups; ++g) cycle_pos[g] = (cycle_pos[g] + 1) % cycle;
  }

  res.phi.nets.push_back(std::move(net));
  if (!opt.out_dir.empty())
    save_checkpoint(opt.out_dir + "/policy_final.ckpt", res.phi);
  return res;
}

AdaptResult adapt_flat(Env& env, TaskSeed task, int budget,
                       const MlshConfig& cfg, uint64_t seed,
                       MetricsSink* sink, int group_label,
                       const NetParams* init) {
  require(budget >= 0, "adapt_flat: negative budget");
  Rng rng_init(derive_seed(seed, 20, group_label));
  Rng rng_act(derive_seed(seed, 21, group_label));
  Rng rng_shuffle(derive_seed(seed, 22, group_label));

  AdaptResult res;
  res.theta = init ? *init
                   : init_net(env.spec().obs_dim, env.spec().action_count,
                              rng_init);
  AdamState adam(res.theta.param_count());

  const int iters = std::max(budget, 1);
  for (int it = 0; it < iters; ++it) {
    FlatRolloutResult roll =
        flat_rollout(env, task, res.theta, cfg.batch_steps, rng_act);
    compute_gae(roll.batch, cfg.master_ppo.discount,
                cfg.master_ppo.gae_lambda, 0.0);
    res.returns.push_back(roll.mean_ep_return);

    PpoStats st;
    if (budget > 0)
      st = ppo_update(res.theta, adam, roll.batch, cfg.master_ppo, rng_shuffle);

    if (sink) {
      MetricsRecord rec;
      rec.iter = it;
      rec.group = group_label;
      rec.phase = "flat";
      rec.task_seed = task.value;
      rec.episodes = roll.episodes;
      rec.ret_primitive = roll.mean_ep_return;
      rec.ret_macro = roll.mean_ep_return;
      rec.master_loss = st.loss;
      rec.master_entropy = st.entropy;
      sink->write(rec);
    }
  }
  return res;
}

}  // namespace mlsh
