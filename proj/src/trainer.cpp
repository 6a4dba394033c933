#include "mlsh/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace mlsh {

void MlshConfig::validate() const {
  require(sub_count >= 1, "config: K must be >= 1");
  require(macro_period >= 1, "config: N must be >= 1");
  require(episode_len >= 1, "config: T must be >= 1");
  require(warmup_iters >= 0, "config: W must be >= 0");
  require(joint_iters >= 1, "config: U must be >= 1");
  require(batch_steps >= macro_period, "config: D must be >= N");
  require(groups >= 1, "config: groups must be >= 1");
  require(workers_per_group >= 1, "config: workers_per_group must be >= 1");
  require(budget >= 0, "config: budget must be >= 0");
  master_ppo.validate();
  sub_ppo.validate();
}

std::vector<int> schedule_offsets(int groups, int warmup_iters,
                                  int joint_iters) {
  require(groups >= 1, "schedule: groups must be >= 1");
  require(warmup_iters >= 0 && joint_iters >= 1, "schedule: bad W/U");
  const long cycle = warmup_iters + joint_iters;
  std::vector<int> out(groups);
  for (int g = 0; g < groups; ++g)
    out[g] = static_cast<int>(static_cast<long>(g) * cycle / groups);
  return out;
}

bool schedule_has_starvation(int groups, int warmup_iters, int joint_iters) {
  return static_cast<long>(groups) * joint_iters <
         static_cast<long>(warmup_iters) + joint_iters;
}

uint64_t subpolicy_hash(const SubPolicySet& subs) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const NetParams& net : subs.nets)
    h = fnv1a64(net.flat().data(),
                static_cast<size_t>(net.param_count()) * sizeof(double), h);
  return h;
}

namespace {

void parallel_for(int n, RunnerMode mode, const std::function<void(int)>& fn) {
  if (mode == RunnerMode::Sequential || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(n);
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

struct WorkerSlot {
  std::unique_ptr<Env> env;
  Rng rng_act, rng_theta, rng_phi;
  Trajectory traj;
  RolloutBatch master_batch;
  std::vector<RolloutBatch> sub_batches;
  std::vector<std::vector<GradVector>> phi_epoch_grads;  // [k][epoch]
  std::vector<long long> phi_samples;
  PpoStats sub_stats;  // raw sums until finished
  double ret_prim = 0, ret_macro = 0;
  int episodes = 0;
};

struct GroupSlot {
  MasterPolicy theta;
  AdamState theta_adam;
  TaskSeed task{0};
  Rng rng;
  int cycle_pos = 0;
  bool joint = false;
  PpoStats master_stats;
};

double mean_or(const std::vector<double>& v, double fallback) {
  if (v.empty()) return fallback;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void dump_trajectory(std::ofstream& os, long tick, const Trajectory& traj) {
  for (int t = 0; t < traj.n(); ++t) {
    const PrimStep& s = traj.steps[t];
    nlohmann::ordered_json j;
    j["iter"] = tick;
    j["t"] = t;
    j["k"] = s.k;
    j["action"] = s.action;
    j["reward"] = s.reward;
    j["done"] = s.done != 0;
    j["decision"] = s.decision != 0;
    std::vector<double> o(traj.obs[t].data(),
                          traj.obs[t].data() + traj.obs[t].size());
    j["obs"] = o;
    os << j.dump() << "\n";
  }
}

}  // namespace

RunResult run_meta(const MlshConfig& cfg, MetricsSink* sink,
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
  const int obs_dim = proto->spec().obs_dim;
  const int n_actions = proto->spec().action_count;

  Rng meta_rng(derive_seed(cfg.seed, 0));
  SubPolicySet phi;
  for (int k = 0; k < cfg.sub_count; ++k)
    phi.nets.push_back(init_net(obs_dim, n_actions, meta_rng));
  std::vector<AdamState> phi_adam(cfg.sub_count,
                                  AdamState(phi.nets[0].param_count()));

  const std::vector<int> offsets =
      schedule_offsets(n_groups, cfg.warmup_iters, cfg.joint_iters);
  if (schedule_has_starvation(n_groups, cfg.warmup_iters, cfg.joint_iters))
    std::cerr << "warning: G*U < W+U, some iterations will produce no "
                 "sub-policy gradients\n";

  std::vector<GroupSlot> groups(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    groups[g].rng = Rng(derive_seed(cfg.seed, 1, g));
    groups[g].cycle_pos = offsets[g];
  }
  std::vector<WorkerSlot> workers(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    workers[w].env = make_env(cfg.env_name, eopt);
    workers[w].rng_act = Rng(derive_seed(cfg.seed, 2, w));
    workers[w].rng_theta = Rng(derive_seed(cfg.seed, 3, w));
    workers[w].rng_phi = Rng(derive_seed(cfg.seed, 4, w));
  }

  std::ofstream traj_dump;
  if (opt.dump_trajectories && !opt.out_dir.empty())
    traj_dump.open(opt.out_dir + "/trajectories.jsonl");

  RunResult res;
  SubPolicySet last_good = phi;
  double best_ret = -1e300;
  long best_tick = 0;

  for (long tick = 0; tick < cfg.budget; ++tick) {
    auto wall_start = std::chrono::steady_clock::now();
    try {
      // Barrier: task boundaries. All workers of a group share the same task
      // and the same fresh master draw.
      for (int g = 0; g < n_groups; ++g) {
        if (tick == 0 || groups[g].cycle_pos == 0) {
          groups[g].task = proto->sample_task(groups[g].rng);
          groups[g].theta = init_net(obs_dim, cfg.sub_count, groups[g].rng);
          groups[g].theta_adam = AdamState(groups[g].theta.param_count());
        }
        groups[g].joint = groups[g].cycle_pos >= cfg.warmup_iters;
      }
      int contributors = 0;
      for (const GroupSlot& g : groups)
        if (g.joint) contributors += wpg;

      // Collect experience and build both views.
      parallel_for(n_workers, opt.mode, [&](int w) {
        WorkerSlot& ws = workers[w];
        const GroupSlot& gs = groups[w / wpg];
        ws.traj = rollout(*ws.env, gs.task, gs.theta, phi, cfg.batch_steps,
                          cfg.macro_period, ws.rng_act);
        ws.master_batch = master_view(ws.traj, cfg.macro_period);
        const bool ended = ws.master_batch.dones.back() != 0;
        compute_gae(ws.master_batch, cfg.master_ppo.discount,
                    cfg.master_ppo.gae_lambda,
                    ended ? 0.0 : ws.traj.final_master_value);
        auto eps = episode_returns(ws.traj);
        double partial = 0;
        for (const PrimStep& s : ws.traj.steps) partial += s.reward;
        ws.ret_prim = mean_or(eps, partial);
        ws.ret_macro =
            mean_or(episode_returns_macro(ws.traj, cfg.macro_period), partial);
        ws.episodes = static_cast<int>(eps.size());
        ws.sub_batches.clear();
        if (gs.joint) {
          ws.sub_batches = sub_view(ws.traj, phi);
          for (RolloutBatch& b : ws.sub_batches)
            compute_gae(b, cfg.sub_ppo.discount, cfg.sub_ppo.gae_lambda, 0.0);
        }
      });

      // Master updates, one shared master per group, gradients averaged
      // across the group's workers each minibatch.
      parallel_for(n_groups, opt.mode, [&](int g) {
        std::vector<RolloutBatch*> batches;
        std::vector<Rng*> rngs;
        for (int m = 0; m < wpg; ++m) {
          batches.push_back(&workers[g * wpg + m].master_batch);
          rngs.push_back(&workers[g * wpg + m].rng_theta);
        }
        groups[g].master_stats = ppo_update_group(
            groups[g].theta, groups[g].theta_adam, batches, cfg.master_ppo, rngs);
      });

      // Sub-policy gradient emission from non-warmup workers, computed at
      // this tick's phi.
      parallel_for(n_workers, opt.mode, [&](int w) {
        WorkerSlot& ws = workers[w];
        ws.phi_epoch_grads.assign(cfg.sub_count, {});
        ws.phi_samples.assign(cfg.sub_count, 0);
        ws.sub_stats = PpoStats{};
        if (!groups[w / wpg].joint) return;
        for (int k = 0; k < cfg.sub_count; ++k) {
          ws.phi_samples[k] =
              static_cast<long long>(ws.sub_batches[k].size());
          ws.phi_epoch_grads[k] = ppo_epoch_gradients(
              phi.nets[k], ws.sub_batches[k], cfg.sub_ppo, ws.rng_phi,
              &ws.sub_stats);
        }
      });

      // Barrier: apply the averaged sub-policy updates in a fixed order.
      // A sub-policy that no contributing worker activated is left untouched.
      if (contributors > 0) {
        for (int k = 0; k < cfg.sub_count; ++k) {
          long long samples = 0;
          for (int w = 0; w < n_workers; ++w)
            if (groups[w / wpg].joint) samples += workers[w].phi_samples[k];
          if (samples == 0) continue;
          for (int e = 0; e < cfg.sub_ppo.epochs; ++e) {
            Vec avg = Vec::Zero(phi.nets[k].param_count());
            for (int w = 0; w < n_workers; ++w) {
              if (!groups[w / wpg].joint) continue;
              const GradVector& g = workers[w].phi_epoch_grads[k][e];
              if (g.count > 0) avg += g.mean();
            }
            avg /= static_cast<double>(contributors);
            adam_step(phi.nets[k], avg, phi_adam[k],
                      cfg.sub_ppo.learning_rate);
          }
        }
      }

      // Metrics, ascending group order for determinism.
      double tick_ret = 0;
      for (int g = 0; g < n_groups; ++g) {
        MetricsRecord rec;
        rec.iter = tick;
        rec.group = g;
        rec.phase = groups[g].joint ? "joint" : "warmup";
        rec.task_seed = groups[g].task.value;
        PpoStats sub_total;
        double rp = 0, rm = 0;
        for (int m = 0; m < wpg; ++m) {
          const WorkerSlot& ws = workers[g * wpg + m];
          rp += ws.ret_prim;
          rm += ws.ret_macro;
          rec.episodes += ws.episodes;
          sub_total.merge(ws.sub_stats);
        }
        sub_total.finish();
        rec.ret_primitive = rp / wpg;
        rec.ret_macro = rm / wpg;
        rec.master_loss = groups[g].master_stats.loss;
        rec.master_entropy = groups[g].master_stats.entropy;
        rec.sub_loss = sub_total.loss;
        rec.sub_entropy = sub_total.entropy;
        rec.phi_contributors = contributors;
        if (sink) sink->write(rec);
        tick_ret += rec.ret_primitive;
      }
      tick_ret /= n_groups;

      if (traj_dump.is_open()) dump_trajectory(traj_dump, tick, workers[0].traj);

      res.phi_trace.push_back(subpolicy_hash(phi));
      res.ticks = tick + 1;
      last_good = phi;

      if (!opt.out_dir.empty() && opt.checkpoint_every > 0 &&
          (tick + 1) % opt.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "/phi_%06ld.ckpt", tick + 1);
        save_checkpoint(opt.out_dir + name, phi);
      }

      for (int g = 0; g < n_groups; ++g)
        groups[g].cycle_pos = (groups[g].cycle_pos + 1) % cycle;

      if (cfg.plateau_window > 0) {
        if (tick_ret > best_ret) {
          best_ret = tick_ret;
          best_tick = tick;
        } else if (tick - best_tick >= cfg.plateau_window) {
          break;
        }
      }
    } catch (const NumericsError&) {
      if (!opt.out_dir.empty())
        save_checkpoint(opt.out_dir + "/phi_abort.ckpt", last_good);
      throw;
    }
    if (sink) {
      auto wall_end = std::chrono::steady_clock::now();
      sink->timing(tick, std::chrono::duration<double, std::milli>(
                             wall_end - wall_start).count());
    }
  }

  if (!opt.out_dir.empty()) {
    const bool with_theta = opt.save_theta && groups[0].theta.param_count() > 0;
    save_checkpoint(opt.out_dir + "/phi_final.ckpt", phi,
                    with_theta ? &groups[0].theta : nullptr);
  }
  res.phi = std::move(phi);
  return res;
}

AdaptResult test_time_adapt(const SubPolicySet& phi, Env& env, TaskSeed task,
                            int budget, const MlshConfig& cfg, uint64_t seed,
                            MetricsSink* sink, int group_label,
                            const ObsMap& sub_obs) {
  require(phi.count() >= 1, "adapt: empty sub-policy set");
  require(budget >= 0, "adapt: negative budget");
  Rng rng_init(derive_seed(seed, 10, group_label));
  Rng rng_act(derive_seed(seed, 11, group_label));
  Rng rng_shuffle(derive_seed(seed, 12, group_label));

  AdaptResult res;
  res.theta = init_net(env.spec().obs_dim, phi.count(), rng_init);
  AdamState adam(res.theta.param_count());

  const int iters = std::max(budget, 1);
  for (int it = 0; it < iters; ++it) {
    Trajectory traj = rollout(env, task, res.theta, phi, cfg.batch_steps,
                              cfg.macro_period, rng_act, sub_obs);
    RolloutBatch mb = master_view(traj, cfg.macro_period);
    const bool ended = mb.dones.back() != 0;
    compute_gae(mb, cfg.master_ppo.discount, cfg.master_ppo.gae_lambda,
                ended ? 0.0 : traj.final_master_value);
    auto eps = episode_returns(traj);
    double partial = 0;
    for (const PrimStep& s : traj.steps) partial += s.reward;
    double ret = mean_or(eps, partial);
    res.returns.push_back(ret);

    PpoStats st;
    if (budget > 0)
      st = ppo_update(res.theta, adam, mb, cfg.master_ppo, rng_shuffle);

    if (sink) {
      MetricsRecord rec;
      rec.iter = it;
      rec.group = group_label;
      rec.phase = "adapt";
      rec.task_seed = task.value;
      rec.episodes = static_cast<int>(eps.size());
      rec.ret_primitive = ret;
      rec.ret_macro =
          mean_or(episode_returns_macro(traj, cfg.macro_period), partial);
      rec.master_loss = st.loss;
      rec.master_entropy = st.entropy;
      sink->write(rec);
    }
  }
  return res;
}

}  // namespace mlsh
