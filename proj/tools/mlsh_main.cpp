#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mlsh/baselines.hpp"
#include "mlsh/checkpoint.hpp"
#include "mlsh/config.hpp"
#include "mlsh/inspect.hpp"
#include "mlsh/metrics.hpp"
#include "mlsh/trainer.hpp"

namespace {

using namespace mlsh;

struct CommonOpts {
  std::string preset;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::string checkpoint;
  long long seed = -1;
  long budget = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool out_required = true) {
  cmd->add_option("--preset", o.preset, "built-in preset: bandits | fourrooms | obstacle-transfer");
  cmd->add_option("--config", o.config_path, "config file (same format as the written snapshot)");
  cmd->add_option("--set", o.sets, "override, key=value; bare K/N/T/W/U/D hit the mlsh section")
      ->take_all();
  cmd->add_option("--seed", o.seed, "run seed");
  auto* out = cmd->add_option("--out", o.out_dir, "output directory");
  if (out_required) out->required();
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd->add_option("--budget", o.budget, "iteration budget");
}

ExperimentConfig resolve_config(const CommonOpts& o,
                                const std::string& run_kind) {
  nlohmann::ordered_json j;
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw ConfigError("cannot read config file: " + o.config_path);
    try {
      is >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
  } else if (!o.preset.empty()) {
    j = config_to_json(preset_config(o.preset));
  } else {
    throw ConfigError("need --preset or --config");
  }
  for (const std::string& kv : o.sets) apply_override(j, kv);
  ExperimentConfig cfg = config_from_json(j);
  cfg.run_kind = run_kind;
  if (o.seed >= 0) cfg.mlsh.seed = static_cast<uint64_t>(o.seed);
  if (!o.checkpoint.empty()) cfg.checkpoint_path = o.checkpoint;
  return cfg;
}

RunOptions run_options(const ExperimentConfig& cfg, const std::string& out) {
  RunOptions opt;
  opt.mode = cfg.runner_mode();
  opt.out_dir = out;
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.save_theta = cfg.save_theta;
  opt.dump_trajectories = cfg.dump_trajectories;
  return opt;
}

TaskSeed eval_task(const ExperimentConfig& cfg, Env& env, int index) {
  if (cfg.adapt_holdout) {
    if (cfg.mlsh.env_name != "fourrooms")
      throw ConfigError("holdout tasks only exist for fourrooms");
    auto cells = FourRooms::holdout_cells();
    return {static_cast<uint64_t>(cells[index % cells.size()])};
  }
  Rng rng(derive_seed(cfg.mlsh.seed, 30, index));
  return env.sample_task(rng);
}

/// Sub-policy input adapter for checkpoints trained on a smaller grid.
ObsMap transfer_obs_map(const Checkpoint& ck, const Env& env) {
  const int ck_in = ck.subs.nets[0].input_dim();
  const int env_in = env.spec().obs_dim;
  if (ck.subs.nets[0].action_count() != env.spec().action_count)
    throw ConfigError("checkpoint action count does not match environment");
  if (ck_in == env_in) return {};
  const auto* grid = dynamic_cast<const GridNav*>(&env);
  if (grid) {
    int to_side = static_cast<int>(std::lround(std::sqrt(ck_in / 2.0)));
    if (2 * to_side * to_side == ck_in && to_side < grid->side()) {
      int from_side = grid->side();
      return [from_side, to_side](const Vec& obs) {
        return coarsen_grid_onehot(obs, from_side, to_side);
      };
    }
  }
  throw ConfigError("checkpoint observation size " + std::to_string(ck_in) +
                    " does not match environment observation size " +
                    std::to_string(env_in));
}

int cmd_train(const CommonOpts& o) {
  ExperimentConfig cfg = resolve_config(o, "train");
  if (o.budget >= 0) cfg.mlsh.budget = o.budget;
  write_config_snapshot(cfg, o.out_dir);
  JsonlSink sink(o.out_dir);
  RunResult res = run_meta(cfg.mlsh, &sink, run_options(cfg, o.out_dir));
  std::cout << "trained " << res.ticks << " meta-iterations; checkpoint at "
            << o.out_dir << "/phi_final.ckpt\n";
  return 0;
}

int cmd_baseline(const CommonOpts& o, const std::string& kind) {
  if (kind != "shared" && kind != "scratch" && kind != "finetune")
    throw ConfigError("baseline kind must be shared, scratch or finetune");
  ExperimentConfig cfg = resolve_config(o, kind);

  if (kind == "shared") {
    if (o.budget >= 0) cfg.mlsh.budget = o.budget;
    write_config_snapshot(cfg, o.out_dir);
    JsonlSink sink(o.out_dir);
    RunResult res = run_shared(cfg.mlsh, &sink, run_options(cfg, o.out_dir));
    std::cout << "trained shared policy for " << res.ticks
              << " iterations; checkpoint at " << o.out_dir
              << "/policy_final.ckpt\n";
    return 0;
  }

  if (o.budget >= 0) cfg.adapt_budget = static_cast<int>(o.budget);
  write_config_snapshot(cfg, o.out_dir);
  JsonlSink sink(o.out_dir);

  NetParams init;
  bool have_init = false;
  if (kind == "finetune") {
    if (!cfg.checkpoint_path.empty()) {
      Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
      if (ck.subs.count() != 1)
        throw ConfigError("finetune needs a flat (single-policy) checkpoint");
      init = ck.subs.nets[0];
    } else {
      // No checkpoint given: train the shared policy first.
      std::string pre_dir = o.out_dir + "/shared_pretrain";
      ExperimentConfig pre = cfg;
      pre.run_kind = "shared";
      write_config_snapshot(pre, pre_dir);
      JsonlSink pre_sink(pre_dir);
      RunResult res = run_shared(pre.mlsh, &pre_sink, run_options(pre, pre_dir));
      init = res.phi.nets[0];
    }
    have_init = true;
  }

  EnvOptions eopt;  // evaluation never excludes holdout goals
  for (int i = 0; i < cfg.adapt_tasks; ++i) {
    auto env = make_env(cfg.mlsh.env_name, eopt);
    TaskSeed task = eval_task(cfg, *env, i);
    adapt_flat(*env, task, cfg.adapt_budget, cfg.mlsh, cfg.mlsh.seed, &sink, i,
               have_init ? &init : nullptr);
  }
  std::cout << "ran " << kind << " baseline on " << cfg.adapt_tasks
            << " tasks\n";
  return 0;
}

int cmd_adapt(const CommonOpts& o) {
  ExperimentConfig cfg = resolve_config(o, "adapt");
  if (o.budget >= 0) cfg.adapt_budget = static_cast<int>(o.budget);
  if (cfg.checkpoint_path.empty())
    throw ConfigError("adapt needs --checkpoint");
  Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  write_config_snapshot(cfg, o.out_dir);
  JsonlSink sink(o.out_dir);

  EnvOptions eopt;
  for (int i = 0; i < cfg.adapt_tasks; ++i) {
    auto env = make_env(cfg.mlsh.env_name, eopt);
    ObsMap map = transfer_obs_map(ck, *env);
    TaskSeed task = eval_task(cfg, *env, i);
    test_time_adapt(ck.subs, *env, task, cfg.adapt_budget, cfg.mlsh,
                    cfg.mlsh.seed, &sink, i, map);
  }
  std::cout << "adapted on " << cfg.adapt_tasks << " tasks over "
            << cfg.adapt_budget << " iterations\n";
  return 0;
}

int cmd_inspect(const std::string& ckpt, const std::string& env_name,
                int probes, long long probe_seed, const std::string& out_dir) {
  Checkpoint ck = load_checkpoint(ckpt);
  std::filesystem::create_directories(out_dir);
  if (env_name == "bandits") {
    SpecializationReport rep = bandits_specialization(
        ck.subs, probes, static_cast<uint64_t>(probe_seed));
    write_specialization_json(rep, out_dir + "/specialization.json");
    write_bandits_arrow_csv(ck.subs, out_dir + "/arrows.csv", {0.2, 0.8},
                            {0.8, 0.2});
    for (size_t i = 0; i < rep.subs.size(); ++i)
      std::cout << "sub " << i << ": majority goal "
                << rep.subs[i].majority_goal << ", score "
                << rep.subs[i].score << "\n";
    std::cout << "mean score " << rep.mean_score << ", distinct majorities: "
              << (rep.distinct_majorities ? "yes" : "no") << "\n";
  } else {
    auto env = make_env(env_name);
    Rng rng(derive_seed(static_cast<uint64_t>(probe_seed), 31));
    TaskSeed task = env->sample_task(rng);
    write_grid_greedy_csv(ck.subs, env_name, task, out_dir + "/greedy.csv");
    std::cout << "wrote greedy action field for task " << task.value << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metalearned shared hierarchies: training, baselines, "
               "adaptation, inspection"};
  app.require_subcommand(1);

  CommonOpts train_o, base_o, adapt_o;
  std::string base_kind;
  auto* train = app.add_subcommand("train", "meta-train sub-policies");
  add_common(train, train_o);

  auto* baseline = app.add_subcommand("baseline", "flat-policy baselines");
  baseline->add_option("--kind", base_kind, "shared | scratch | finetune")
      ->required();
  add_common(baseline, base_o);

  auto* adapt = app.add_subcommand(
      "adapt", "master-only training on new tasks with frozen sub-policies");
  add_common(adapt, adapt_o);

  std::string ins_ckpt, ins_env = "bandits", ins_out;
  int ins_probes = 200;
  long long ins_seed = 0;
  auto* inspect = app.add_subcommand("inspect", "sub-policy specialization report");
  inspect->add_option("--checkpoint", ins_ckpt)->required();
  inspect->add_option("--env", ins_env);
  inspect->add_option("--probes", ins_probes);
  inspect->add_option("--seed", ins_seed);
  inspect->add_option("--out", ins_out)->required();

  std::vector<std::string> exp_dirs;
  std::string exp_out;
  auto* exp = app.add_subcommand("export", "merge runs into a learning-curve CSV");
  exp->add_option("--out", exp_out)->required();
  exp->add_option("dirs", exp_dirs, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*baseline) return cmd_baseline(base_o, base_kind);
    if (*adapt) return cmd_adapt(adapt_o);
    if (*inspect)
      return cmd_inspect(ins_ckpt, ins_env, ins_probes, ins_seed, ins_out);
    if (*exp) {
      export_curves(exp_dirs, exp_out);
      std::cout << "wrote " << exp_out << "\n";
      return 0;
    }
  } catch (const mlsh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
