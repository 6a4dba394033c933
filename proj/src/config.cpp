#include "mlsh/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace mlsh {

using nlohmann::json;
using nlohmann::ordered_json;

std::string ExperimentConfig::resolved_label() const {
  if (!label.empty()) return label;
  std::string base = preset.empty() ? mlsh.env_name : preset;
  return base + "-" + run_kind;
}

RunnerMode ExperimentConfig::runner_mode() const {
  if (runner == "parallel") return RunnerMode::Parallel;
  if (runner == "sequential") return RunnerMode::Sequential;
  throw ConfigError("runner must be parallel or sequential, got " + runner);
}

int ExperimentConfig::curve_workers() const {
  if (run_kind == "train" || run_kind == "shared")
    return mlsh.total_workers();
  return 1;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  cfg.mlsh.master_ppo.learning_rate = 0.01;
  cfg.mlsh.sub_ppo.learning_rate = 0.0003;
  if (name == "bandits") {
    cfg.mlsh.env_name = "bandits";
    cfg.mlsh.sub_count = 2;
    cfg.mlsh.macro_period = 10;
    cfg.mlsh.episode_len = 50;
    cfg.mlsh.warmup_iters = 9;
    cfg.mlsh.joint_iters = 1;
    cfg.mlsh.batch_steps = 2000;
    cfg.mlsh.groups = 10;
    cfg.mlsh.budget = 600;
    cfg.adapt_budget = 10;
    cfg.adapt_tasks = 20;
  } else if (name == "fourrooms") {
    cfg.mlsh.env_name = "fourrooms";
    cfg.mlsh.env_exclude_holdout = true;
    cfg.mlsh.sub_count = 4;
    cfg.mlsh.macro_period = 25;
    cfg.mlsh.episode_len = 100;
    cfg.mlsh.warmup_iters = 20;
    cfg.mlsh.joint_iters = 30;
    cfg.mlsh.batch_steps = 2000;
    cfg.mlsh.groups = 10;
    cfg.mlsh.budget = 1000;
    cfg.adapt_budget = 100;
    cfg.adapt_tasks = 10;
    cfg.adapt_holdout = true;
  } else if (name == "obstacle-transfer") {
    cfg.run_kind = "adapt";
    cfg.mlsh.env_name = "gridobstacle";
    cfg.mlsh.sub_count = 4;
    cfg.mlsh.macro_period = 25;
    cfg.mlsh.episode_len = 400;
    cfg.mlsh.warmup_iters = 0;
    cfg.mlsh.joint_iters = 1;
    cfg.mlsh.batch_steps = 2000;
    cfg.mlsh.groups = 1;
    cfg.mlsh.budget = 0;
    cfg.adapt_budget = 50;
    cfg.adapt_tasks = 1;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return cfg;
}

namespace {

ordered_json ppo_to_json(const PpoConfig& p) {
  ordered_json j;
  j["clip"] = p.clip_ratio;
  j["discount"] = p.discount;
  j["gae_lambda"] = p.gae_lambda;
  j["epochs"] = p.epochs;
  j["minibatch"] = p.minibatch_size;
  j["value_coef"] = p.value_coef;
  j["entropy_coef"] = p.entropy_coef;
  j["lr"] = p.learning_rate;
  j["max_grad_norm"] = p.max_grad_norm;
  return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key " + where + "." + it.key());
}

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

PpoConfig ppo_from_json(const json& j, const PpoConfig& base,
                        const std::string& where) {
  check_keys(j, {"clip", "discount", "gae_lambda", "epochs", "minibatch",
                 "value_coef", "entropy_coef", "lr", "max_grad_norm"},
             where);
  PpoConfig p = base;
  get_to(j, "clip", p.clip_ratio);
  get_to(j, "discount", p.discount);
  get_to(j, "gae_lambda", p.gae_lambda);
  get_to(j, "epochs", p.epochs);
  get_to(j, "minibatch", p.minibatch_size);
  get_to(j, "value_coef", p.value_coef);
  get_to(j, "entropy_coef", p.entropy_coef);
  get_to(j, "lr", p.learning_rate);
  get_to(j, "max_grad_norm", p.max_grad_norm);
  return p;
}

}  // namespace

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["preset"] = cfg.preset;
  j["label"] = cfg.label;
  j["run_kind"] = cfg.run_kind;
  j["seed"] = cfg.mlsh.seed;
  j["env"] = {{"name", cfg.mlsh.env_name},
              {"exclude_holdout", cfg.mlsh.env_exclude_holdout}};
  ordered_json m;
  m["K"] = cfg.mlsh.sub_count;
  m["N"] = cfg.mlsh.macro_period;
  m["T"] = cfg.mlsh.episode_len;
  m["W"] = cfg.mlsh.warmup_iters;
  m["U"] = cfg.mlsh.joint_iters;
  m["D"] = cfg.mlsh.batch_steps;
  m["groups"] = cfg.mlsh.groups;
  m["workers_per_group"] = cfg.mlsh.workers_per_group;
  m["budget"] = cfg.mlsh.budget;
  m["plateau_window"] = cfg.mlsh.plateau_window;
  j["mlsh"] = m;
  j["master_ppo"] = ppo_to_json(cfg.mlsh.master_ppo);
  j["sub_ppo"] = ppo_to_json(cfg.mlsh.sub_ppo);
  j["io"] = {{"checkpoint_every", cfg.checkpoint_every},
             {"save_theta", cfg.save_theta},
             {"dump_trajectories", cfg.dump_trajectories},
             {"runner", cfg.runner}};
  j["adapt"] = {{"tasks", cfg.adapt_tasks},
                {"budget", cfg.adapt_budget},
                {"holdout", cfg.adapt_holdout},
                {"checkpoint", cfg.checkpoint_path}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, {"preset", "label", "run_kind", "seed", "env", "mlsh",
                 "master_ppo", "sub_ppo", "io", "adapt"},
             "");
  ExperimentConfig cfg;
  std::string preset;
  get_to(j, "preset", preset);
  if (!preset.empty()) cfg = preset_config(preset);
  get_to(j, "label", cfg.label);
  get_to(j, "run_kind", cfg.run_kind);
  get_to(j, "seed", cfg.mlsh.seed);
  if (j.contains("env")) {
    check_keys(j["env"], {"name", "exclude_holdout"}, "env");
    get_to(j["env"], "name", cfg.mlsh.env_name);
    get_to(j["env"], "exclude_holdout", cfg.mlsh.env_exclude_holdout);
  }
  if (j.contains("mlsh")) {
    const json& m = j["mlsh"];
    check_keys(m, {"K", "N", "T", "W", "U", "D", "groups",
                   "workers_per_group", "budget", "plateau_window"},
               "mlsh");
    get_to(m, "K", cfg.mlsh.sub_count);
    get_to(m, "N", cfg.mlsh.macro_period);
    get_to(m, "T", cfg.mlsh.episode_len);
    get_to(m, "W", cfg.mlsh.warmup_iters);
    get_to(m, "U", cfg.mlsh.joint_iters);
    get_to(m, "D", cfg.mlsh.batch_steps);
    get_to(m, "groups", cfg.mlsh.groups);
    get_to(m, "workers_per_group", cfg.mlsh.workers_per_group);
    get_to(m, "budget", cfg.mlsh.budget);
    get_to(m, "plateau_window", cfg.mlsh.plateau_window);
  }
  if (j.contains("master_ppo"))
    cfg.mlsh.master_ppo =
        ppo_from_json(j["master_ppo"], cfg.mlsh.master_ppo, "master_ppo");
  if (j.contains("sub_ppo"))
    cfg.mlsh.sub_ppo = ppo_from_json(j["sub_ppo"], cfg.mlsh.sub_ppo, "sub_ppo");
  if (j.contains("io")) {
    check_keys(j["io"],
               {"checkpoint_every", "save_theta", "dump_trajectories", "runner"},
               "io");
    get_to(j["io"], "checkpoint_every", cfg.checkpoint_every);
    get_to(j["io"], "save_theta", cfg.save_theta);
    get_to(j["io"], "dump_trajectories", cfg.dump_trajectories);
    get_to(j["io"], "runner", cfg.runner);
  }
  if (j.contains("adapt")) {
    check_keys(j["adapt"], {"tasks", "budget", "holdout", "checkpoint"},
               "adapt");
    get_to(j["adapt"], "tasks", cfg.adapt_tasks);
    get_to(j["adapt"], "budget", cfg.adapt_budget);
    get_to(j["adapt"], "holdout", cfg.adapt_holdout);
    get_to(j["adapt"], "checkpoint", cfg.checkpoint_path);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(ordered_json& j, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must be key=value, got: " + kv);
  std::string key = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);

  // Bare training scalars address the mlsh section.
  static const std::set<std::string> kBare = {
      "K", "N", "T", "W", "U", "D",
      "groups", "workers_per_group", "budget", "plateau_window"};
  std::vector<std::string> path;
  if (key.find('.') == std::string::npos) {
    if (kBare.count(key)) path = {"mlsh", key};
    else if (key == "seed" || key == "label" || key == "run_kind" ||
             key == "preset") path = {key};
    else throw ConfigError("unknown override key: " + key);
  } else {
    size_t start = 0;
    while (true) {
      size_t dot = key.find('.', start);
      if (dot == std::string::npos) {
        path.push_back(key.substr(start));
        break;
      }
      path.push_back(key.substr(start, dot - start));
      start = dot + 1;
    }
  }

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // plain string
  }
  ordered_json* node = &j;
  for (size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
  (*node)[path.back()] = parsed;
}

void write_config_snapshot(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/config.json");
  if (!os) throw ConfigError("cannot write config snapshot in " + out_dir);
  os << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace mlsh
