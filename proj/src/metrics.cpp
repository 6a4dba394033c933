#include "mlsh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "mlsh/config.hpp"

namespace mlsh {

using nlohmann::json;
using nlohmann::ordered_json;

std::string metrics_path(const std::string& out_dir) {
  return out_dir + "/metrics.jsonl";
}

JsonlSink::JsonlSink(const std::string& out_dir, bool with_timing) {
  std::filesystem::create_directories(out_dir);
  metrics_.open(metrics_path(out_dir));
  if (!metrics_) throw ConfigError("cannot open metrics file in " + out_dir);
  if (with_timing) timing_.open(out_dir + "/timing.jsonl");
}

void JsonlSink::write(const MetricsRecord& rec) {
  ordered_json j;
  j["iter"] = rec.iter;
  j["group"] = rec.group;
  j["phase"] = rec.phase;
  j["task_seed"] = rec.task_seed;
  j["episodes"] = rec.episodes;
  j["ret_primitive"] = rec.ret_primitive;
  j["ret_macro"] = rec.ret_macro;
  j["master_loss"] = rec.master_loss;
  j["master_entropy"] = rec.master_entropy;
  j["sub_loss"] = rec.sub_loss;
  j["sub_entropy"] = rec.sub_entropy;
  j["phi_contributors"] = rec.phi_contributors;
  metrics_ << j.dump() << "\n";
}

void JsonlSink::timing(long iter, double wall_ms) {
  if (!timing_.is_open()) return;
  ordered_json j;
  j["iter"] = iter;
  j["wall_ms"] = wall_ms;
  timing_ << j.dump() << "\n";
}

namespace {

struct RunCurve {
  std::string label;
  long stride = 0;                 // env timesteps per iteration
  std::map<long, double> points;  // iter -> mean return over groups
};

RunCurve read_run(const std::string& dir) {
  ExperimentConfig cfg = load_config_file(dir + "/config.json");
  RunCurve run;
  run.label = cfg.resolved_label();
  run.stride = static_cast<long>(cfg.mlsh.batch_steps) * cfg.curve_workers();

  std::ifstream is(metrics_path(dir));
  if (!is) throw ConfigError("missing metrics.jsonl in " + dir);
  std::map<long, std::pair<double, int>> acc;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError(dir + "/metrics.jsonl line " +
                        std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("iter") || !j.contains("ret_primitive"))
      throw ConfigError(dir + "/metrics.jsonl line " + std::to_string(lineno) +
                        ": missing iter/ret_primitive");
    long iter = j["iter"].get<long>();
    acc[iter].first += j["ret_primitive"].get<double>();
    acc[iter].second += 1;
  }
  for (const auto& [iter, sa] : acc)
    run.points[iter] = sa.first / sa.second;
  return run;
}

}  // namespace

void export_curves(const std::vector<std::string>& run_dirs,
                   const std::string& csv_path) {
  require(!run_dirs.empty(), "export: need at least one run directory");
  std::map<std::string, std::vector<RunCurve>> by_label;
  for (const auto& dir : run_dirs) {
    RunCurve run = read_run(dir);
    by_label[run.label].push_back(std::move(run));
  }

  std::ofstream os(csv_path);
  if (!os) throw ConfigError("cannot write " + csv_path);
  os << "label,timestep,mean_return,stderr,n_seeds\n";
  for (const auto& [label, runs] : by_label) {
    const long stride = runs.front().stride;
    for (const auto& r : runs)
      if (r.stride != stride)
        throw ConfigError("runs labeled '" + label +
                          "' disagree on timesteps per iteration");
    // Iterations present in every run of the label.
    std::vector<long> iters;
    for (const auto& [it, v] : runs.front().points) {
      bool everywhere = true;
      for (const auto& r : runs)
        if (!r.points.count(it)) { everywhere = false; break; }
      if (everywhere) iters.push_back(it);
    }
    for (long it : iters) {
      double mean = 0;
      for (const auto& r : runs) mean += r.points.at(it);
      mean /= runs.size();
      double var = 0;
      for (const auto& r : runs) {
        double d = r.points.at(it) - mean;
        var += d * d;
      }
      double se = runs.size() > 1
                      ? std::sqrt(var / (runs.size() - 1)) /
                            std::sqrt(static_cast<double>(runs.size()))
                      : 0.0;
      os << label << ',' << it * stride << ',' << mean << ',' << se << ','
         << runs.size() << "\n";
    }
  }
}

}  // namespace mlsh
