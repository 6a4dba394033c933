#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mlsh/error.hpp"

namespace mlsh {

/// One record per (iteration, group). For adaptation-style runs the group
/// column carries the task index. Gridworld returns are in {0,1}, so the
/// return columns double as success rates there.
struct MetricsRecord {
  long iter = 0;
  int group = 0;
  std::string phase;  // warmup | joint | shared | adapt | flat
  uint64_t task_seed = 0;
  int episodes = 0;
  double ret_primitive = 0;
  double ret_macro = 0;
  double master_loss = 0;
  double master_entropy = 0;
  double sub_loss = 0;
  double sub_entropy = 0;
  int phi_contributors = 0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void write(const MetricsRecord& rec) = 0;
  // Wall-clock timings are kept out of the metrics stream so that identical
  // (config, seed) runs produce byte-identical metrics files.
  virtual void timing(long /*iter*/, double /*wall_ms*/) {}
};

/// metrics.jsonl (deterministic) + timing.jsonl (wall clock) in out_dir.
class JsonlSink : public MetricsSink {
 public:
  explicit JsonlSink(const std::string& out_dir, bool with_timing = true);
  void write(const MetricsRecord& rec) override;
  void timing(long iter, double wall_ms) override;

 private:
  std::ofstream metrics_;
  std::ofstream timing_;
};

class VectorSink : public MetricsSink {
 public:
  void write(const MetricsRecord& rec) override { records.push_back(rec); }
  std::vector<MetricsRecord> records;
};

class TeeSink : public MetricsSink {
 public:
  TeeSink(MetricsSink* a, MetricsSink* b) : a_(a), b_(b) {}
  void write(const MetricsRecord& rec) override {
    if (a_) a_->write(rec);
    if (b_) b_->write(rec);
  }
  void timing(long iter, double ms) override {
    if (a_) a_->timing(iter, ms);
    if (b_) b_->timing(iter, ms);
  }

 private:
  MetricsSink* a_;
  MetricsSink* b_;
};

std::string metrics_path(const std::string& out_dir);

/// Merges run directories (each with config.json + metrics.jsonl) into one
/// aligned learning-curve CSV: label,timestep,mean_return,stderr,n_seeds.
/// Runs sharing a label are averaged across seeds; the timestep of a point is
/// iteration * batch_steps * contributing workers.
void export_curves(const std::vector<std::string>& run_dirs,
                   const std::string& csv_path);

}  // namespace mlsh
