#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mlsh/net.hpp"
#include "mlsh/rng.hpp"

namespace mlsh {

/// Identifies one sampled MDP from a task distribution. The same seed always
/// materializes the same task.
struct TaskSeed {
  uint64_t value = 0;
};

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_count = 0;
  int episode_len = 0;
};

struct StepResult {
  Vec obs;
  double reward = 0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual TaskSeed sample_task(Rng& rng) const = 0;
  virtual Vec reset(TaskSeed task) = 0;
  virtual StepResult step(int action) = 0;
};

/// Point agent in the unit square with two candidate goals; one of them
/// (hidden from the observation) pays reward 1 whenever the agent is within
/// kGoalRadius. Actions: 4 cardinal moves of kStepSize plus stay.
class MovingBandits : public Env {
 public:
  static constexpr double kStepSize = 0.05;
  static constexpr double kGoalRadius = 0.1;
  static constexpr int kEpisodeLen = 50;

  MovingBandits();
  const EnvSpec& spec() const override { return spec_; }
  TaskSeed sample_task(Rng& rng) const override;
  Vec reset(TaskSeed task) override;
  StepResult step(int action) override;

  // Shared dynamics, also used by the inspection probes.
  static Eigen::Vector2d apply_action(const Eigen::Vector2d& pos, int action);

  const Eigen::Vector2d& goal(int i) const { return goals_[i]; }
  int correct_goal() const { return correct_; }

 private:
  Vec observation() const;
  EnvSpec spec_;
  Eigen::Vector2d agent_;
  Eigen::Vector2d goals_[2];
  int correct_ = 0;
  int t_ = 0;
};

/// Occupancy-grid navigation base: deterministic cardinal moves blocked by
/// walls, reward 1 and termination on the goal cell, observation is the
/// agent one-hot concatenated with the goal one-hot over the full grid.
class GridNav : public Env {
 public:
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(TaskSeed task) override;
  StepResult step(int action) override;

  int side() const { return side_; }
  bool wall(int r, int c) const { return layout_[r][c] == 'w'; }
  int cell_index(int r, int c) const { return r * side_ + c; }
  int start_cell() const { return start_; }
  int goal_cell() const { return goal_; }
  int agent_cell() const { return agent_; }
  const std::vector<int>& walkable_cells() const { return walkable_; }

 protected:
  GridNav(std::string name, std::vector<std::string> layout, int start_r,
          int start_c, int episode_len);
  Vec observation() const;

  EnvSpec spec_;
  std::vector<std::string> layout_;
  std::vector<int> walkable_;
  int side_ = 0;
  int start_ = 0;
  int goal_ = 0;
  int agent_ = 0;
  int t_ = 0;
};

/// The classic 13x13 four-rooms map. Tasks differ only in the goal cell,
/// drawn uniformly over walkable cells excluding the start (and excluding a
/// configured holdout set when exclude_holdout is on). TaskSeed value is the
/// linear goal cell index.
class FourRooms : public GridNav {
 public:
  explicit FourRooms(bool exclude_holdout = false);
  TaskSeed sample_task(Rng& rng) const override;

  const std::vector<int>& eligible_goals() const { return eligible_; }
  // Deterministic spread of cells reserved for unseen-goal evaluation.
  static std::vector<int> holdout_cells();

 private:
  std::vector<int> eligible_;
};

/// 25x25 sparse-reward corridor maze: four alternating corridor legs between
/// the fixed start and the single far goal, reward only on arrival. A single
/// task; used for transfer evaluation only.
class GridObstacle : public GridNav {
 public:
  GridObstacle();
  TaskSeed sample_task(Rng& rng) const override;
};

struct EnvOptions {
  bool exclude_holdout = false;
};

std::unique_ptr<Env> make_env(const std::string& name,
                              const EnvOptions& opt = {});

/// Task sampling by distribution name (bandits | fourrooms | gridobstacle).
TaskSeed sample_task(const std::string& dist_name, Rng& rng);

/// Maps a (agent one-hot ++ goal one-hot) grid observation onto a smaller
/// grid by integer rescaling of cell coordinates.
Vec coarsen_grid_onehot(const Vec& obs, int from_side, int to_side);

}  // namespace mlsh
