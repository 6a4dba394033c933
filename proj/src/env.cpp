#include "mlsh/env.hpp"

#include <algorithm>
#include <cmath>

namespace mlsh {

// ---------------------------------------------------------------- bandits

MovingBandits::MovingBandits() {
  spec_ = {"bandits", 6, 5, kEpisodeLen};
}

TaskSeed MovingBandits::sample_task(Rng& rng) const {
  return {rng.next_u64()};
}

Vec MovingBandits::reset(TaskSeed task) {
  Rng task_rng(derive_seed(task.value, 0x6261, 0));
  for (auto& g : goals_) {
    g.x() = task_rng.uniform(0.1, 0.9);
    g.y() = task_rng.uniform(0.1, 0.9);
  }
  correct_ = task_rng.uniform() < 0.5 ? 0 : 1;
  agent_ = {0.5, 0.5};
  t_ = 0;
  return observation();
}

Eigen::Vector2d MovingBandits::apply_action(const Eigen::Vector2d& pos,
                                            int action) {
  require(action >= 0 && action < 5, "bandits: action out of range");
  Eigen::Vector2d next = pos;
  switch (action) {
    case 0: next.y() += kStepSize; break;  // up
    case 1: next.y() -= kStepSize; break;  // down
    case 2: next.x() -= kStepSize; break;  // left
    case 3: next.x() += kStepSize; break;  // right
    default: break;                        // stay
  }
  next.x() = std::clamp(next.x(), 0.0, 1.0);
  next.y() = std::clamp(next.y(), 0.0, 1.0);
  return next;
}

Vec MovingBandits::observation() const {
  Vec o(6);
  o << agent_.x(), agent_.y(), goals_[0].x(), goals_[0].y(), goals_[1].x(),
      goals_[1].y();
  return o;
}

StepResult MovingBandits::step(int action) {
  agent_ = apply_action(agent_, action);
  t_ += 1;
  double reward =
      ((agent_ - goals_[correct_]).norm() <= kGoalRadius) ? 1.0 : 0.0;
  return {observation(), reward, t_ >= spec_.episode_len};
}

// ---------------------------------------------------------------- grids

GridNav::GridNav(std::string name, std::vector<std::string> layout,
                 int start_r, int start_c, int episode_len)
    : layout_(std::move(layout)) {
  side_ = static_cast<int>(layout_.size());
  for (const auto& row : layout_)
    require(static_cast<int>(row.size()) == side_, "grid layout must be square");
  for (int r = 0; r < side_; ++r)
    for (int c = 0; c < side_; ++c)
      if (!wall(r, c)) walkable_.push_back(cell_index(r, c));
  start_ = cell_index(start_r, start_c);
  require(!wall(start_r, start_c), "grid start must be walkable");
  spec_ = {std::move(name), 2 * side_ * side_, 4, episode_len};
  goal_ = start_;
  agent_ = start_;
}

Vec GridNav::observation() const {
  Vec o = Vec::Zero(spec_.obs_dim);
  o[agent_] = 1.0;
  o[side_ * side_ + goal_] = 1.0;
  return o;
}

Vec GridNav::reset(TaskSeed task) {
  goal_ = static_cast<int>(task.value);
  require(goal_ >= 0 && goal_ < side_ * side_, "grid: bad goal cell");
  require(layout_[goal_ / side_][goal_ % side_] != 'w', "grid: goal on a wall");
  agent_ = start_;
  t_ = 0;
  return observation();
}

StepResult GridNav::step(int action) {
  require(action >= 0 && action < 4, "grid: action out of range");
  int r = agent_ / side_, c = agent_ % side_;
  int nr = r, nc = c;
  switch (action) {
    case 0: nr = r - 1; break;  // up
    case 1: nr = r + 1; break;  // down
    case 2: nc = c - 1; break;  // left
    case 3: nc = c + 1; break;  // right
  }
  if (nr >= 0 && nr < side_ && nc >= 0 && nc < side_ && !wall(nr, nc))
    agent_ = cell_index(nr, nc);
  t_ += 1;
  bool at_goal = agent_ == goal_;
  double reward = at_goal ? 1.0 : 0.0;
  return {observation(), reward, at_goal || t_ >= spec_.episode_len};
}

// ---------------------------------------------------------------- fourrooms

namespace {

std::vector<std::string> fourrooms_layout() {
  return {
      "wwwwwwwwwwwww",
      "w     w     w",
      "w     w     w",
      "w           w",
      "w     w     w",
      "w     w     w",
      "ww wwww     w",
      "w     www www",
      "w     w     w",
      "w     w     w",
      "w           w",
      "w     w     w",
      "wwwwwwwwwwwww",
  };
}

constexpr int kFourRoomsStartR = 1;
constexpr int kFourRoomsStartC = 1;

}  // namespace

FourRooms::FourRooms(bool exclude_holdout)
    : GridNav("fourrooms", fourrooms_layout(), kFourRoomsStartR,
              kFourRoomsStartC, 100) {
  std::vector<int> held;
  if (exclude_holdout) held = holdout_cells();
  for (int cell : walkable_) {
    if (cell == start_) continue;
    if (std::find(held.begin(), held.end(), cell) != held.end()) continue;
    eligible_.push_back(cell);
  }
}

TaskSeed FourRooms::sample_task(Rng& rng) const {
  int i = rng.randint(static_cast<int>(eligible_.size()));
  return {static_cast<uint64_t>(eligible_[i])};
}

std::vector<int> FourRooms::holdout_cells() {
  FourRooms all(false);  // eligible_ = every walkable cell but the start
  const auto& cells = all.eligible_goals();
  std::vector<int> out;
  const int n = static_cast<int>(cells.size());
  for (int i = 0; i < 10; ++i) out.push_back(cells[(2 * i + 1) * n / 20]);
  return out;
}

// ---------------------------------------------------------------- obstacle

namespace {

// Four corridor legs: right along the bottom, up, right again, up to the
// goal. Reaching the goal needs at least three direction changes.
std::vector<std::string> obstacle_layout() {
  const int side = 25;
  std::vector<std::string> rows(side, std::string(side, 'w'));
  for (int c = 1; c <= 12; ++c) rows[23][c] = ' ';   // leg 1: right
  for (int r = 12; r <= 23; ++r) rows[r][12] = ' ';  // leg 2: up
  for (int c = 12; c <= 23; ++c) rows[12][c] = ' ';  // leg 3: right
  for (int r = 1; r <= 12; ++r) rows[r][23] = ' ';   // leg 4: up
  return rows;
}

}  // namespace

GridObstacle::GridObstacle()
    : GridNav("gridobstacle", obstacle_layout(), 23, 1, 400) {}

TaskSeed GridObstacle::sample_task(Rng&) const {
  return {static_cast<uint64_t>(cell_index(1, 23))};  // the single far goal
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& opt) {
  if (name == "bandits") return std::make_unique<MovingBandits>();
  if (name == "fourrooms")
    return std::make_unique<FourRooms>(opt.exclude_holdout);
  if (name == "gridobstacle") return std::make_unique<GridObstacle>();
  throw ConfigError("unknown environment: " + name);
}

TaskSeed sample_task(const std::string& dist_name, Rng& rng) {
  return make_env(dist_name)->sample_task(rng);
}

Vec coarsen_grid_onehot(const Vec& obs, int from_side, int to_side) {
  const int from_cells = from_side * from_side;
  require(obs.size() == 2 * from_cells, "coarsen: unexpected observation size");
  Vec out = Vec::Zero(2 * to_side * to_side);
  for (int half = 0; half < 2; ++half) {
    int idx = -1;
    for (int i = 0; i < from_cells; ++i)
      if (obs[half * from_cells + i] != 0.0) { idx = i; break; }
    require(idx >= 0, "coarsen: missing one-hot entry");
    int r = (idx / from_side) * to_side / from_side;
    int c = (idx % from_side) * to_side / from_side;
    out[half * to_side * to_side + r * to_side + c] = 1.0;
  }
  return out;
}

}  // namespace mlsh
