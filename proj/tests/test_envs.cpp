#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <queue>
#include <set>

#include "mlsh/env.hpp"

using namespace mlsh;

TEST_CASE("task sampling is deterministic in the seed") {
  MovingBandits env;
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i)
    CHECK(env.sample_task(a).value == env.sample_task(b).value);
  TaskSeed t = env.sample_task(a);
  env.reset(t);
  Eigen::Vector2d g0 = env.goal(0), g1 = env.goal(1);
  int correct = env.correct_goal();
  env.reset(t);
  CHECK(env.goal(0) == g0);
  CHECK(env.goal(1) == g1);
  CHECK(env.correct_goal() == correct);
}

TEST_CASE("the hidden flag is split evenly") {
  MovingBandits env;
  Rng rng(7);
  int ones = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset(env.sample_task(rng));
    ones += env.correct_goal();
  }
  double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(ones - n / 2) <= 3 * sigma);
}

TEST_CASE("bandit goals stay inside their box and the agent starts centered") {
  MovingBandits env;
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    Vec obs = env.reset(env.sample_task(rng));
    CHECK(obs[0] == 0.5);
    CHECK(obs[1] == 0.5);
    for (int j = 2; j < 6; ++j) {
      CHECK(obs[j] >= 0.1);
      CHECK(obs[j] <= 0.9);
    }
  }
}

TEST_CASE("observation dimensions match the declared specs") {
  EnvOptions opt;
  auto bandits = make_env("bandits", opt);
  auto rooms = make_env("fourrooms", opt);
  auto obstacle = make_env("gridobstacle", opt);
  CHECK(bandits->spec().obs_dim == 6);
  CHECK(rooms->spec().obs_dim == 338);
  CHECK(obstacle->spec().obs_dim == 1250);
  Rng rng(3);
  CHECK(bandits->reset(bandits->sample_task(rng)).size() == 6);
  CHECK(rooms->reset(rooms->sample_task(rng)).size() == 338);
  CHECK(obstacle->reset(obstacle->sample_task(rng)).size() == 1250);
  CHECK(bandits->spec().action_count == 5);
  CHECK(rooms->spec().action_count == 4);
  CHECK(bandits->spec().episode_len == 50);
  CHECK(rooms->spec().episode_len == 100);
  CHECK(obstacle->spec().episode_len == 400);
  CHECK_THROWS_AS(make_env("nope"), ConfigError);
}

TEST_CASE("staying on the correct goal pays every remaining step") {
  MovingBandits env;
  Rng rng(11);
  // find a task whose correct goal is reachable quickly going right
  TaskSeed t = env.sample_task(rng);
  env.reset(t);
  Eigen::Vector2d goal = env.goal(env.correct_goal());
  // drive straight to the goal with axis moves
  Vec obs = env.reset(t);
  Eigen::Vector2d agent{obs[0], obs[1]};
  int steps = 0;
  double reward_sum = 0;
  bool done = false;
  while (!done && steps < 50) {
    int action;
    if (std::abs(goal.x() - agent.x()) > MovingBandits::kStepSize / 2)
      action = goal.x() > agent.x() ? 3 : 2;
    else if (std::abs(goal.y() - agent.y()) > MovingBandits::kStepSize / 2)
      action = goal.y() > agent.y() ? 0 : 1;
    else
      action = 4;  // stay on the goal
    StepResult sr = env.step(action);
    agent = {sr.obs[0], sr.obs[1]};
    reward_sum += sr.reward;
    done = sr.done;
    ++steps;
  }
  CHECK(steps == 50);
  CHECK(reward_sum > 25);  // most of the episode spent on the goal
}

TEST_CASE("six right steps reach the first reward at a 0.4 gap") {
  // agent (0.5,0.5), correct goal (0.9,0.5): 0.4 gap, 0.1 radius, 0.05 steps
  MovingBandits env;
  Rng rng(13);
  TaskSeed t;
  bool found = false;
  for (int i = 0; i < 200000 && !found; ++i) {
    t = env.sample_task(rng);
    env.reset(t);
    Eigen::Vector2d g = env.goal(env.correct_goal());
    if (std::abs(g.x() - 0.9) < 1e-3 && std::abs(g.y() - 0.5) < 1e-3)
      found = true;
  }
  if (!found) {
    // exact placement is vanishingly unlikely; check the distance arithmetic
    Eigen::Vector2d agent{0.5, 0.5}, goal{0.9, 0.5};
    int first_reward = -1;
    for (int s = 1; s <= 10 && first_reward < 0; ++s) {
      agent = MovingBandits::apply_action(agent, 3);
      if ((agent - goal).norm() <= MovingBandits::kGoalRadius) first_reward = s;
    }
    CHECK(first_reward == 6);
  }
}

TEST_CASE("hidden information: the flag changes rewards, never observations") {
  // The observation is exactly [agent, goal0, goal1]; under identical action
  // sequences the observation stream cannot depend on which goal is correct.
  MovingBandits env;
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    Vec obs = env.reset(env.sample_task(rng));
    CHECK(obs[2] == env.goal(0).x());
    CHECK(obs[3] == env.goal(0).y());
    CHECK(obs[4] == env.goal(1).x());
    CHECK(obs[5] == env.goal(1).y());
    Rng act_rng(i);
    for (int s = 0; s < 50; ++s) {
      StepResult sr = env.step(act_rng.randint(5));
      CHECK(sr.obs[2] == obs[2]);
      CHECK(sr.obs[3] == obs[3]);
      CHECK(sr.obs[4] == obs[4]);
      CHECK(sr.obs[5] == obs[5]);
    }
  }
}

TEST_CASE("four rooms has 104 walkable cells and 103 candidate goals") {
  FourRooms env;
  CHECK(env.walkable_cells().size() == 104);
  CHECK(env.eligible_goals().size() == 103);
}

TEST_CASE("ten thousand goal samples cover every candidate cell") {
  FourRooms env;
  Rng rng(29);
  std::set<uint64_t> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(env.sample_task(rng).value);
  CHECK(seen.size() == 103);
}

TEST_CASE("four rooms reset puts exactly one agent one-hot at the start") {
  FourRooms env;
  Rng rng(31);
  Vec obs = env.reset(env.sample_task(rng));
  int agent_ones = 0;
  for (int i = 0; i < 169; ++i)
    if (obs[i] != 0) ++agent_ones;
  CHECK(agent_ones == 1);
  CHECK(obs[env.start_cell()] == 1.0);
  int goal_ones = 0;
  for (int i = 169; i < 338; ++i)
    if (obs[i] != 0) ++goal_ones;
  CHECK(goal_ones == 1);
}

TEST_CASE("walls block movement") {
  FourRooms env;
  env.reset(TaskSeed{static_cast<uint64_t>(env.eligible_goals().back())});
  // start is (1,1): up and left are outer walls
  StepResult up = env.step(0);
  CHECK(env.agent_cell() == env.start_cell());
  CHECK(up.reward == 0.0);
  StepResult left = env.step(2);
  CHECK(env.agent_cell() == env.start_cell());
  CHECK(left.reward == 0.0);
  StepResult right = env.step(3);
  CHECK(env.agent_cell() == env.start_cell() + 1);
  CHECK(right.reward == 0.0);
}

TEST_CASE("episodes are forced done at T") {
  FourRooms env;
  // goal far from start; just stand still against a wall for 100 steps
  env.reset(TaskSeed{static_cast<uint64_t>(env.eligible_goals().back())});
  for (int t = 0; t < 99; ++t) {
    StepResult sr = env.step(0);
    CHECK(!sr.done);
  }
  CHECK(env.step(0).done);

  MovingBandits bandits;
  Rng rng(37);
  bandits.reset(bandits.sample_task(rng));
  for (int t = 0; t < 49; ++t) CHECK(!bandits.step(4).done);
  CHECK(bandits.step(4).done);
}

namespace {

// BFS oracle over the grid, independent of the env's dynamics.
int bfs_distance(const GridNav& env, int from, int to) {
  const int side = env.side();
  std::vector<int> dist(side * side, -1);
  std::queue<int> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    int cur = q.front();
    q.pop();
    if (cur == to) return dist[cur];
    int r = cur / side, c = cur % side;
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int d = 0; d < 4; ++d) {
      int nr = r + dr[d], nc = c + dc[d];
      if (nr < 0 || nr >= side || nc < 0 || nc >= side) continue;
      if (env.wall(nr, nc)) continue;
      int ni = nr * side + nc;
      if (dist[ni] < 0) {
        dist[ni] = dist[cur] + 1;
        q.push(ni);
      }
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("every goal is reachable from the start within the episode budget") {
  FourRooms env;
  for (int goal : env.eligible_goals()) {
    int d = bfs_distance(env, env.start_cell(), goal);
    CHECK(d > 0);
    CHECK(d <= 100);
  }
}

TEST_CASE("rewards are 0/1 and the return is bounded by T") {
  EnvOptions opt;
  for (const char* name : {"bandits", "fourrooms", "gridobstacle"}) {
    auto env = make_env(name, opt);
    Rng rng(41);
    double total = 0;
    Vec obs = env->reset(env->sample_task(rng));
    for (int t = 0; t < env->spec().episode_len; ++t) {
      StepResult sr = env->step(rng.randint(env->spec().action_count));
      CHECK((sr.reward == 0.0 || sr.reward == 1.0));
      total += sr.reward;
      if (sr.done) break;
    }
    CHECK(total <= env->spec().episode_len);
  }
}

TEST_CASE("the obstacle maze needs all four legs") {
  GridObstacle env;
  Rng rng(43);
  TaskSeed t = env.sample_task(rng);
  env.reset(t);
  CHECK(env.goal_cell() == env.cell_index(1, 23));
  CHECK(env.start_cell() == env.cell_index(23, 1));
  int d = bfs_distance(env, env.start_cell(), env.goal_cell());
  CHECK(d == 44);
  // corridor is sparse: far fewer walkable cells than the full grid
  CHECK(env.walkable_cells().size() < 60);
}

TEST_CASE("holdout goals are excluded from training-time sampling") {
  FourRooms train(true);
  FourRooms eval(false);
  auto held = FourRooms::holdout_cells();
  CHECK(held.size() == 10);
  CHECK(train.eligible_goals().size() == 93);
  for (int cell : held) {
    bool in_train =
        std::find(train.eligible_goals().begin(), train.eligible_goals().end(),
                  cell) != train.eligible_goals().end();
    CHECK(!in_train);
    CHECK(!eval.wall(cell / eval.side(), cell % eval.side()));
  }
}

TEST_CASE("grid one-hot coarsening maps cells sensibly") {
  GridObstacle env;
  Rng rng(47);
  Vec obs = env.reset(env.sample_task(rng));
  Vec small = coarsen_grid_onehot(obs, 25, 13);
  CHECK(small.size() == 338);
  CHECK(small.sum() == 2.0);
  // start (23,1) -> (11,0); goal (1,23) -> (0,11)
  CHECK(small[11 * 13 + 0] == 1.0);
  CHECK(small[169 + 0 * 13 + 11] == 1.0);
}

TEST_CASE("actions out of range are rejected") {
  MovingBandits bandits;
  Rng rng(53);
  bandits.reset(bandits.sample_task(rng));
  CHECK_THROWS_AS(bandits.step(5), ContractError);
  FourRooms rooms;
  rooms.reset(rooms.sample_task(rng));
  CHECK_THROWS_AS(rooms.step(4), ContractError);
  CHECK_THROWS_AS(rooms.step(-1), ContractError);
}
