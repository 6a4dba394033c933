#include "mlsh/inspect.hpp"

#include <fstream>

#include <json.hpp>

namespace mlsh {

namespace {

int greedy_action(const NetParams& net, const Vec& obs) {
  Eigen::Index best = 0;
  forward(net, obs).first.maxCoeff(&best);
  return static_cast<int>(best);
}

Vec bandits_obs(const Eigen::Vector2d& agent, const Eigen::Vector2d& g0,
                const Eigen::Vector2d& g1) {
  Vec o(6);
  o << agent.x(), agent.y(), g0.x(), g0.y(), g1.x(), g1.y();
  return o;
}

}  // namespace

SpecializationReport bandits_specialization(const SubPolicySet& subs,
                                            int probes, uint64_t probe_seed) {
  require(subs.count() >= 1, "specialization: empty sub-policy set");
  require(probes > 0, "specialization: probes must be positive");
  const int k = subs.count();
  Rng rng(derive_seed(probe_seed, 99));
  std::vector<std::vector<long>> approach(k, std::vector<long>(2, 0));

  for (int p = 0; p < probes; ++p) {
    Eigen::Vector2d agent{rng.uniform(), rng.uniform()};
    Eigen::Vector2d goals[2];
    for (auto& g : goals) g = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    Vec obs = bandits_obs(agent, goals[0], goals[1]);
    for (int i = 0; i < k; ++i) {
      Eigen::Vector2d next =
          MovingBandits::apply_action(agent, greedy_action(subs.nets[i], obs));
      for (int j = 0; j < 2; ++j)
        if ((next - goals[j]).norm() < (agent - goals[j]).norm())
          approach[i][j] += 1;
    }
  }

  SpecializationReport rep;
  rep.probes = probes;
  for (int i = 0; i < k; ++i) {
    SubSpecialization s;
    s.approach_frac = {static_cast<double>(approach[i][0]) / probes,
                       static_cast<double>(approach[i][1]) / probes};
    s.majority_goal = approach[i][1] > approach[i][0] ? 1 : 0;
    s.score = s.approach_frac[s.majority_goal];
    rep.mean_score += s.score / k;
    rep.subs.push_back(std::move(s));
  }
  bool has[2] = {false, false};
  for (const auto& s : rep.subs) has[s.majority_goal] = true;
  rep.distinct_majorities = k >= 2 && has[0] && has[1];
  return rep;
}

void write_specialization_json(const SpecializationReport& rep,
                               const std::string& path) {
  nlohmann::ordered_json j;
  j["probes"] = rep.probes;
  j["mean_score"] = rep.mean_score;
  j["distinct_majorities"] = rep.distinct_majorities;
  j["subs"] = nlohmann::ordered_json::array();
  for (const auto& s : rep.subs) {
    nlohmann::ordered_json js;
    js["majority_goal"] = s.majority_goal;
    js["score"] = s.score;
    js["approach_frac"] = s.approach_frac;
    j["subs"].push_back(js);
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << j.dump(2) << "\n";
}

void write_bandits_arrow_csv(const SubPolicySet& subs, const std::string& path,
                             const Eigen::Vector2d& goal0,
                             const Eigen::Vector2d& goal1, int grid) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << "sub,agent_x,agent_y,dx,dy\n";
  for (int i = 0; i < subs.count(); ++i) {
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        Eigen::Vector2d agent{gx / double(grid - 1), gy / double(grid - 1)};
        Vec obs = bandits_obs(agent, goal0, goal1);
        Eigen::Vector2d next = MovingBandits::apply_action(
            agent, greedy_action(subs.nets[i], obs));
        Eigen::Vector2d d = next - agent;
        os << i << ',' << agent.x() << ',' << agent.y() << ',' << d.x() << ','
           << d.y() << "\n";
      }
    }
  }
}

void write_grid_greedy_csv(const SubPolicySet& subs, const std::string& env_name,
                           TaskSeed task, const std::string& path) {
  auto env = make_env(env_name);
  auto* grid = dynamic_cast<GridNav*>(env.get());
  require(grid != nullptr, "greedy csv: not a grid environment");
  grid->reset(task);
  static constexpr int kDr[4] = {-1, 1, 0, 0};
  static constexpr int kDc[4] = {0, 0, -1, 1};

  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << "sub,row,col,action,dr,dc\n";
  const int side = grid->side();
  const int cells = side * side;
  for (int i = 0; i < subs.count(); ++i) {
    for (int cell : grid->walkable_cells()) {
      Vec obs = Vec::Zero(2 * cells);
      obs[cell] = 1.0;
      obs[cells + grid->goal_cell()] = 1.0;
      if (subs.nets[i].input_dim() != obs.size()) {
        int to_side = static_cast<int>(
            std::lround(std::sqrt(subs.nets[i].input_dim() / 2.0)));
        obs = coarsen_grid_onehot(obs, side, to_side);
      }
      int a = greedy_action(subs.nets[i], obs);
      os << i << ',' << cell / side << ',' << cell % side << ',' << a << ','
         << kDr[a] << ',' << kDc[a] << "\n";
    }
  }
}

}  // namespace mlsh
