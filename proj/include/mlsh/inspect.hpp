#pragma once

#include <string>
#include <vector>

#include "mlsh/env.hpp"
#include "mlsh/hierarchy.hpp"

namespace mlsh {

struct SubSpecialization {
  int majority_goal = 0;              // goal slot this sub-policy mostly approaches
  double score = 0;                   // fraction of probes approaching it
  std::vector<double> approach_frac;  // per goal slot
};

/// Quantitative proxy for the arrow-field plots: over random probe states,
/// the fraction of states where each sub-policy's greedy action strictly
/// decreases the distance to each goal slot.
struct SpecializationReport {
  std::vector<SubSpecialization> subs;
  double mean_score = 0;
  bool distinct_majorities = false;
  int probes = 0;
};

SpecializationReport bandits_specialization(const SubPolicySet& subs,
                                            int probes, uint64_t probe_seed);

void write_specialization_json(const SpecializationReport& rep,
                               const std::string& path);

/// Arrow-field data: greedy movement of every sub-policy on a grid of agent
/// positions for one fixed pair of goals. CSV: sub,agent_x,agent_y,dx,dy.
void write_bandits_arrow_csv(const SubPolicySet& subs, const std::string& path,
                             const Eigen::Vector2d& goal0,
                             const Eigen::Vector2d& goal1, int grid = 21);

/// Greedy action of every sub-policy on each walkable cell for one task.
/// CSV: sub,row,col,action,dr,dc.
void write_grid_greedy_csv(const SubPolicySet& subs, const std::string& env_name,
                           TaskSeed task, const std::string& path);

}  // namespace mlsh
