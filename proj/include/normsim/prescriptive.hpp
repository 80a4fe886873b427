#pragma once

// The prescriptive-norm scenario: doctors adhere to norms drawn from their
// beliefs, act in the clinic game, watch each other, update beliefs and
// periodically practice each norm against the enforced protocols.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "normsim/belief.hpp"
#include "normsim/game.hpp"
#include "normsim/norms.hpp"

namespace normsim::prescriptive {

enum class Adherence {
  Single,       // one norm per agent, drawn in proportion to belief
  Independent,  // each norm followed with probability equal to its belief
};

enum class TargetMode {
  Normalized,  // posterior over the hypothesis space, sums to 1
  Bernoulli,   // per-norm presence posterior
};

std::string_view adherence_name(Adherence a);
Adherence adherence_from_name(std::string_view name);
std::string_view target_mode_name(TargetMode m);
TargetMode target_mode_from_name(std::string_view name);

struct Config {
  int chiefs = 2;
  int assistants = 8;
  long steps = 5000;
  std::size_t n_controls = 6;
  double initial_belief = 0.1;
  Adherence adherence = Adherence::Independent;
  TargetMode target = TargetMode::Bernoulli;
  belief::Normalization normalization = belief::Normalization::Odds;
  int practice_duration = 40;
  int practice_rollouts = 4;
  int max_tests = 4;
  /// Agents plan with the reward they actually receive: the enforced
  /// protocols plus the norms they currently adhere to.
  bool plan_with_enforced = true;
  game::RewardParams reward;
  game::Schedule schedule;
  belief::UpdateParams update;

  void validate() const;
};

/// Optional CSV sinks; null pointers are skipped.
struct Sinks {
  std::ostream* beliefs = nullptr;
  std::ostream* trajectory = nullptr;
  std::ostream* practice = nullptr;
  long belief_every = 10;  // belief rows are written every this many steps
};

struct Result {
  norms::NormSpace hypothesis;
  std::vector<Role> roles;
  std::vector<belief::BeliefState> beliefs;  // final, per agent
  /// Mean final belief over agents, descending.
  std::vector<std::pair<std::string, double>> average;
  /// Largest |b(t+1) - b(t)| over agents, norms and steps, practice included.
  double max_step_change = 0.0;
  std::size_t fallbacks = 0;
};

Result run(const Config& cfg, std::uint64_t seed, const Sinks& sinks = {});

void write_average_table(std::ostream& out, const Result& r);

}  // namespace normsim::prescriptive
