#pragma once

// The diagnostic clinic as a Markov game: doctors choose a set of tests (and
// whether to attend teaching) each step, pay for tests, gain or lose on the
// norms in force, plan with depth-limited expectimax and act by a Boltzmann
// policy.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "normsim/actions.hpp"
#include "normsim/norms.hpp"
#include "normsim/random.hpp"

namespace normsim::game {

struct RewardParams {
  double diagnostic_cost = 0.1;
  double bonus_prob = 0.5;
  double bonus_value = 0.5;
  /// A patient bonus is possible once an action uses at least this many tests.
  int bonus_min_tests = 4;
  double gamma = 0.9;
  double temperature = 5.0;

  void validate() const;
};

struct AgentState {
  Role role = Role::Assistant;
  std::vector<DiagnosticAction> window;  // most recent first, at most 20
};

struct GameState {
  long time = 0;
  std::vector<AgentState> agents;
};

GameState initial_state(const std::vector<Role>& roles);

void push_window(std::vector<DiagnosticAction>& window, const DiagnosticAction& a);

norms::StateActionRecord make_record(const AgentState& agent, long time,
                                     const DiagnosticAction& action);

/// Deterministic transition: time + 1, each action pushed onto its window.
GameState transition(const GameState& s, const std::vector<DiagnosticAction>& actions);

/// The environment an agent acts in: enforced norms, reward constants and the
/// candidate action set.
struct Environment {
  RewardParams params;
  norms::NormSpace enforced;
  std::vector<DiagnosticAction> actions = candidate_actions();
};

bool bonus_eligible(const DiagnosticAction& a, const RewardParams& p);
/// -cost * |tests| plus the bonus expectation.
double expected_base_reward(const DiagnosticAction& a, const RewardParams& p);

/// Reward with the bonus coin given.
double reward(const AgentState& agent, long time, const DiagnosticAction& a,
              const norms::NormSpace& active, const RewardParams& p, bool bonus_drawn);
/// Reward with the bonus coin drawn from `rng` (one uniform draw per call).
double reward(const AgentState& agent, long time, const DiagnosticAction& a,
              const norms::NormSpace& active, const RewardParams& p, Rng& rng);

/// Depth-limited expectimax over a fixed candidate action set, for an agent
/// that counts the given norms in its reward:
///   Q_d(s, a) = E[R(s, a)] + gamma * max_a' Q_{d-1}(s', a'),  Q_0 = 0.
/// Actions that no norm condition can tell apart in later steps are expanded
/// once, which keeps depth 3 cheap; the values are identical to a full search.
class Planner {
 public:
  Planner(std::vector<DiagnosticAction> actions, RewardParams params);

  const std::vector<DiagnosticAction>& actions() const { return actions_; }
  const RewardParams& params() const { return params_; }

  std::vector<double> plan(const AgentState& agent, long time,
                           std::span<const norms::Norm* const> norms, int depth) const;
  std::vector<double> plan(const AgentState& agent, long time, const norms::Norm& norm,
                           int depth) const;

 private:
  std::vector<DiagnosticAction> actions_;
  RewardParams params_;
  std::vector<double> base_;
};

std::vector<double> rtdp_plan(const AgentState& agent, long time, const norms::Norm& norm,
                              int depth, const RewardParams& params,
                              const std::vector<DiagnosticAction>& actions = candidate_actions());

/// P(a) proportional to exp(Q(a) / temperature), computed with max subtraction.
std::vector<double> boltzmann_policy(std::span<const double> q, double temperature);
std::vector<double> log_boltzmann_policy(std::span<const double> q, double temperature);

std::size_t sample_index(std::span<const double> probs, Rng& rng);

struct Schedule {
  int plan_depth = 3;
  int replan_every = 2;
  int resample_every = 15;
  int practice_every = 100;

  void validate() const;
};

struct TransitionRecord {
  long t = 0;
  std::size_t agent = 0;
  Role role = Role::Assistant;
  DiagnosticAction action;
  double reward = 0.0;
  std::vector<std::string> adhered;
};

void write_trajectory_header(std::ostream& out);
void write_trajectory_row(std::ostream& out, const TransitionRecord& r);

}  // namespace normsim::game
