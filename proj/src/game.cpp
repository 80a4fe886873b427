#include "normsim/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "normsim/error.hpp"

namespace normsim::game {

void RewardParams::validate() const {
  require(diagnostic_cost >= 0.0, "reward.diagnostic_cost must be >= 0");
  require(bonus_prob >= 0.0 && bonus_prob <= 1.0, "reward.bonus_prob must be in [0, 1]");
  require(bonus_value >= 0.0, "reward.bonus_value must be >= 0");
  require(bonus_min_tests >= 0 && bonus_min_tests <= kTestCount,
          "reward.bonus_min_tests must be in [0, 7]");
  require(gamma > 0.0 && gamma < 1.0, "reward.gamma must be in (0, 1)");
  require(temperature > 0.0, "reward.temperature must be > 0");
}

void Schedule::validate() const {
  require(plan_depth >= 1, "schedule.plan_depth must be >= 1");
  require(replan_every >= 1 && replan_every <= plan_depth,
          "schedule.replan_every must be in [1, plan_depth]");
  require(resample_every >= 1, "schedule.resample_every must be >= 1");
  require(practice_every >= 1, "schedule.practice_every must be >= 1");
}

GameState initial_state(const std::vector<Role>& roles) {
  GameState s;
  for (auto r : roles) s.agents.push_back({r, {}});
  return s;
}

void push_window(std::vector<DiagnosticAction>& window, const DiagnosticAction& a) {
  window.insert(window.begin(), a);
  if (window.size() > norms::kHistoryWindow) window.pop_back();
}

norms::StateActionRecord make_record(const AgentState& agent, long time,
                                     const DiagnosticAction& action) {
  return {agent.role, time, agent.window, action};
}

GameState transition(const GameState& s, const std::vector<DiagnosticAction>& actions) {
  if (actions.size() != s.agents.size())
    throw DimensionMismatch("one action per agent is required");
  GameState next = s;
  ++next.time;
  for (std::size_t i = 0; i < actions.size(); ++i) push_window(next.agents[i].window, actions[i]);
  return next;
}

bool bonus_eligible(const DiagnosticAction& a, const RewardParams& p) {
  return a.count() >= p.bonus_min_tests && p.bonus_value > 0.0;
}

double expected_base_reward(const DiagnosticAction& a, const RewardParams& p) {
  double r = -p.diagnostic_cost * a.count();
  if (bonus_eligible(a, p)) r += p.bonus_prob * p.bonus_value;
  return r;
}

double reward(const AgentState& agent, long time, const DiagnosticAction& a,
              const norms::NormSpace& active, const RewardParams& p, bool bonus_drawn) {
  double r = -p.diagnostic_cost * a.count();
  if (bonus_drawn && bonus_eligible(a, p)) r += p.bonus_value;
  const auto rec = make_record(agent, time, a);
  for (const auto& n : active.norms()) r += norms::norm_reward(n, rec);
  return r;
}

double reward(const AgentState& agent, long time, const DiagnosticAction& a,
              const norms::NormSpace& active, const RewardParams& p, Rng& rng) {
  const bool coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p.bonus_prob;
  return reward(agent, time, a, active, p, coin);
}

Planner::Planner(std::vector<DiagnosticAction> actions, RewardParams params)
    : actions_(std::move(actions)), params_(params) {
  require(!actions_.empty(), "planner needs at least one action");
  params_.validate();
  for (const auto& a : actions_) base_.push_back(expected_base_reward(a, params_));
}

namespace {

// Shared state of one planning call.
struct Search {
  const std::vector<DiagnosticAction>& actions;
  const std::vector<double>& base;
  std::span<const norms::Norm* const> norms;
  double gamma;
  std::vector<std::vector<char>> complies;  // [norm][action], for history-free consequences
  std::vector<char> history_consequence;    // consequence depends on the window
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::size_t> class_of;

  std::vector<char> triggers(const norms::StateActionRecord& rec) const {
    std::vector<char> out(norms.size());
    for (std::size_t n = 0; n < norms.size(); ++n) out[n] = norms[n]->triggered(rec);
    return out;
  }

  double immediate(std::size_t a, const std::vector<char>& trig,
                   norms::StateActionRecord& rec) const {
    double r = base[a];
    for (std::size_t n = 0; n < norms.size(); ++n) {
      if (!trig[n]) continue;
      bool ok;
      if (history_consequence[n]) {
        rec.action = actions[a];
        ok = norms[n]->satisfied_by(rec);
      } else {
        ok = complies[n][a];
      }
      r += ok ? norms[n]->compliance_reward : -norms[n]->violation_cost;
    }
    return r;
  }

  double value(Role role, long time, const std::vector<DiagnosticAction>& window,
               int depth) const {
    if (depth <= 0) return 0.0;
    norms::StateActionRecord rec{role, time, window, {}};
    const auto trig = triggers(rec);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& members : classes) {
      double imm = -std::numeric_limits<double>::infinity();
      for (auto a : members) imm = std::max(imm, immediate(a, trig, rec));
      double future = 0.0;
      if (depth > 1) {
        auto next = window;
        push_window(next, actions[members.front()]);
        future = value(role, time + 1, next, depth - 1);
      }
      best = std::max(best, imm + gamma * future);
    }
    return best;
  }
};

}  // namespace

std::vector<double> Planner::plan(const AgentState& agent, long time,
                                  std::span<const norms::Norm* const> norms, int depth) const {
  require(depth >= 1, "planning depth must be >= 1");
  Search s{actions_, base_, norms, params_.gamma, {}, {}, {}, {}};

  TestMask relevant = 0;
  bool counts = false;
  norms::StateActionRecord rec{agent.role, time, agent.window, {}};
  for (const auto* n : norms) {
    relevant |= n->condition.history_tests() | n->consequence.history_tests();
    counts = counts || n->condition.history_counts() || n->consequence.history_counts();
    s.history_consequence.push_back(n->consequence.history_depth() > 0);
    std::vector<char> row(actions_.size());
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      rec.action = actions_[a];
      row[a] = n->satisfied_by(rec);
    }
    s.complies.push_back(std::move(row));
  }

  // Group actions by everything a later condition could observe about them.
  std::map<int, std::size_t> class_index;
  s.class_of.resize(actions_.size());
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    int key = actions_[a].tests & relevant;
    if (counts) key |= actions_[a].count() << 8;
    auto [it, fresh] = class_index.emplace(key, s.classes.size());
    if (fresh) s.classes.emplace_back();
    s.classes[it->second].push_back(a);
    s.class_of[a] = it->second;
  }

  const auto trig = s.triggers(rec);
  std::vector<double> future(s.classes.size(), 0.0);
  if (depth > 1) {
    for (std::size_t c = 0; c < s.classes.size(); ++c) {
      auto next = agent.window;
      push_window(next, actions_[s.classes[c].front()]);
      future[c] = s.value(agent.role, time + 1, next, depth - 1);
    }
  }
  std::vector<double> q(actions_.size());
  for (std::size_t a = 0; a < actions_.size(); ++a)
    q[a] = s.immediate(a, trig, rec) + params_.gamma * future[s.class_of[a]];
  return q;
}

std::vector<double> Planner::plan(const AgentState& agent, long time, const norms::Norm& norm,
                                  int depth) const {
  const norms::Norm* one[] = {&norm};
  return plan(agent, time, one, depth);
}

std::vector<double> rtdp_plan(const AgentState& agent, long time, const norms::Norm& norm,
                              int depth, const RewardParams& params,
                              const std::vector<DiagnosticAction>& actions) {
  return Planner(actions, params).plan(agent, time, norm, depth);
}

std::vector<double> log_boltzmann_policy(std::span<const double> q, double temperature) {
  require(!q.empty(), "boltzmann_policy needs at least one value");
  require(temperature > 0.0, "temperature must be > 0");
  const double m = *std::max_element(q.begin(), q.end());
  double s = 0.0;
  for (double v : q) s += std::exp((v - m) / temperature);
  const double log_z = std::log(s);
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = (q[i] - m) / temperature - log_z;
  return out;
}

std::vector<double> boltzmann_policy(std::span<const double> q, double temperature) {
  auto p = log_boltzmann_policy(q, temperature);
  for (auto& v : p) v = std::exp(v);
  return p;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

void write_trajectory_header(std::ostream& out) {
  out << "t,agent_id,role,tests_mask,teaching,reward,adhered_norm_id\n";
}

void write_trajectory_row(std::ostream& out, const TransitionRecord& r) {
  out << r.t << ',' << r.agent << ',' << role_name(r.role) << ',' << int(r.action.tests) << ','
      << int(r.action.teaching) << ',' << r.reward << ',';
  for (std::size_t i = 0; i < r.adhered.size(); ++i) out << (i ? "|" : "") << r.adhered[i];
  out << '\n';
}

}  // namespace normsim::game
