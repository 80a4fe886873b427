#include "normsim/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "normsim/error.hpp"

namespace normsim::belief {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  constexpr double kEdge = 1e-12;
  p = std::clamp(p, kEdge, 1.0 - kEdge);
  return std::log(p / (1.0 - p));
}

std::size_t observed_index(const game::Planner& planner, const DiagnosticAction& a) {
  auto i = action_index(planner.actions(), a);
  if (!i) throw UnknownAction("action " + a.to_string() + " is not a candidate action");
  return *i;
}

}  // namespace

void UpdateParams::validate() const {
  require(beta1 >= 0.0 && beta1 < 1.0, "update.beta1 must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "update.beta2 must be in [0, 1)");
  require(base_rate > 0.0, "update.base_rate must be > 0");
  require(epsilon > 0.0, "update.epsilon must be > 0");
  require(practice_factor >= 0.0 && practice_factor <= 1.0,
          "update.practice_factor must be in [0, 1]");
  require(efficacy_scale > 0.0, "update.efficacy_scale must be > 0");
}

BeliefState BeliefState::uniform(std::vector<std::string> ids, double value) {
  require(value >= 0.0 && value <= 1.0, "initial belief must be in [0, 1]");
  BeliefState s;
  const auto n = ids.size();
  s.ids = std::move(ids);
  s.b.assign(n, value);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

std::size_t BeliefState::index_of(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw PreconditionError("no belief for norm '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

double log_action_likelihood(const game::Planner& planner, const game::AgentState& agent,
                             long time, const DiagnosticAction& observed,
                             std::span<const norms::Norm* const> followed, int depth) {
  const auto i = observed_index(planner, observed);
  const auto q = planner.plan(agent, time, followed, depth);
  return game::log_boltzmann_policy(q, planner.params().temperature)[i];
}

double action_likelihood(const game::Planner& planner, const game::AgentState& agent, long time,
                         const DiagnosticAction& observed, const norms::Norm& norm, int depth) {
  const norms::Norm* one[] = {&norm};
  return std::exp(log_action_likelihood(planner, agent, time, observed, one, depth));
}

Target posterior_target(const BeliefState& s, const std::vector<std::vector<double>>& log_lik) {
  require(!log_lik.empty(), "posterior_target needs at least one observation");
  const auto n = s.size();
  std::vector<double> score(n);
  for (std::size_t k = 0; k < n; ++k) {
    score[k] = s.b[k] > 0.0 ? std::log(s.b[k]) : -std::numeric_limits<double>::infinity();
    for (const auto& row : log_lik) {
      if (row.size() != n) throw DimensionMismatch("likelihood row does not match the beliefs");
      score[k] += row[k];
    }
  }
  Target out;
  const double top = *std::max_element(score.begin(), score.end());
  if (!std::isfinite(top)) {
    out.value.assign(n, 1.0 / static_cast<double>(n));
    out.fallback = true;
    return out;
  }
  double z = 0.0;
  for (double x : score) z += std::exp(x - top);
  out.value.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.value[k] = std::exp(score[k] - top) / z;
  return out;
}

std::vector<double> bernoulli_target(const BeliefState& s,
                                     const std::vector<std::vector<double>>& log_lik,
                                     std::span<const double> log_lik_none) {
  if (log_lik.size() != log_lik_none.size())
    throw DimensionMismatch("one baseline likelihood per observation is required");
  const auto n = s.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (s.b[k] <= 0.0 || s.b[k] >= 1.0) {
      out[k] = s.b[k];  // certainty does not move under Bayes
      continue;
    }
    double x = logit(s.b[k]);
    for (std::size_t o = 0; o < log_lik.size(); ++o) {
      if (log_lik[o].size() != n) throw DimensionMismatch("likelihood row does not match the beliefs");
      x += log_lik[o][k] - log_lik_none[o];
    }
    out[k] = logistic(x);
  }
  return out;
}

BeliefState smooth_update(const BeliefState& s, std::span<const double> target,
                          const UpdateParams& p) {
  if (target.size() != s.size()) throw DimensionMismatch("target does not match the beliefs");
  BeliefState out = s;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double g = target[k] - s.b[k];
    out.m[k] = p.beta1 * s.m[k] + (1.0 - p.beta1) * g;
    out.v[k] = p.beta2 * s.v[k] + (1.0 - p.beta2) * g * g;
    const double rate = p.base_rate / (std::sqrt(out.v[k]) + p.epsilon);
    out.b[k] = std::clamp(s.b[k] + rate * out.m[k], 0.0, 1.0);
  }
  ++out.t;
  return out;
}

std::string_view normalization_name(Normalization n) {
  switch (n) {
    case Normalization::Unit: return "unit";
    case Normalization::Mass: return "mass";
    case Normalization::Odds: return "odds";
  }
  return "unit";
}

Normalization normalization_from_name(std::string_view name) {
  if (name == "unit") return Normalization::Unit;
  if (name == "mass") return Normalization::Mass;
  if (name == "odds") return Normalization::Odds;
  throw PreconditionError("unknown normalization '" + std::string(name) +
                          "' (expected unit, mass or odds)");
}

Regulated practice_regulate(const BeliefState& s, const std::map<std::string, double>& efficacy,
                            const UpdateParams& p, Normalization mode) {
  for (const auto& [id, e] : efficacy) {
    s.index_of(id);
    require(e >= 0.0 && e <= 1.0, "efficacy of '" + id + "' must be in [0, 1]");
  }
  const auto n = s.size();
  std::vector<double> alpha(n, 1.0);
  for (std::size_t k = 0; k < n; ++k)
    if (auto it = efficacy.find(s.ids[k]); it != efficacy.end())
      alpha[k] = p.practice_factor + (1.0 - p.practice_factor) * it->second;

  Regulated out{s, false};
  std::vector<double> scaled(n);
  for (std::size_t k = 0; k < n; ++k) scaled[k] = alpha[k] * s.b[k];
  const double total = std::accumulate(scaled.begin(), scaled.end(), 0.0);

  switch (mode) {
    case Normalization::Unit:
    case Normalization::Mass: {
      if (total <= 0.0) {
        out.state.b.assign(n, 1.0 / static_cast<double>(n));
        out.fallback = true;
        break;
      }
      double target_mass = 1.0;
      if (mode == Normalization::Mass) target_mass = std::accumulate(s.b.begin(), s.b.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k)
        out.state.b[k] = std::min(1.0, scaled[k] * target_mass / total);
      break;
    }
    case Normalization::Odds: {
      // Each belief is a two-outcome distribution {present, absent}; absence
      // is weighted by the mean factor, so an average norm keeps its belief.
      const double mean_alpha = std::accumulate(alpha.begin(), alpha.end(), 0.0) / n;
      for (std::size_t k = 0; k < n; ++k) {
        const double z = scaled[k] + mean_alpha * (1.0 - s.b[k]);
        out.state.b[k] = z > 0.0 ? scaled[k] / z : s.b[k];
      }
      break;
    }
  }
  return out;
}

namespace {

// Best expected base reward among actions that do (or do not) satisfy the norm.
std::size_t greedy_action(const game::Environment& env, const norms::StateActionRecord& rec,
                          const norms::Norm& norm, bool comply) {
  const bool trig = norm.triggered(rec);
  std::size_t best = env.actions.size();
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < env.actions.size(); ++i) {
    if (trig) {
      norms::StateActionRecord r = rec;
      r.action = env.actions[i];
      if (norm.satisfied_by(r) != comply) continue;
    }
    const double v = game::expected_base_reward(env.actions[i], env.params);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  // No action can break (or meet) the norm here: fall back to the unconstrained choice.
  if (best == env.actions.size()) {
    for (std::size_t i = 0; i < env.actions.size(); ++i) {
      const double v = game::expected_base_reward(env.actions[i], env.params);
      if (v > best_value) {
        best_value = v;
        best = i;
      }
    }
  }
  return best;
}

double rollout(game::AgentState agent, long time, const game::Environment& env,
               const norms::Norm& norm, bool comply, const std::vector<char>& coins) {
  double total = 0.0;
  for (char coin : coins) {
    const auto rec = game::make_record(agent, time, {});
    const auto& a = env.actions[greedy_action(env, rec, norm, comply)];
    total += game::reward(agent, time, a, env.enforced, env.params, coin != 0);
    game::push_window(agent.window, a);
    ++time;
  }
  return total;
}

}  // namespace

PracticeOutcome practice_trial(const game::AgentState& agent, long time,
                               const game::Environment& env, const norms::Norm& norm,
                               int duration, const UpdateParams& p, Rng& rng, int rollouts) {
  require(duration >= 1, "practice duration must be >= 1");
  require(rollouts >= 1, "practice rollouts must be >= 1");
  require(!env.actions.empty(), "environment has no actions");
  PracticeOutcome out;
  std::bernoulli_distribution coin(env.params.bonus_prob);
  for (int r = 0; r < rollouts; ++r) {
    std::vector<char> coins(static_cast<std::size_t>(duration));
    for (auto& c : coins) c = coin(rng);
    out.adhere_return += rollout(agent, time, env, norm, true, coins);
    out.violate_return += rollout(agent, time, env, norm, false, coins);
  }
  out.adhere_return /= rollouts;
  out.violate_return /= rollouts;
  out.efficacy = logistic((out.adhere_return - out.violate_return) / p.efficacy_scale);
  return out;
}

void write_belief_header(std::ostream& out) {
  out << "t,agent_id,norm_id,belief,momentum,second_moment\n";
}

void write_belief_rows(std::ostream& out, long t, std::size_t agent, const BeliefState& s) {
  for (std::size_t k = 0; k < s.size(); ++k)
    out << t << ',' << agent << ',' << s.ids[k] << ',' << s.b[k] << ',' << s.m[k] << ','
        << s.v[k] << '\n';
}

void write_practice_header(std::ostream& out) {
  out << "t,agent_id,norm_id,adhere_return,violate_return,efficacy\n";
}

void write_practice_row(std::ostream& out, long t, std::size_t agent, const std::string& norm_id,
                        const PracticeOutcome& o) {
  out << t << ',' << agent << ',' << norm_id << ',' << o.adhere_return << ',' << o.violate_return
      << ',' << o.efficacy << '\n';
}

}  // namespace normsim::belief
