#pragma once

// Reference implementations written directly from the model equations, kept
// separate from the library code they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "normsim/game.hpp"
#include "normsim/norms.hpp"

namespace oracle {

using namespace normsim;

// Full expectimax over every action sequence; no grouping of actions, no
// caching. The bonus coin is averaged by evaluating both outcomes.
inline double expectimax_value(const game::AgentState& agent, long t,
                               const norms::NormSpace& active, int depth,
                               const game::RewardParams& p,
                               const std::vector<DiagnosticAction>& actions);

inline double expectimax_q(const game::AgentState& agent, long t, const DiagnosticAction& a,
                           const norms::NormSpace& active, int depth,
                           const game::RewardParams& p,
                           const std::vector<DiagnosticAction>& actions) {
  const double hit = game::reward(agent, t, a, active, p, true);
  const double miss = game::reward(agent, t, a, active, p, false);
  const double r = p.bonus_prob * hit + (1.0 - p.bonus_prob) * miss;
  if (depth <= 1) return r;
  game::AgentState next = agent;
  next.window.insert(next.window.begin(), a);
  if (next.window.size() > 20) next.window.resize(20);
  return r + p.gamma * expectimax_value(next, t + 1, active, depth - 1, p, actions);
}

inline double expectimax_value(const game::AgentState& agent, long t,
                               const norms::NormSpace& active, int depth,
                               const game::RewardParams& p,
                               const std::vector<DiagnosticAction>& actions) {
  if (depth <= 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : actions)
    best = std::max(best, expectimax_q(agent, t, a, active, depth, p, actions));
  return best;
}

inline std::vector<double> expectimax(const game::AgentState& agent, long t,
                                      const norms::NormSpace& active, int depth,
                                      const game::RewardParams& p,
                                      const std::vector<DiagnosticAction>& actions) {
  std::vector<double> q;
  for (const auto& a : actions) q.push_back(expectimax_q(agent, t, a, active, depth, p, actions));
  return q;
}

// Belief smoothing, one norm at a time:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
//   b <- clip(b + a / (sqrt(v) + eps) * m, 0, 1),  g = target - b.
struct AdamRef {
  double b1, b2, alpha, eps;
  std::vector<double> b, m, v;

  void step(const std::vector<double>& target) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double g = target[i] - b[i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      double next = b[i] + alpha / (std::sqrt(v[i]) + eps) * m[i];
      if (next < 0) next = 0;
      if (next > 1) next = 1;
      b[i] = next;
    }
  }
};

// Normalized Bayes target: prior times the product of likelihoods.
inline std::vector<double> bayes_target(const std::vector<double>& prior,
                                        const std::vector<std::vector<double>>& lik) {
  std::vector<double> post = prior;
  for (const auto& row : lik)
    for (std::size_t k = 0; k < post.size(); ++k) post[k] *= row[k];
  double z = 0;
  for (double x : post) z += x;
  if (z == 0) return std::vector<double>(post.size(), 1.0 / post.size());  // no mass: uniform
  for (double& x : post) x /= z;
  return post;
}

}  // namespace oracle
