#pragma once

// Norm beliefs: Bayesian targets from observed behaviour, momentum and
// adaptive-rate smoothing, and practice-based regulation.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "normsim/game.hpp"
#include "normsim/norms.hpp"
#include "normsim/random.hpp"

namespace normsim::belief {

struct UpdateParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double base_rate = 0.001;
  double epsilon = 1e-8;
  /// Floor of the per-norm regulation factor: alpha(n) = f + (1 - f) * efficacy(n).
  double practice_factor = 0.7;
  /// Reward units per logit of efficacy.
  double efficacy_scale = 1.0;

  void validate() const;
};

/// Per-norm belief, momentum and second moment, keyed by norm id.
struct BeliefState {
  std::vector<std::string> ids;
  std::vector<double> b;
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  static BeliefState uniform(std::vector<std::string> ids, double value);
  std::size_t size() const { return ids.size(); }
  std::size_t index_of(const std::string& id) const;  // throws PreconditionError
  double at(const std::string& id) const { return b[index_of(id)]; }
};

/// pi(a | s, n): Boltzmann probability of `observed` when the acting agent
/// follows only `norm`. Throws UnknownAction if `observed` is not a candidate.
double action_likelihood(const game::Planner& planner, const game::AgentState& agent, long time,
                         const DiagnosticAction& observed, const norms::Norm& norm, int depth);

/// log pi(a | s, norms), for any set of followed norms (empty = no norm).
double log_action_likelihood(const game::Planner& planner, const game::AgentState& agent,
                             long time, const DiagnosticAction& observed,
                             std::span<const norms::Norm* const> followed, int depth);

struct Target {
  std::vector<double> value;
  bool fallback = false;  // the posterior vanished and a uniform target was used
};

/// Normalized posterior over the hypothesis space:
///   target(n) ∝ b(n) * prod_obs pi(a_obs | n),
/// from log_lik[obs][norm]. Sums to 1.
Target posterior_target(const BeliefState& s, const std::vector<std::vector<double>>& log_lik);

/// Mean-field presence posterior of each norm on its own: norm n present
/// (observed agents follow n) against absent (they follow no norm),
///   target(n) = sigmoid(logit b(n) + sum_obs [log pi(a|n) - log pi(a|none)]).
std::vector<double> bernoulli_target(const BeliefState& s,
                                     const std::vector<std::vector<double>>& log_lik,
                                     std::span<const double> log_lik_none);

/// g = target - b; m, v moving averages of g and g^2; b += alpha / (sqrt(v) + eps) * m.
BeliefState smooth_update(const BeliefState& s, std::span<const double> target,
                          const UpdateParams& p);

enum class Normalization {
  Unit,  // b'' = b' / sum b'
  Mass,  // b'' = b' * sum b / sum b'
  Odds,  // per-norm two-outcome normalization against the mean factor
};

std::string_view normalization_name(Normalization n);
Normalization normalization_from_name(std::string_view name);

struct Regulated {
  BeliefState state;
  bool fallback = false;
};

/// b' = alpha(n) * b, then normalized. Missing efficacy entries count as 1.
Regulated practice_regulate(const BeliefState& s, const std::map<std::string, double>& efficacy,
                            const UpdateParams& p, Normalization mode = Normalization::Unit);

struct PracticeOutcome {
  double adhere_return = 0.0;
  double violate_return = 0.0;
  double efficacy = 0.5;
};

/// Two greedy rollouts from the agent's current state over `duration` steps,
/// scored with the environment's enforced norms and the same bonus coins:
/// one meets `norm` whenever it triggers, the other breaks it whenever it
/// triggers. Efficacy = logistic((adhere - violate) / efficacy_scale),
/// averaged returns over `rollouts` coin sequences.
PracticeOutcome practice_trial(const game::AgentState& agent, long time,
                               const game::Environment& env, const norms::Norm& norm,
                               int duration, const UpdateParams& p, Rng& rng, int rollouts = 1);

void write_belief_header(std::ostream& out);
void write_belief_rows(std::ostream& out, long t, std::size_t agent, const BeliefState& s);
void write_practice_header(std::ostream& out);
void write_practice_row(std::ostream& out, long t, std::size_t agent, const std::string& norm_id,
                        const PracticeOutcome& o);

}  // namespace normsim::belief
