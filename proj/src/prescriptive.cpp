#include "normsim/prescriptive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "normsim/error.hpp"

namespace normsim::prescriptive {

std::string_view adherence_name(Adherence a) {
  return a == Adherence::Single ? "single" : "independent";
}

Adherence adherence_from_name(std::string_view name) {
  if (name == "single") return Adherence::Single;
  if (name == "independent") return Adherence::Independent;
  throw PreconditionError("unknown adherence '" + std::string(name) +
                          "' (expected single or independent)");
}

std::string_view target_mode_name(TargetMode m) {
  return m == TargetMode::Normalized ? "normalized" : "bernoulli";
}

TargetMode target_mode_from_name(std::string_view name) {
  if (name == "normalized") return TargetMode::Normalized;
  if (name == "bernoulli") return TargetMode::Bernoulli;
  throw PreconditionError("unknown target '" + std::string(name) +
                          "' (expected normalized or bernoulli)");
}

void Config::validate() const {
  require(chiefs >= 0 && assistants >= 0, "prescriptive.chiefs and assistants must be >= 0");
  require(chiefs + assistants >= 2, "prescriptive scenario needs at least 2 agents");
  require(steps >= 0, "prescriptive.steps must be >= 0");
  require(n_controls <= 30, "prescriptive.n_controls must be <= 30");
  require(initial_belief > 0.0 && initial_belief < 1.0,
          "prescriptive.initial_belief must be in (0, 1)");
  require(practice_duration >= 1, "prescriptive.practice_duration must be >= 1");
  require(practice_rollouts >= 1, "prescriptive.practice_rollouts must be >= 1");
  require(max_tests >= 1 && max_tests <= kTestCount, "prescriptive.max_tests must be in [1, 7]");
  reward.validate();
  schedule.validate();
  update.validate();
}

namespace {

std::vector<const norms::Norm*> draw_adherence(const norms::NormSpace& space,
                                               const belief::BeliefState& s, Adherence mode,
                                               Rng& rng) {
  std::vector<const norms::Norm*> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (mode == Adherence::Independent) {
    for (std::size_t k = 0; k < space.size(); ++k)
      if (u(rng) < s.b[k]) out.push_back(&space[k]);
    return out;
  }
  double total = 0.0;
  for (double b : s.b) total += b;
  if (total <= 0.0) return out;
  double x = u(rng) * total;
  for (std::size_t k = 0; k < space.size(); ++k) {
    x -= s.b[k];
    if (x < 0.0) {
      out.push_back(&space[k]);
      break;
    }
  }
  if (out.empty()) out.push_back(&space[space.size() - 1]);
  return out;
}

std::vector<std::string> ids_of(const std::vector<const norms::Norm*>& ns) {
  std::vector<std::string> out;
  for (const auto* n : ns) out.push_back(n->id);
  return out;
}

double max_change(const belief::BeliefState& a, const belief::BeliefState& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.b[k] - b.b[k]));
  return m;
}

}  // namespace

Result run(const Config& cfg, std::uint64_t seed, const Sinks& sinks) {
  cfg.validate();
  Result res;

  {
    auto pick = make_rng(seed, {0xC0});
    res.hypothesis = norms::sample_active_norms(norms::build_norm_space(true), cfg.n_controls, pick);
  }
  const auto& space = res.hypothesis;

  game::Environment env;
  env.params = cfg.reward;
  env.actions = candidate_actions(cfg.max_tests);
  {
    std::vector<norms::Norm> cores;
    for (const auto& n : space.norms())
      if (n.is_core) cores.push_back(n);
    if (!cores.empty()) env.enforced = norms::NormSpace(cores);
  }
  const game::Planner planner(env.actions, env.params);

  for (int i = 0; i < cfg.chiefs; ++i) res.roles.push_back(Role::Chief);
  for (int i = 0; i < cfg.assistants; ++i) res.roles.push_back(Role::Assistant);
  const std::size_t n_agents = res.roles.size();

  auto state = game::initial_state(res.roles);
  res.beliefs.assign(n_agents, belief::BeliefState::uniform(space.ids(), cfg.initial_belief));
  std::vector<std::vector<const norms::Norm*>> adhered(n_agents), counted(n_agents);
  std::vector<long> plan_time(n_agents, 0);
  std::vector<Rng> act_rng, coin_rng, practice_rng;
  for (std::size_t i = 0; i < n_agents; ++i) {
    act_rng.push_back(make_rng(seed, {1, i}));
    coin_rng.push_back(make_rng(seed, {2, i}));
    practice_rng.push_back(make_rng(seed, {3, i}));
  }

  if (sinks.beliefs) belief::write_belief_header(*sinks.beliefs);
  if (sinks.trajectory) game::write_trajectory_header(*sinks.trajectory);
  if (sinks.practice) belief::write_practice_header(*sinks.practice);

  const int depth = cfg.schedule.plan_depth;
  const std::size_t h = space.size();

  for (long t = 0; t < cfg.steps; ++t) {
    if (sinks.beliefs && t % sinks.belief_every == 0)
      for (std::size_t i = 0; i < n_agents; ++i)
        belief::write_belief_rows(*sinks.beliefs, t, i, res.beliefs[i]);

    // Act.
    std::vector<DiagnosticAction> actions(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
      if (t % cfg.schedule.resample_every == 0) {
        adhered[i] = draw_adherence(space, res.beliefs[i], cfg.adherence, act_rng[i]);
        counted[i] = adhered[i];
        if (cfg.plan_with_enforced)
          for (const auto& n : env.enforced.norms())
            if (std::none_of(adhered[i].begin(), adhered[i].end(),
                             [&](const norms::Norm* a) { return a->id == n.id; }))
              counted[i].push_back(&n);
        plan_time[i] = t;
      }
      if (t - plan_time[i] >= cfg.schedule.replan_every) plan_time[i] = t;
      // A plan made at plan_time keeps being followed, so its remaining horizon shrinks.
      const int d = depth - static_cast<int>(t - plan_time[i]);
      const auto q = planner.plan(state.agents[i], t, counted[i], d);
      const auto p = game::boltzmann_policy(q, env.params.temperature);
      actions[i] = env.actions[game::sample_index(p, act_rng[i])];
      const double r =
          game::reward(state.agents[i], t, actions[i], env.enforced, env.params, coin_rng[i]);
      if (sinks.trajectory)
        game::write_trajectory_row(*sinks.trajectory,
                                   {t, i, res.roles[i], actions[i], r, ids_of(adhered[i])});
    }

    // How likely each agent's action is under each single norm, and under none.
    std::vector<std::vector<double>> ll(n_agents, std::vector<double>(h));
    std::vector<double> ll_none(n_agents);
    for (std::size_t j = 0; j < n_agents; ++j) {
      for (std::size_t k = 0; k < h; ++k) {
        const norms::Norm* one[] = {&space[k]};
        ll[j][k] = belief::log_action_likelihood(planner, state.agents[j], t, actions[j], one, depth);
      }
      ll_none[j] = belief::log_action_likelihood(planner, state.agents[j], t, actions[j], {}, depth);
    }

    for (std::size_t i = 0; i < n_agents; ++i) {
      std::vector<std::vector<double>> rows;
      std::vector<double> none;
      for (std::size_t j = 0; j < n_agents; ++j) {
        if (j == i) continue;
        rows.push_back(ll[j]);
        none.push_back(ll_none[j]);
      }
      std::vector<double> target;
      if (cfg.target == TargetMode::Bernoulli) {
        target = belief::bernoulli_target(res.beliefs[i], rows, none);
      } else {
        auto pt = belief::posterior_target(res.beliefs[i], rows);
        res.fallbacks += pt.fallback;
        target = std::move(pt.value);
      }
      auto next = belief::smooth_update(res.beliefs[i], target, cfg.update);
      res.max_step_change = std::max(res.max_step_change, max_change(res.beliefs[i], next));
      res.beliefs[i] = std::move(next);
    }

    state = game::transition(state, actions);

    // Practice.
    if (state.time % cfg.schedule.practice_every == 0) {
      for (std::size_t i = 0; i < n_agents; ++i) {
        std::map<std::string, double> efficacy;
        for (const auto& n : space.norms()) {
          const auto o = belief::practice_trial(state.agents[i], state.time, env, n,
                                                cfg.practice_duration, cfg.update,
                                                practice_rng[i], cfg.practice_rollouts);
          efficacy[n.id] = o.efficacy;
          if (sinks.practice) belief::write_practice_row(*sinks.practice, state.time, i, n.id, o);
        }
        auto reg = belief::practice_regulate(res.beliefs[i], efficacy, cfg.update,
                                             cfg.normalization);
        res.fallbacks += reg.fallback;
        res.max_step_change = std::max(res.max_step_change, max_change(res.beliefs[i], reg.state));
        res.beliefs[i] = std::move(reg.state);
      }
    }
  }

  if (sinks.beliefs)
    for (std::size_t i = 0; i < n_agents; ++i)
      belief::write_belief_rows(*sinks.beliefs, cfg.steps, i, res.beliefs[i]);

  for (std::size_t k = 0; k < h; ++k) {
    double sum = 0.0;
    for (const auto& b : res.beliefs) sum += b.b[k];
    res.average.emplace_back(space[k].id, sum / static_cast<double>(n_agents));
  }
  std::stable_sort(res.average.begin(), res.average.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return res;
}

void write_average_table(std::ostream& out, const Result& r) {
  out << "norm_id,average_belief\n";
  for (const auto& [id, v] : r.average) out << id << ',' << v << '\n';
}

}  // namespace normsim::prescriptive
