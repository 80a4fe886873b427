#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "near.hpp"
#include "normsim/belief.hpp"
#include "normsim/error.hpp"
#include "oracles.hpp"

using namespace normsim;
using namespace normsim::belief;

namespace {

BeliefState state(std::vector<double> b) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < b.size(); ++i) ids.push_back("n" + std::to_string(i));
  auto s = BeliefState::uniform(ids, 0.0);
  s.b = std::move(b);
  return s;
}

norms::Norm teaching_norm(double cost, double reward) {
  return {"teach", norms::Predicate::always(), norms::Predicate::attends_teaching(), cost, reward,
          false};
}

}  // namespace

TEST_SUITE("belief") {

TEST_CASE("action likelihood") {
  game::RewardParams p;
  p.diagnostic_cost = 0.0;
  p.bonus_value = 0.0;
  const auto acts = candidate_actions();
  const game::Planner flat(acts, p);
  const game::AgentState who{Role::Chief, {}};
  const auto idle = teaching_norm(0.0, 0.0);
  CHECK_NEAR(action_likelihood(flat, who, 0, acts[17], idle, 3), 1.0 / 198.0, 1e-12);

  // Q = (1, 0) over {teach, stay}: teaching earns 1, skipping costs nothing.
  const game::Planner two({{0, true}, {0, false}}, p);
  const auto n = teaching_norm(0.0, 1.0);
  CHECK_NEAR(action_likelihood(two, who, 0, {0, true}, n, 1), 0.5498, 1e-4);
  CHECK_NEAR(action_likelihood(two, who, 0, {0, false}, n, 1), 0.4502, 1e-4);

  const game::Planner full(acts, game::RewardParams{});
  const auto n1 = norms::make_top3_norm();
  const auto q = full.plan(who, 0, n1, 1);
  const auto top = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  double best = 0.0;
  for (const auto& a : acts) best = std::max(best, action_likelihood(full, who, 0, a, n1, 1));
  CHECK(action_likelihood(full, who, 0, acts[top], n1, 1) == best);
  CHECK_THROWS_AS(action_likelihood(full, who, 0, {0x7F, false}, n1, 1), UnknownAction);
}

TEST_CASE("normalized posterior target") {
  auto one = state({0.3});
  CHECK(posterior_target(one, {{-2.0}}).value[0] == 1.0);

  auto s = state({0.2, 0.6});
  const auto flat = posterior_target(s, {{-1.0, -1.0}, {-4.0, -4.0}}).value;
  CHECK_NEAR(flat[0], 0.25, 1e-12);
  CHECK_NEAR(flat[1], 0.75, 1e-12);

  auto even = state({0.5, 0.5});
  const auto t = posterior_target(even, {{std::log(0.3), std::log(0.1)}});
  CHECK_NEAR(t.value[0], 0.75, 1e-9);
  CHECK_NEAR(t.value[1], 0.25, 1e-9);
  CHECK_FALSE(t.fallback);

  // Far below the double range without the log domain.
  const auto deep = posterior_target(even, std::vector<std::vector<double>>(500, {-1000.0, -1001.0}));
  CHECK_NEAR(deep.value[0], 1.0 / (1.0 + std::exp(-500.0)), 1e-12);

  const double ninf = -std::numeric_limits<double>::infinity();
  const auto gone = posterior_target(even, {{ninf, ninf}});
  CHECK(gone.fallback);
  CHECK(gone.value == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(posterior_target(even, {{0.0}}), DimensionMismatch);
  CHECK_THROWS_AS(posterior_target(even, {}), PreconditionError);
}

TEST_CASE("presence target") {
  auto s = state({0.1, 0.0, 1.0, 0.5});
  const auto t = bernoulli_target(s, {{std::log(0.2), -1.0, -1.0, -3.0}}, std::vector<double>{std::log(0.1)});
  CHECK_NEAR(t[0], 2.0 / 11.0, 1e-12);  // odds 1/9 doubled
  CHECK(t[1] == 0.0);
  CHECK(t[2] == 1.0);
  CHECK_NEAR(t[3], 1.0 / (1.0 + std::exp(3.0 + std::log(0.1))), 1e-12);
  CHECK_THROWS_AS(bernoulli_target(s, {{0, 0, 0, 0}}, std::vector<double>{}), DimensionMismatch);
}

TEST_CASE("smoothing examples") {
  UpdateParams p;
  auto s = state({0.4, 0.7});
  const auto same = smooth_update(s, std::vector<double>{0.4, 0.7}, p);
  CHECK(same.b == s.b);
  CHECK(same.t == 1);

  auto fresh = state({0.0});
  const auto next = smooth_update(fresh, std::vector<double>{1.0}, p);
  CHECK_NEAR(next.m[0], 0.1, 1e-15);
  CHECK_NEAR(next.v[0], 0.001, 1e-15);
  const double rate = 0.001 / (std::sqrt(0.001) + 1e-8);
  CHECK_NEAR(rate, 0.03162, 1e-5);
  CHECK_NEAR(next.b[0], rate * 0.1, 1e-15);

  // Without moment averaging the step is alpha * g / (|g| + eps).
  UpdateParams plain = p;
  plain.beta1 = 0.0;
  plain.beta2 = 0.0;
  auto s2 = state({0.2, 0.9});
  const auto r = smooth_update(s2, std::vector<double>{0.7, 0.1}, plain);
  CHECK_NEAR(r.b[0], 0.2 + 0.001 * 0.5 / (0.5 + 1e-8), 1e-15);
  CHECK_NEAR(r.b[1], 0.9 - 0.001 * 0.8 / (0.8 + 1e-8), 1e-15);
  CHECK_THROWS_AS(smooth_update(s2, std::vector<double>{0.1}, p), DimensionMismatch);
}

TEST_CASE("target and smoothing match the reference optimizer") {
  Rng rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0), lik(0.01, 1.0);
  std::uniform_int_distribution<int> len(1, 60), norms_n(1, 8), obs(1, 9);
  UpdateParams p;
  for (int seq = 0; seq < 1000; ++seq) {
    const int k = norms_n(rng);
    p.base_rate = seq % 2 ? 0.001 : 0.05;  // the larger rate exercises clamping
    std::vector<double> b0(k);
    for (auto& x : b0) x = 0.05 + 0.9 * u(rng);
    auto s = state(b0);
    oracle::AdamRef ref{p.beta1, p.beta2, p.base_rate, p.epsilon, b0, std::vector<double>(k, 0.0),
                        std::vector<double>(k, 0.0)};
    const int steps = len(rng);
    for (int t = 0; t < steps; ++t) {
      std::vector<std::vector<double>> l(obs(rng), std::vector<double>(k));
      std::vector<std::vector<double>> logl = l;
      for (std::size_t o = 0; o < l.size(); ++o)
        for (int j = 0; j < k; ++j) {
          l[o][j] = lik(rng);
          logl[o][j] = std::log(l[o][j]);
        }
      const auto target = posterior_target(s, logl).value;
      const auto expected = oracle::bayes_target(ref.b, l);
      for (int j = 0; j < k; ++j) CHECK_NEAR(target[j], expected[j], 1e-12);
      s = smooth_update(s, target, p);
      ref.step(expected);
    }
    for (int j = 0; j < k; ++j) {
      CHECK_NEAR(s.b[j], ref.b[j], 1e-12);
      CHECK_NEAR(s.m[j], ref.m[j], 1e-12);
      CHECK_NEAR(s.v[j], ref.v[j], 1e-12);
      CHECK(s.b[j] >= 0.0);
      CHECK(s.b[j] <= 1.0);
    }
  }
}

TEST_CASE("beliefs stay in the unit interval") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  UpdateParams p;
  p.base_rate = 0.5;
  auto s = state({0.5, 0.5, 0.5});
  for (int t = 0; t < 2000; ++t) {
    s = smooth_update(s, std::vector<double>{u(rng), u(rng), u(rng)}, p);
    for (double b : s.b) {
      CHECK(b >= 0.0);
      CHECK(b <= 1.0);
    }
  }
}

TEST_CASE("practice regulation") {
  UpdateParams p;
  auto s = state({0.5, 0.5});
  const auto r = practice_regulate(s, {{"n0", 1.0}, {"n1", 0.0}}, p, Normalization::Unit);
  CHECK_NEAR(r.state.b[0], 0.5882, 1e-4);
  CHECK_NEAR(r.state.b[1], 0.4118, 1e-4);

  auto dist = state({0.2, 0.3, 0.5});
  for (double e : {0.0, 0.4, 1.0}) {
    const auto u = practice_regulate(dist, {{"n0", e}, {"n1", e}, {"n2", e}}, p, Normalization::Unit);
    for (int i = 0; i < 3; ++i) CHECK_NEAR(u.state.b[i], dist.b[i], 1e-15);
  }
  CHECK(practice_regulate(dist, {}, p, Normalization::Unit).state.b == dist.b);

  // Constant efficacy leaves any beliefs alone under the other normalizations.
  auto loose = state({0.9, 0.8, 0.05});
  for (auto mode : {Normalization::Mass, Normalization::Odds}) {
    const auto u = practice_regulate(loose, {{"n0", 0.3}, {"n1", 0.3}, {"n2", 0.3}}, p, mode);
    for (int i = 0; i < 3; ++i) CHECK_NEAR(u.state.b[i], loose.b[i], 1e-15);
  }

  // Odds: effective norms gain, ineffective ones lose, the average one holds.
  const auto o = practice_regulate(state({0.5, 0.5, 0.5}), {{"n0", 1.0}, {"n1", 0.5}, {"n2", 0.0}}, p,
                                   Normalization::Odds);
  CHECK(o.state.b[0] > 0.5);
  CHECK_NEAR(o.state.b[1], 0.5, 1e-15);
  CHECK(o.state.b[2] < 0.5);

  const auto zero = practice_regulate(state({0.0, 0.0}), {}, p, Normalization::Unit);
  CHECK(zero.fallback);
  CHECK(zero.state.b == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(practice_regulate(s, {{"nope", 1.0}}, p), PreconditionError);
  CHECK_THROWS_AS(practice_regulate(s, {{"n0", 1.5}}, p), PreconditionError);
  CHECK(normalization_from_name(normalization_name(Normalization::Odds)) == Normalization::Odds);
}

TEST_CASE("practice trials") {
  UpdateParams p;
  game::Environment env;
  const game::AgentState who{Role::Assistant, {}};
  Rng rng(1);
  const auto idle = practice_trial(who, 0, env, teaching_norm(0.0, 0.0), 40, p, rng);
  CHECK(idle.efficacy == 0.5);
  CHECK(idle.adhere_return == idle.violate_return);

  env.enforced = norms::NormSpace({norms::make_top3_norm(), norms::make_teaching_norm()});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(seed);
    const auto o = practice_trial(who, 7, env, env.enforced[0], 40, p, r, 4);
    CHECK(o.efficacy > 0.5);
    CHECK(o.adhere_return > o.violate_return);
  }
  const auto shortest = practice_trial(who, 0, env, env.enforced[1], 1, p, rng);
  CHECK(std::isfinite(shortest.efficacy));
  CHECK(shortest.efficacy >= 0.0);
  CHECK(shortest.efficacy <= 1.0);
}

TEST_CASE("parameters and CSV") {
  UpdateParams p;
  p.beta1 = 1.0;
  CHECK_THROWS_AS(p.validate(), PreconditionError);
  p = {};
  p.base_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), PreconditionError);

  std::ostringstream b, pr;
  write_belief_header(b);
  write_practice_header(pr);
  CHECK(b.str() == "t,agent_id,norm_id,belief,momentum,second_moment\n");
  CHECK(pr.str() == "t,agent_id,norm_id,adhere_return,violate_return,efficacy\n");
  auto s = state({0.25});
  write_belief_rows(b, 3, 2, s);
  CHECK(b.str().find("3,2,n0,0.25,0,0\n") != std::string::npos);
  CHECK_THROWS_AS(s.index_of("missing"), PreconditionError);
}

}
