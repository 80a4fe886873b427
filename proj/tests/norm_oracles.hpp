#pragma once

// Norm semantics written from the norm sentences, independently of the
// predicate trees, plus the records used to probe them.

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "normsim/norms.hpp"

namespace norm_oracle {

using namespace normsim;
using namespace normsim::norms;

using T = Test;
constexpr Role A = Role::Assistant;
constexpr Role C = Role::Chief;
using History = std::vector<DiagnosticAction>;

inline bool prime_by_division(long n) {
  if (n < 2) return false;
  for (long d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline bool has(const DiagnosticAction& a, T t) { return (a.tests & bit(t)) != 0; }

// nullopt: not enough history to judge, which counts as not triggered.
inline std::optional<bool> unused(const History& h, T t, std::size_t steps) {
  if (h.size() < steps) return std::nullopt;
  for (std::size_t i = 0; i < steps; ++i)
    if (has(h[i], t)) return false;
  return true;
}

using Condition = std::function<std::optional<bool>(Role, long, const History&)>;

struct Oracle {
  Condition cond;
  std::function<bool(const DiagnosticAction&)> cons;
};

inline std::function<bool(const DiagnosticAction&)> must(T t) {
  return [t](const DiagnosticAction& a) { return has(a, t); };
}

inline Condition every(long k, std::optional<Role> r = {}, long rem = 0) {
  return [=](Role role, long t, const History&) -> std::optional<bool> {
    return (!r || role == *r) && t % k == rem;
  };
}

inline Condition gap(T t, std::size_t steps, std::optional<Role> r = {}) {
  return [=](Role role, long, const History& h) -> std::optional<bool> {
    const auto u = unused(h, t, steps);
    if (!u) return std::nullopt;
    return (!r || role == *r) && *u;
  };
}

// Written from the norm sentences, independently of the predicate trees.
inline const std::map<std::string, Oracle>& oracles() {
  static const std::map<std::string, Oracle> m = [] {
    std::map<std::string, Oracle> o;
    o["must_use_top_3_diagnostics"] = {
        [](Role, long, const History&) -> std::optional<bool> { return true; },
        [](const DiagnosticAction& a) {
          return has(a, T::Romberg) && has(a, T::Hallpike) && has(a, T::StepTest);
        }};
    o["must_attend_teaching_activity"] = {every(31),
                                          [](const DiagnosticAction& a) { return a.teaching; }};
    o["assistant_must_use_step_test_if_even_step"] = {every(2, A), must(T::StepTest)};
    o["chief_must_use_saccade_if_even_step"] = {every(2, C), must(T::Saccade)};
    o["chief_must_use_babinski_weil_if_odd_step"] = {every(2, C, 1), must(T::BabinskiWeil)};
    o["assistant_must_use_hallpike_every_4_steps"] = {every(4, A), must(T::Hallpike)};
    o["must_use_saccade_every_5_steps"] = {every(5), must(T::Saccade)};
    o["assistant_must_use_romberg_every_6_steps"] = {every(6, A), must(T::Romberg)};
    o["chief_must_use_halmagyi_every_7_steps"] = {every(7, C), must(T::Halmagyi)};
    o["chief_must_use_babinski_weil_every_9_steps"] = {every(9, C), must(T::BabinskiWeil)};
    o["must_use_headshake_every_10_steps"] = {every(10), must(T::Headshake)};
    o["must_use_romberg_every_13_steps"] = {every(13), must(T::Romberg)};
    o["must_use_hallpike_every_15_steps"] = {every(15), must(T::Hallpike)};
    o["must_use_halmagyi_every_20_steps"] = {every(20), must(T::Halmagyi)};
    o["assistant_must_use_halmagyi_every_25_steps"] = {every(25, A), must(T::Halmagyi)};
    o["chief_must_use_step_test_on_prime_step"] = {
        [](Role r, long t, const History&) -> std::optional<bool> {
          return r == C && prime_by_division(t);
        },
        must(T::StepTest)};
    o["must_use_headshake_if_not_used_last_time"] = {gap(T::Headshake, 1), must(T::Headshake)};
    o["assistant_must_use_saccade_if_not_used_last_time"] = {gap(T::Saccade, 1, A), must(T::Saccade)};
    o["chief_must_use_hallpike_if_not_used_last_time"] = {gap(T::Hallpike, 1, C), must(T::Hallpike)};
    o["chief_must_use_step_test_if_not_used_last_time"] = {gap(T::StepTest, 1, C), must(T::StepTest)};
    o["assistant_must_use_step_test_if_unused_for_3_steps"] = {gap(T::StepTest, 3, A),
                                                               must(T::StepTest)};
    o["assistant_must_use_headshake_if_unused_for_4_steps"] = {gap(T::Headshake, 4, A),
                                                               must(T::Headshake)};
    o["must_use_step_test_if_hallpike_unused_for_5_steps"] = {gap(T::Hallpike, 5), must(T::StepTest)};
    o["assistant_must_use_babinski_weil_if_unused_for_5_steps"] = {gap(T::BabinskiWeil, 5, A),
                                                                   must(T::BabinskiWeil)};
    o["chief_must_use_romberg_if_unused_for_7_steps"] = {gap(T::Romberg, 7, C), must(T::Romberg)};
    o["must_use_babinski_weil_if_unused_for_8_steps"] = {gap(T::BabinskiWeil, 8),
                                                         must(T::BabinskiWeil)};
    o["must_use_romberg_if_unused_for_10_steps"] = {gap(T::Romberg, 10), must(T::Romberg)};
    o["must_use_headshake_if_unused_for_12_steps"] = {gap(T::Headshake, 12), must(T::Headshake)};
    o["must_use_romberg_after_more_than_4_tests"] = {
        [](Role, long, const History& h) -> std::optional<bool> {
          if (h.empty()) return std::nullopt;
          return h[0].count() > 4;
        },
        must(T::Romberg)};
    o["assistant_must_use_babinski_weil_after_fewer_than_3_tests"] = {
        [](Role r, long, const History& h) -> std::optional<bool> {
          if (h.empty()) return std::nullopt;
          return r == A && h[0].count() < 3;
        },
        must(T::BabinskiWeil)};
    o["must_use_saccade_if_no_tests_for_2_steps"] = {
        [](Role, long, const History& h) -> std::optional<bool> {
          if (h.size() < 2) return std::nullopt;
          return h[0].tests == 0 && h[1].tests == 0;
        },
        must(T::Saccade)};
    o["must_use_two_of_headshake_saccade_halmagyi_every_14_steps"] = {
        every(14), [](const DiagnosticAction& a) {
          return has(a, T::Headshake) + has(a, T::Saccade) + has(a, T::Halmagyi) >= 2;
        }};
    return o;
  }();
  return m;
}

inline int oracle_value(const Oracle& o, const StateActionRecord& r) {
  const auto c = o.cond(r.role, r.time, r.history);
  if (!c || !*c) return 1;
  return o.cons(r.action) ? 1 : 0;
}

inline bool oracle_triggered(const Oracle& o, const StateActionRecord& r) {
  const auto c = o.cond(r.role, r.time, r.history);
  return c && *c;
}

inline StateActionRecord record(Role role, long t, History h, DiagnosticAction a) {
  return {role, t, std::move(h), a};
}

inline const DiagnosticAction kEverything{0x7F, true};
inline const DiagnosticAction kNothing{0, false};

inline std::vector<History> histories() {
  return {{},
          History(20, kNothing),
          History(20, DiagnosticAction{0x7F, false}),
          History(20, DiagnosticAction{bit(T::Romberg), false}),
          History(1, kNothing),
          History(20, DiagnosticAction{static_cast<TestMask>(bit(T::Saccade) | bit(T::Hallpike)), false})};
}

inline DiagnosticAction random_action(Rng& rng) {
  std::uniform_int_distribution<int> mask(0, 127), coin(0, 3);
  DiagnosticAction a{static_cast<TestMask>(mask(rng)), coin(rng) == 0};
  if (coin(rng) == 0) a.tests &= static_cast<TestMask>(mask(rng));  // sparser usage
  if (coin(rng) == 0) a.tests = 0;
  return a;
}


}  // namespace norm_oracle
