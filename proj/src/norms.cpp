#include "normsim/norms.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "normsim/error.hpp"

namespace normsim::norms {

using Kind = Predicate::Kind;

namespace {

struct KindName {
  Kind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {Kind::True, "true"},
    {Kind::TimeMod, "time_mod"},
    {Kind::TimePrime, "time_prime"},
    {Kind::RoleIs, "role_is"},
    {Kind::UsedWithin, "used_within"},
    {Kind::AnyUsedWithin, "any_used_within"},
    {Kind::LastCountAbove, "last_count_above"},
    {Kind::LastCountBelow, "last_count_below"},
    {Kind::Uses, "uses"},
    {Kind::UsesAtLeast, "uses_at_least"},
    {Kind::AttendsTeaching, "attends_teaching"},
    {Kind::Not, "not"},
    {Kind::And, "and"},
    {Kind::Or, "or"},
    {Kind::Implies, "implies"},
};

const char* kind_name(Kind k) {
  for (const auto& kn : kKindNames)
    if (kn.kind == k) return kn.name;
  return "?";
}

Kind kind_from_name(const std::string& s) {
  for (const auto& kn : kKindNames)
    if (s == kn.name) return kn.kind;
  throw PreconditionError("unknown predicate kind '" + s + "'");
}

std::vector<std::string> mask_names(TestMask mask) {
  std::vector<std::string> out;
  for (int i = 0; i < kTestCount; ++i)
    if (mask & (1u << i)) out.emplace_back(test_name(static_cast<Test>(i)));
  return out;
}

TestMask mask_from_names(const std::vector<std::string>& names) {
  TestMask m = 0;
  for (const auto& n : names) {
    auto t = test_from_name(n);
    if (!t) throw PreconditionError("unknown test '" + n + "'");
    m |= bit(*t);
  }
  return m;
}

std::string join_tests(TestMask mask, const char* sep) {
  std::string out;
  for (const auto& n : mask_names(mask)) {
    if (!out.empty()) out += sep;
    out += n;
  }
  return out;
}

}  // namespace

bool is_prime(long n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  for (long d = 3; d * d <= n; d += 2)
    if (n % d == 0) return false;
  return true;
}

Predicate Predicate::always() { return {}; }

Predicate Predicate::time_mod(long modulus, long remainder) {
  require(modulus >= 1, "time_mod modulus must be >= 1");
  Predicate p;
  p.kind = Kind::TimeMod;
  p.modulus = modulus;
  p.remainder = remainder;
  return p;
}

Predicate Predicate::time_prime() {
  Predicate p;
  p.kind = Kind::TimePrime;
  return p;
}

Predicate Predicate::role_is(Role r) {
  Predicate p;
  p.kind = Kind::RoleIs;
  p.role = r;
  return p;
}

Predicate Predicate::used_within(TestMask tests, int depth) {
  require(depth >= 1 && depth <= static_cast<int>(kHistoryWindow), "lookback out of range");
  Predicate p;
  p.kind = Kind::UsedWithin;
  p.tests = tests;
  p.depth = depth;
  return p;
}

Predicate Predicate::any_used_within(int depth) {
  require(depth >= 1 && depth <= static_cast<int>(kHistoryWindow), "lookback out of range");
  Predicate p;
  p.kind = Kind::AnyUsedWithin;
  p.depth = depth;
  return p;
}

Predicate Predicate::last_count_above(int n) {
  Predicate p;
  p.kind = Kind::LastCountAbove;
  p.count = n;
  p.depth = 1;
  return p;
}

Predicate Predicate::last_count_below(int n) {
  Predicate p;
  p.kind = Kind::LastCountBelow;
  p.count = n;
  p.depth = 1;
  return p;
}

Predicate Predicate::uses(TestMask tests) {
  Predicate p;
  p.kind = Kind::Uses;
  p.tests = tests;
  return p;
}

Predicate Predicate::uses_at_least(int n, TestMask tests) {
  Predicate p;
  p.kind = Kind::UsesAtLeast;
  p.count = n;
  p.tests = tests;
  return p;
}

Predicate Predicate::attends_teaching() {
  Predicate p;
  p.kind = Kind::AttendsTeaching;
  return p;
}

Predicate Predicate::negate(Predicate a) {
  Predicate p;
  p.kind = Kind::Not;
  p.children.push_back(std::move(a));
  return p;
}

Predicate Predicate::all_of(std::vector<Predicate> ps) {
  require(!ps.empty(), "conjunction needs at least one operand");
  Predicate p;
  p.kind = Kind::And;
  p.children = std::move(ps);
  return p;
}

Predicate Predicate::any_of(std::vector<Predicate> ps) {
  require(!ps.empty(), "disjunction needs at least one operand");
  Predicate p;
  p.kind = Kind::Or;
  p.children = std::move(ps);
  return p;
}

Predicate Predicate::implies(Predicate a, Predicate b) {
  Predicate p;
  p.kind = Kind::Implies;
  p.children.push_back(std::move(a));
  p.children.push_back(std::move(b));
  return p;
}

int Predicate::history_depth() const {
  int d = 0;
  switch (kind) {
    case Kind::UsedWithin:
    case Kind::AnyUsedWithin:
    case Kind::LastCountAbove:
    case Kind::LastCountBelow:
      d = depth;
      break;
    default:
      break;
  }
  for (const auto& c : children) d = std::max(d, c.history_depth());
  return d;
}

TestMask Predicate::history_tests() const {
  TestMask m = kind == Kind::UsedWithin ? tests : 0;
  for (const auto& c : children) m |= c.history_tests();
  return m;
}

bool Predicate::history_counts() const {
  if (kind == Kind::AnyUsedWithin || kind == Kind::LastCountAbove || kind == Kind::LastCountBelow)
    return true;
  return std::any_of(children.begin(), children.end(),
                     [](const Predicate& c) { return c.history_counts(); });
}

bool Predicate::eval(const StateActionRecord& rec) const {
  const auto& h = rec.history;
  const auto lookback = [&](int d) { return std::min<std::size_t>(h.size(), d); };
  switch (kind) {
    case Kind::True:
      return true;
    case Kind::TimeMod: {
      long r = rec.time % modulus;
      if (r < 0) r += modulus;
      return r == remainder;
    }
    case Kind::TimePrime:
      return is_prime(rec.time);
    case Kind::RoleIs:
      return rec.role == role;
    case Kind::UsedWithin:
      for (std::size_t i = 0; i < lookback(depth); ++i)
        if (h[i].tests & tests) return true;
      return false;
    case Kind::AnyUsedWithin:
      for (std::size_t i = 0; i < lookback(depth); ++i)
        if (h[i].tests) return true;
      return false;
    case Kind::LastCountAbove:
      return !h.empty() && h[0].count() > count;
    case Kind::LastCountBelow:
      return !h.empty() && h[0].count() < count;
    case Kind::Uses:
      return (rec.action.tests & tests) == tests;
    case Kind::UsesAtLeast:
      return std::popcount(static_cast<unsigned>(rec.action.tests & tests)) >= count;
    case Kind::AttendsTeaching:
      return rec.action.teaching;
    case Kind::Not:
      return !children[0].eval(rec);
    case Kind::And:
      return std::all_of(children.begin(), children.end(),
                         [&](const Predicate& c) { return c.eval(rec); });
    case Kind::Or:
      return std::any_of(children.begin(), children.end(),
                         [&](const Predicate& c) { return c.eval(rec); });
    case Kind::Implies:
      return !children[0].eval(rec) || children[1].eval(rec);
  }
  return false;
}

nlohmann::json Predicate::to_json() const {
  nlohmann::json j{{"kind", kind_name(kind)}};
  switch (kind) {
    case Kind::TimeMod:
      j["modulus"] = modulus;
      j["remainder"] = remainder;
      break;
    case Kind::RoleIs:
      j["role"] = std::string(role_name(role));
      break;
    case Kind::UsedWithin:
      j["tests"] = mask_names(tests);
      j["depth"] = depth;
      break;
    case Kind::AnyUsedWithin:
      j["depth"] = depth;
      break;
    case Kind::LastCountAbove:
    case Kind::LastCountBelow:
      j["count"] = count;
      break;
    case Kind::Uses:
      j["tests"] = mask_names(tests);
      break;
    case Kind::UsesAtLeast:
      j["tests"] = mask_names(tests);
      j["count"] = count;
      break;
    default:
      break;
  }
  if (!children.empty()) {
    j["children"] = nlohmann::json::array();
    for (const auto& c : children) j["children"].push_back(c.to_json());
  }
  return j;
}

Predicate Predicate::from_json(const nlohmann::json& j) {
  const Kind k = kind_from_name(j.at("kind").get<std::string>());
  std::vector<Predicate> kids;
  if (j.contains("children"))
    for (const auto& c : j.at("children")) kids.push_back(from_json(c));
  const auto tests_of = [&] { return mask_from_names(j.at("tests").get<std::vector<std::string>>()); };
  switch (k) {
    case Kind::True:
      return always();
    case Kind::TimeMod:
      return time_mod(j.at("modulus").get<long>(), j.value("remainder", 0L));
    case Kind::TimePrime:
      return time_prime();
    case Kind::RoleIs: {
      auto r = role_from_name(j.at("role").get<std::string>());
      if (!r) throw PreconditionError("unknown role in predicate");
      return role_is(*r);
    }
    case Kind::UsedWithin:
      return used_within(tests_of(), j.at("depth").get<int>());
    case Kind::AnyUsedWithin:
      return any_used_within(j.at("depth").get<int>());
    case Kind::LastCountAbove:
      return last_count_above(j.at("count").get<int>());
    case Kind::LastCountBelow:
      return last_count_below(j.at("count").get<int>());
    case Kind::Uses:
      return uses(tests_of());
    case Kind::UsesAtLeast:
      return uses_at_least(j.at("count").get<int>(), tests_of());
    case Kind::AttendsTeaching:
      return attends_teaching();
    case Kind::Not:
      require(kids.size() == 1, "'not' takes one operand");
      return negate(std::move(kids[0]));
    case Kind::And:
      return all_of(std::move(kids));
    case Kind::Or:
      return any_of(std::move(kids));
    case Kind::Implies:
      require(kids.size() == 2, "'implies' takes two operands");
      return implies(std::move(kids[0]), std::move(kids[1]));
  }
  throw PreconditionError("bad predicate");
}

std::string Predicate::describe() const {
  const auto joined = [&](const char* op) {
    std::string out;
    for (const auto& c : children) {
      if (!out.empty()) out += op;
      out += c.children.empty() ? c.describe() : "(" + c.describe() + ")";
    }
    return out;
  };
  switch (kind) {
    case Kind::True:
      return "always";
    case Kind::TimeMod:
      if (modulus == 2) return remainder == 0 ? "the time step is even" : "the time step is odd";
      return "the time step is divisible by " + std::to_string(modulus) +
             (remainder ? " with remainder " + std::to_string(remainder) : "");
    case Kind::TimePrime:
      return "the time step is prime";
    case Kind::RoleIs:
      return std::string("the doctor is ") + (role == Role::Chief ? "a chief" : "an assistant");
    case Kind::UsedWithin:
      return join_tests(tests, " or ") + " was used in the last " + std::to_string(depth) +
             (depth == 1 ? " step" : " steps");
    case Kind::AnyUsedWithin:
      return "some test was used in the last " + std::to_string(depth) + " steps";
    case Kind::LastCountAbove:
      return "more than " + std::to_string(count) + " tests were used last time";
    case Kind::LastCountBelow:
      return "fewer than " + std::to_string(count) + " tests were used last time";
    case Kind::Uses:
      return "uses " + join_tests(tests, ", ");
    case Kind::UsesAtLeast:
      return "uses at least " + std::to_string(count) + " of " + join_tests(tests, ", ");
    case Kind::AttendsTeaching:
      return "attends the teaching activity";
    case Kind::Not:
      return "not " + (children[0].children.empty() ? children[0].describe()
                                                    : "(" + children[0].describe() + ")");
    case Kind::And:
      return joined(" and ");
    case Kind::Or:
      return joined(" or ");
    case Kind::Implies:
      return "if " + children[0].describe() + " then " + children[1].describe();
  }
  return "?";
}

bool Norm::triggered(const StateActionRecord& rec) const {
  if (static_cast<std::size_t>(condition.history_depth()) > rec.history.size()) return false;
  return condition.eval(rec);
}

nlohmann::json Norm::to_json() const {
  return {{"id", id},
          {"condition", condition.to_json()},
          {"consequence", consequence.to_json()},
          {"cost", violation_cost},
          {"reward", compliance_reward},
          {"is_core", is_core}};
}

Norm Norm::from_json(const nlohmann::json& j) {
  Norm n;
  n.id = j.at("id").get<std::string>();
  n.condition = Predicate::from_json(j.at("condition"));
  n.consequence = Predicate::from_json(j.at("consequence"));
  n.violation_cost = j.at("cost").get<double>();
  n.compliance_reward = j.at("reward").get<double>();
  n.is_core = j.value("is_core", false);
  require(n.violation_cost >= 0.0 && n.compliance_reward >= 0.0,
          "norm '" + n.id + "': cost and reward must be >= 0");
  return n;
}

std::string Norm::describe() const {
  if (condition.kind == Kind::True) return "always " + consequence.describe();
  return "if " + condition.describe() + " then " + consequence.describe();
}

int evaluate(const Norm& norm, const StateActionRecord& rec) {
  if (rec.history.size() > kHistoryWindow)
    throw MalformedRecord("history longer than " + std::to_string(kHistoryWindow));
  if (rec.time < 0) throw MalformedRecord("negative time step");
  if (!rec.action.valid()) throw MalformedRecord("action uses an unknown test");
  for (const auto& a : rec.history)
    if (!a.valid()) throw MalformedRecord("history action uses an unknown test");
  if (!norm.triggered(rec)) return 1;
  return norm.satisfied_by(rec) ? 1 : 0;
}

double norm_reward(const Norm& norm, const StateActionRecord& rec) {
  if (!norm.triggered(rec)) return 0.0;
  return norm.satisfied_by(rec) ? norm.compliance_reward : -norm.violation_cost;
}

NormSpace::NormSpace(std::vector<Norm> norms) : norms_(std::move(norms)) {
  require(!norms_.empty(), "norm space must be nonempty");
  std::set<std::string> seen;
  for (const auto& n : norms_)
    if (!seen.insert(n.id).second) throw PreconditionError("duplicate norm id '" + n.id + "'");
}

const Norm& NormSpace::at(const std::string& id) const {
  auto i = index_of(id);
  if (!i) throw PreconditionError("no norm with id '" + id + "'");
  return norms_[*i];
}

std::optional<std::size_t> NormSpace::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < norms_.size(); ++i)
    if (norms_[i].id == id) return i;
  return std::nullopt;
}

std::vector<std::string> NormSpace::ids() const {
  std::vector<std::string> out;
  for (const auto& n : norms_) out.push_back(n.id);
  return out;
}

nlohmann::json NormSpace::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& n : norms_) j.push_back(n.to_json());
  return j;
}

NormSpace NormSpace::from_json(const nlohmann::json& j) {
  std::vector<Norm> out;
  for (const auto& n : j) out.push_back(Norm::from_json(n));
  return NormSpace(std::move(out));
}

std::string NormSpace::listing() const {
  std::ostringstream os;
  for (const auto& n : norms_) os << n.id << ": " << n.describe() << '\n';
  return os.str();
}

Norm make_top3_norm() {
  return {kTop3Id, Predicate::always(),
          Predicate::uses(bit(Test::Romberg) | bit(Test::Hallpike) | bit(Test::StepTest)), 3.0,
          1.0, true};
}

Norm make_teaching_norm() {
  auto cond = Predicate::all_of(
      {Predicate::time_mod(31),
       Predicate::any_of({Predicate::role_is(Role::Chief), Predicate::role_is(Role::Assistant)})});
  return {kTeachingId, std::move(cond), Predicate::attends_teaching(), 1.0, 1.0, true};
}

namespace {

using P = Predicate;

Norm control(std::string id, Predicate cond, Predicate cons) {
  return {std::move(id), std::move(cond), std::move(cons), 1.0, 1.0, false};
}

P with_role(Role r, P cond) { return P::all_of({P::role_is(r), std::move(cond)}); }

P unused(Test t, int depth) { return P::negate(P::used_within(bit(t), depth)); }

}  // namespace

std::vector<Norm> control_norms() {
  const auto A = Role::Assistant;
  const auto C = Role::Chief;
  using T = Test;
  std::vector<Norm> v;
  v.push_back(control("assistant_must_use_step_test_if_even_step", with_role(A, P::time_mod(2)),
                      P::uses(bit(T::StepTest))));
  v.push_back(control("chief_must_use_saccade_if_even_step", with_role(C, P::time_mod(2)),
                      P::uses(bit(T::Saccade))));
  v.push_back(control("chief_must_use_babinski_weil_if_odd_step", with_role(C, P::time_mod(2, 1)),
                      P::uses(bit(T::BabinskiWeil))));
  v.push_back(control("assistant_must_use_hallpike_every_4_steps", with_role(A, P::time_mod(4)),
                      P::uses(bit(T::Hallpike))));
  v.push_back(control("must_use_saccade_every_5_steps", P::time_mod(5), P::uses(bit(T::Saccade))));
  v.push_back(control("assistant_must_use_romberg_every_6_steps", with_role(A, P::time_mod(6)),
                      P::uses(bit(T::Romberg))));
  v.push_back(control("chief_must_use_halmagyi_every_7_steps", with_role(C, P::time_mod(7)),
                      P::uses(bit(T::Halmagyi))));
  v.push_back(control("chief_must_use_babinski_weil_every_9_steps", with_role(C, P::time_mod(9)),
                      P::uses(bit(T::BabinskiWeil))));
  v.push_back(
      control("must_use_headshake_every_10_steps", P::time_mod(10), P::uses(bit(T::Headshake))));
  v.push_back(control("must_use_romberg_every_13_steps", P::time_mod(13), P::uses(bit(T::Romberg))));
  v.push_back(
      control("must_use_hallpike_every_15_steps", P::time_mod(15), P::uses(bit(T::Hallpike))));
  v.push_back(
      control("must_use_halmagyi_every_20_steps", P::time_mod(20), P::uses(bit(T::Halmagyi))));
  v.push_back(control("assistant_must_use_halmagyi_every_25_steps", with_role(A, P::time_mod(25)),
                      P::uses(bit(T::Halmagyi))));
  v.push_back(control("chief_must_use_step_test_on_prime_step", with_role(C, P::time_prime()),
                      P::uses(bit(T::StepTest))));
  v.push_back(control("must_use_headshake_if_not_used_last_time", unused(T::Headshake, 1),
                      P::uses(bit(T::Headshake))));
  v.push_back(control("assistant_must_use_saccade_if_not_used_last_time",
                      with_role(A, unused(T::Saccade, 1)), P::uses(bit(T::Saccade))));
  v.push_back(control("chief_must_use_hallpike_if_not_used_last_time",
                      with_role(C, unused(T::Hallpike, 1)), P::uses(bit(T::Hallpike))));
  v.push_back(control("chief_must_use_step_test_if_not_used_last_time",
                      with_role(C, unused(T::StepTest, 1)), P::uses(bit(T::StepTest))));
  v.push_back(control("assistant_must_use_step_test_if_unused_for_3_steps",
                      with_role(A, unused(T::StepTest, 3)), P::uses(bit(T::StepTest))));
  v.push_back(control("assistant_must_use_headshake_if_unused_for_4_steps",
                      with_role(A, unused(T::Headshake, 4)), P::uses(bit(T::Headshake))));
  v.push_back(control("must_use_step_test_if_hallpike_unused_for_5_steps", unused(T::Hallpike, 5),
                      P::uses(bit(T::StepTest))));
  v.push_back(control("assistant_must_use_babinski_weil_if_unused_for_5_steps",
                      with_role(A, unused(T::BabinskiWeil, 5)), P::uses(bit(T::BabinskiWeil))));
  v.push_back(control("chief_must_use_romberg_if_unused_for_7_steps",
                      with_role(C, unused(T::Romberg, 7)), P::uses(bit(T::Romberg))));
  v.push_back(control("must_use_babinski_weil_if_unused_for_8_steps", unused(T::BabinskiWeil, 8),
                      P::uses(bit(T::BabinskiWeil))));
  v.push_back(control("must_use_romberg_if_unused_for_10_steps", unused(T::Romberg, 10),
                      P::uses(bit(T::Romberg))));
  v.push_back(control("must_use_headshake_if_unused_for_12_steps", unused(T::Headshake, 12),
                      P::uses(bit(T::Headshake))));
  v.push_back(control("must_use_romberg_after_more_than_4_tests", P::last_count_above(4),
                      P::uses(bit(T::Romberg))));
  v.push_back(control("assistant_must_use_babinski_weil_after_fewer_than_3_tests",
                      with_role(A, P::last_count_below(3)), P::uses(bit(T::BabinskiWeil))));
  v.push_back(control("must_use_saccade_if_no_tests_for_2_steps",
                      P::negate(P::any_used_within(2)), P::uses(bit(T::Saccade))));
  v.push_back(control("must_use_two_of_headshake_saccade_halmagyi_every_14_steps", P::time_mod(14),
                      P::uses_at_least(2, bit(T::Headshake) | bit(T::Saccade) | bit(T::Halmagyi))));
  return v;
}

NormSpace build_norm_space(bool include_core) {
  std::vector<Norm> all;
  if (include_core) {
    all.push_back(make_top3_norm());
    all.push_back(make_teaching_norm());
  }
  for (auto& n : control_norms()) all.push_back(std::move(n));
  return NormSpace(std::move(all));
}

NormSpace sample_active_norms(const NormSpace& space, std::size_t n_controls, Rng& rng) {
  std::vector<std::size_t> controls;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (!space[i].is_core) controls.push_back(i);
  require(n_controls <= controls.size(),
          "asked for " + std::to_string(n_controls) + " controls but the space has " +
              std::to_string(controls.size()));
  std::shuffle(controls.begin(), controls.end(), rng);
  controls.resize(n_controls);
  std::vector<bool> keep(space.size(), false);
  for (auto i : controls) keep[i] = true;
  std::vector<Norm> out;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (space[i].is_core || keep[i]) out.push_back(space[i]);
  require(!out.empty(), "active norm set is empty");
  return NormSpace(std::move(out));
}

}  // namespace normsim::norms
