#pragma once

// Prescriptive norms as conditional predicates over a doctor's state-action
// history. Predicates are plain data trees so a norm space can be listed,
// serialized and inspected.

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "normsim/actions.hpp"
#include "normsim/random.hpp"

namespace normsim::norms {

/// Longest history a record carries.
inline constexpr std::size_t kHistoryWindow = 20;

/// o = (h, s, a, s'): the acting doctor's role and the time step at which it
/// acts, its previous actions (most recent first) and the action taken. The
/// successor state is implied, since time advances by one and the action is
/// pushed onto the history.
struct StateActionRecord {
  Role role = Role::Assistant;
  long time = 0;
  std::vector<DiagnosticAction> history;
  DiagnosticAction action;
};

struct Predicate {
  enum class Kind {
    True,
    TimeMod,          // time % modulus == remainder
    TimePrime,
    RoleIs,
    UsedWithin,       // some test of `tests` used in the last `depth` actions
    AnyUsedWithin,    // any test at all used in the last `depth` actions
    LastCountAbove,   // previous action used more than `count` tests
    LastCountBelow,   // previous action used fewer than `count` tests
    Uses,             // current action uses every test of `tests`
    UsesAtLeast,      // current action uses >= `count` tests of `tests`
    AttendsTeaching,
    Not,
    And,
    Or,
    Implies,
  };

  Kind kind = Kind::True;
  long modulus = 0;
  long remainder = 0;
  Role role = Role::Assistant;
  TestMask tests = 0;
  int depth = 0;
  int count = 0;
  std::vector<Predicate> children;

  static Predicate always();
  static Predicate time_mod(long modulus, long remainder = 0);
  static Predicate time_prime();
  static Predicate role_is(Role r);
  static Predicate used_within(TestMask tests, int depth);
  static Predicate any_used_within(int depth);
  static Predicate last_count_above(int n);
  static Predicate last_count_below(int n);
  static Predicate uses(TestMask tests);
  static Predicate uses_at_least(int n, TestMask tests);
  static Predicate attends_teaching();
  static Predicate negate(Predicate p);
  static Predicate all_of(std::vector<Predicate> ps);
  static Predicate any_of(std::vector<Predicate> ps);
  static Predicate implies(Predicate a, Predicate b);

  /// Number of past actions the predicate looks at.
  int history_depth() const;
  /// Tests whose use in past actions can change the value, and whether the
  /// number of tests used matters. Used by the planner to group actions.
  TestMask history_tests() const;
  bool history_counts() const;

  bool eval(const StateActionRecord& rec) const;

  nlohmann::json to_json() const;
  static Predicate from_json(const nlohmann::json& j);
  std::string describe() const;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct Norm {
  std::string id;
  Predicate condition;
  Predicate consequence;
  double violation_cost = 0.0;
  double compliance_reward = 0.0;
  bool is_core = false;

  /// False when the condition does not hold, or when the record's history is
  /// shorter than the condition needs.
  bool triggered(const StateActionRecord& rec) const;
  bool satisfied_by(const StateActionRecord& rec) const { return consequence.eval(rec); }

  nlohmann::json to_json() const;
  static Norm from_json(const nlohmann::json& j);
  std::string describe() const;
};

/// 1 iff the norm holds on the record; an untriggered norm holds vacuously.
/// Throws MalformedRecord for invalid actions or an overlong history.
int evaluate(const Norm& norm, const StateActionRecord& rec);

/// Reward term for one norm: reward if triggered and met, -cost if triggered
/// and broken, otherwise 0.
double norm_reward(const Norm& norm, const StateActionRecord& rec);

class NormSpace {
 public:
  NormSpace() = default;
  explicit NormSpace(std::vector<Norm> norms);

  std::size_t size() const { return norms_.size(); }
  bool empty() const { return norms_.empty(); }
  const std::vector<Norm>& norms() const { return norms_; }
  const Norm& operator[](std::size_t i) const { return norms_[i]; }
  const Norm& at(const std::string& id) const;
  std::optional<std::size_t> index_of(const std::string& id) const;
  std::vector<std::string> ids() const;

  nlohmann::json to_json() const;
  static NormSpace from_json(const nlohmann::json& j);
  /// One line per norm: "<id>: <sentence>".
  std::string listing() const;

 private:
  std::vector<Norm> norms_;
};

inline const char* kTop3Id = "must_use_top_3_diagnostics";
inline const char* kTeachingId = "must_attend_teaching_activity";

Norm make_top3_norm();
Norm make_teaching_norm();
/// The 30 control norms, in ascending order of condition complexity.
std::vector<Norm> control_norms();

/// Both core protocols (if requested) followed by the 30 controls.
NormSpace build_norm_space(bool include_core = true);

/// Core norms of `space` plus `n_controls` distinct controls drawn uniformly,
/// keeping the order they have in `space`.
NormSpace sample_active_norms(const NormSpace& space, std::size_t n_controls, Rng& rng);

bool is_prime(long n);

}  // namespace normsim::norms
