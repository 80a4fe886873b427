#pragma once

// Diagnostic tests, doctor roles and the per-step action of a doctor agent.

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace normsim {

enum class Test : std::uint8_t {
  Romberg = 0,
  Hallpike,
  StepTest,
  Saccade,
  Halmagyi,
  Headshake,
  BabinskiWeil,
};

inline constexpr int kTestCount = 7;
using TestMask = std::uint8_t;

constexpr TestMask bit(Test t) { return static_cast<TestMask>(1u << static_cast<unsigned>(t)); }

std::string_view test_name(Test t);
std::optional<Test> test_from_name(std::string_view name);
std::string mask_to_string(TestMask mask);  // "Romberg+Hallpike", or "none"

enum class Role : std::uint8_t { Chief, Assistant };

std::string_view role_name(Role r);
std::optional<Role> role_from_name(std::string_view name);

struct DiagnosticAction {
  TestMask tests = 0;
  bool teaching = false;

  bool uses(Test t) const { return (tests & bit(t)) != 0; }
  int count() const { return std::popcount(static_cast<unsigned>(tests)); }
  bool valid() const { return tests < (1u << kTestCount); }
  std::string to_string() const;

  friend bool operator==(const DiagnosticAction&, const DiagnosticAction&) = default;
};

/// Every subset of at most `max_tests` tests, each with and without teaching,
/// ordered by (test count, mask, teaching).
std::vector<DiagnosticAction> candidate_actions(int max_tests = 4);

/// Position of `a` in `actions`, if present.
std::optional<std::size_t> action_index(const std::vector<DiagnosticAction>& actions,
                                        const DiagnosticAction& a);

}  // namespace normsim
