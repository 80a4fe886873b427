#include "normsim/actions.hpp"

#include <algorithm>

namespace normsim {

namespace {

constexpr std::array<std::string_view, kTestCount> kTestNames = {
    "Romberg", "Hallpike", "StepTest", "Saccade", "Halmagyi", "Headshake", "BabinskiWeil"};

}  // namespace

std::string_view test_name(Test t) { return kTestNames[static_cast<std::size_t>(t)]; }

std::optional<Test> test_from_name(std::string_view name) {
  for (int i = 0; i < kTestCount; ++i)
    if (kTestNames[i] == name) return static_cast<Test>(i);
  return std::nullopt;
}

std::string mask_to_string(TestMask mask) {
  std::string out;
  for (int i = 0; i < kTestCount; ++i) {
    if (!(mask & (1u << i))) continue;
    if (!out.empty()) out += '+';
    out += kTestNames[i];
  }
  return out.empty() ? "none" : out;
}

std::string_view role_name(Role r) { return r == Role::Chief ? "chief" : "assistant"; }

std::optional<Role> role_from_name(std::string_view name) {
  if (name == "chief") return Role::Chief;
  if (name == "assistant") return Role::Assistant;
  return std::nullopt;
}

std::string DiagnosticAction::to_string() const {
  return mask_to_string(tests) + (teaching ? "+teaching" : "");
}

std::vector<DiagnosticAction> candidate_actions(int max_tests) {
  std::vector<DiagnosticAction> out;
  for (int k = 0; k <= std::min(max_tests, kTestCount); ++k)
    for (unsigned m = 0; m < (1u << kTestCount); ++m)
      if (std::popcount(m) == k)
        for (bool teach : {false, true}) out.push_back({static_cast<TestMask>(m), teach});
  return out;
}

std::optional<std::size_t> action_index(const std::vector<DiagnosticAction>& actions,
                                        const DiagnosticAction& a) {
  auto it = std::find(actions.begin(), actions.end(), a);
  if (it == actions.end()) return std::nullopt;
  return static_cast<std::size_t>(it - actions.begin());
}

}  // namespace normsim
