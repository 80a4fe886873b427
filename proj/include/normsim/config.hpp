#pragma once

// Scenario configuration: one JSON document holding every experiment
// constant, validated on load with messages that name the offending field.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "normsim/clinic.hpp"
#include "normsim/network.hpp"
#include "normsim/prescriptive.hpp"

namespace normsim::config {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

struct DescriptiveConfig {
  network::CommunityConfig community;
  long max_steps = 20000;
  std::size_t runs = 50;
  std::size_t scan_from = 80;
  std::size_t scan_to = 110;
  std::size_t scan_step = 2;
  std::size_t scan_repeats = 10;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  DescriptiveConfig descriptive;
  prescriptive::Config prescriptive;
  clinic::ClinicConfig clinic;
  clinic::ReplayConfig replay;
  std::size_t replay_runs = 50;
  std::size_t sliding_window = 30;

  void validate() const;
};

/// Thrown for malformed or out-of-range configuration; the message starts
/// with the JSON path of the field, e.g. "prescriptive.reward.gamma: ...".
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

ScenarioConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& c);

ScenarioConfig load(const std::string& path);
/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ScenarioConfig& c);

}  // namespace normsim::config
