#pragma once

// Experiment runners behind the command line. Each writes CSV outputs and a
// manifest.json (config, hash, seed, version, output file hashes) into one
// directory. All randomness derives from the config seed, and `jobs` never
// changes any output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "normsim/analysis.hpp"
#include "normsim/clinic.hpp"
#include "normsim/config.hpp"
#include "normsim/network.hpp"

namespace normsim::experiments {

/// A file could not be opened, read or written; the message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DescriptiveMode { Single, Dist, Scan, Replay };

std::string_view mode_name(DescriptiveMode m);
DescriptiveMode mode_from_name(std::string_view name);

struct Options {
  std::filesystem::path out = "out";
  unsigned jobs = 1;
  std::optional<std::size_t> runs;  // overrides the config's run count
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Building blocks, also used by the acceptance check.

struct DistResult {
  std::vector<network::ConvergenceReport> reports;
  /// Step at which every agent had converged, for runs where that happened.
  std::vector<double> steps;
  /// Lognormal, Pareto, Burr, Normal; empty with fewer than 10 samples.
  std::vector<analysis::FitResult> fits;
};

DistResult convergence_distribution(const config::DescriptiveConfig& cfg, std::uint64_t seed,
                                    std::size_t runs, unsigned jobs);

struct ReplayRuns {
  std::vector<int> years;
  /// Cross-doctor SINP-mean std per run and year index.
  std::vector<std::vector<double>> cross_std;
  /// Runs whose last-year std is below the first-year std.
  std::size_t declined = 0;
};

/// Run i generates its dataset and replays it from make_rng(seed, {0xE0, i}).
ReplayRuns replay_runs(const clinic::ClinicConfig& clinic, const clinic::ReplayConfig& replay,
                       std::uint64_t seed, std::size_t runs, unsigned jobs);

// Runners. Each returns the manifest it wrote.

nlohmann::json run_descriptive(const config::ScenarioConfig& cfg, DescriptiveMode mode,
                               const Options& opt);
nlohmann::json run_prescriptive(const config::ScenarioConfig& cfg, const Options& opt);
/// Synthetic clinic dataset, its sharing events and the doctor elbow curve.
nlohmann::json generate_data(const config::ScenarioConfig& cfg, const Options& opt);
/// Fits every family to one numeric CSV column.
nlohmann::json fit_distribution(const std::filesystem::path& input, const std::string& column,
                                std::size_t bins, const Options& opt);
/// Daily SDI with smoothing, yearly increments and the elbow curve of a
/// dataset CSV (or of the generated dataset when `input` is empty).
nlohmann::json analyze(const config::ScenarioConfig& cfg, const std::filesystem::path& input,
                       const Options& opt);

}  // namespace normsim::experiments
