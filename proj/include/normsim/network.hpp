#pragma once

// Fully connected community of agents that share medical-tendency samples and
// refine their subjective perception (SINP) of the collective norm (OBJ).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "normsim/gmm.hpp"
#include "normsim/random.hpp"

namespace normsim::network {

/// Five-group objective norm used by the descriptive experiments.
gmm::MixtureModel clinic_objective();

struct CommunityConfig {
  std::size_t agents = 20;
  gmm::MixtureModel obj = clinic_objective();
  double sigma_indiv = 0.05;
  double epsilon = 0.1;
  /// Prior samples each agent clusters (VQ) to seed its SINP.
  std::size_t prior_samples = 10000;
  /// Prior samples come from OBJ's groups with equal weights (agents know
  /// the groups but not their prevalence) instead of from OBJ itself.
  bool prior_equal_weights = true;
  /// Prior samples stay in the agent's training data as past experience.
  bool prior_in_buffer = true;
  /// Std of the seeded centroid perturbation, as a fraction of the OBJ std.
  double init_noise = 0.1;
  /// EM iterations a receiver runs on its buffer per time step.
  int em_iterations = 1;
  double em_tol = 1e-9;
  /// Lower bound on SINP component variances; 0 means sigma_indiv^2.
  double sinp_variance_floor = 0.0;
  gmm::BufferPolicy buffer = gmm::BufferPolicy::binned(1e-3);
  /// Assign groups by largest-remainder apportionment of N * w instead of
  /// independent draws.
  bool stratified_groups = true;
  /// When false, converged agents still receive messages but skip EM. Their
  /// SINP is no longer read, so convergence reports are unchanged.
  bool refit_converged = true;

  void validate() const;
};

struct Agent {
  std::size_t id = 0;
  std::size_t group = 0;
  gmm::GaussianComponent tendency;
  gmm::MixtureModel sinp;
  gmm::ObservationBuffer buffer;
  std::optional<long> converged_at;
};

class Community {
 public:
  Community(CommunityConfig config, std::vector<Agent> agents);

  const CommunityConfig& config() const { return config_; }
  const gmm::MixtureModel& obj() const { return config_.obj; }
  double epsilon() const { return config_.epsilon; }
  long time() const { return time_; }
  std::size_t size() const { return agents_.size(); }
  const std::vector<Agent>& agents() const { return agents_; }
  std::vector<Agent>& agents() { return agents_; }

  std::size_t converged_count() const;
  bool all_converged() const { return converged_count() == agents_.size(); }

  /// Receivers chosen in the latest step, in ascending id order.
  const std::vector<std::size_t>& last_receivers() const { return last_receivers_; }

  void advance_time() { ++time_; }
  void set_last_receivers(std::vector<std::size_t> r) { last_receivers_ = std::move(r); }

 private:
  CommunityConfig config_;
  std::vector<Agent> agents_;
  long time_ = 0;
  std::vector<std::size_t> last_receivers_;
};

/// Builds a community: tendencies drawn from OBJ, each SINP seeded by VQ over
/// the agent's own prior samples and perturbed.
Community make_community(const CommunityConfig& config, Rng& rng);

/// One time step: floor(N/2) random receivers each take one sample from every
/// sender and refit their SINP on the whole buffer.
void step(Community& community, Rng& rng);

/// KL(SINP || OBJ) per agent.
std::vector<double> kl_to_objective(const Community& community);

/// Marks unconverged agents whose KL to OBJ is below epsilon.
void check_convergence(Community& community);

struct ConvergenceReport {
  std::uint64_t seed = 0;
  std::size_t agents = 0;
  std::vector<std::optional<long>> converged_step;  // per agent
  double fraction = 0.0;
  long steps_run = 0;
  /// Step at which the last agent converged, if all did.
  std::optional<long> all_converged_step;

  void write_csv(std::ostream& out) const;
};

/// Called after every convergence check, including the one at time 0.
using StepObserver = std::function<void(const Community&)>;

ConvergenceReport run_until_converged(Community& community, long max_steps, Rng& rng,
                                      std::uint64_t seed = 0, const StepObserver& observer = {});

struct ScanPoint {
  std::size_t agents;
  double mean_fraction;
  double std_fraction;
};

/// For N = n_from, n_from + n_step, ..., n_to runs `repeats` communities
/// (seeds derived from `seed`) and averages the converged fraction.
std::vector<ScanPoint> convergence_ratio_scan(std::size_t n_from, std::size_t n_to,
                                              std::size_t n_step, std::size_t repeats,
                                              const CommunityConfig& base, long max_steps,
                                              std::uint64_t seed, unsigned jobs = 1);

void write_scan_csv(std::ostream& out, const std::vector<ScanPoint>& scan);

}  // namespace normsim::network
