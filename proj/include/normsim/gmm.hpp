#pragma once

// One-dimensional Gaussian mixtures used for both the objective collective
// norm (OBJ) and every agent's subjective perception of it (SINP).

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "normsim/random.hpp"

namespace normsim::gmm {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kMassFloor = 1e-8;

struct GaussianComponent {
  double mean = 0.0;
  double std = 1.0;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

double normal_pdf(double x, double mean, double std);
double normal_log_pdf(double x, double mean, double std);

/// Weighted mixture of K Gaussians. Components are kept in ascending-mean
/// order so that component i of two models can be compared directly.
class MixtureModel {
 public:
  MixtureModel(std::vector<double> weights, std::vector<GaussianComponent> components);

  /// All components share one standard deviation (the OBJ form).
  static MixtureModel with_shared_std(std::vector<double> weights, std::vector<double> means,
                                      double std);

  std::size_t size() const { return components_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<GaussianComponent>& components() const { return components_; }
  std::vector<double> means() const;
  std::vector<double> stds() const;

  double pdf(double x) const;
  double log_pdf(double x) const;
  double mean() const;
  double sample(Rng& rng) const;

  nlohmann::json to_json() const;
  static MixtureModel from_json(const nlohmann::json& j);

  friend bool operator==(const MixtureModel&, const MixtureModel&) = default;

 private:
  std::vector<double> weights_;
  std::vector<GaussianComponent> components_;
};

double mixture_pdf(const MixtureModel& model, double x);

/// Read-only view of (possibly weighted) samples. An empty `weights` span
/// means every value has unit weight.
struct SampleView {
  std::span<const double> values;
  std::span<const double> weights;

  std::size_t size() const { return values.size(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  double total_weight() const;
};

/// Retention policy for received messages.
struct BufferPolicy {
  enum class Kind { Unbounded, Ring, Binned };
  Kind kind = Kind::Unbounded;
  std::size_t ring_capacity = 0;  // Ring only
  double bin_width = 0.0;         // Binned only

  static BufferPolicy unbounded() { return {}; }
  static BufferPolicy ring(std::size_t capacity) { return {Kind::Ring, capacity, 0.0}; }
  static BufferPolicy binned(double width) { return {Kind::Binned, 0, width}; }
};

/// Training data X = {x_1..x_T} an agent has received.
///
/// `size()` always counts every message received. Unbounded buffers keep all
/// samples; ring buffers keep the newest `ring_capacity`; binned buffers keep
/// counts on a fixed grid (the values become bin centres), which bounds EM cost
/// for long runs while representing the full history.
class ObservationBuffer {
 public:
  explicit ObservationBuffer(BufferPolicy policy = BufferPolicy::unbounded());

  void push(double x);
  std::size_t size() const { return received_; }
  bool empty() const { return received_ == 0; }
  std::size_t retained() const;
  const BufferPolicy& policy() const { return policy_; }

  /// Valid until the next push.
  SampleView view() const;

 private:
  BufferPolicy policy_;
  std::size_t received_ = 0;
  std::vector<double> samples_;
  std::size_t ring_next_ = 0;
  std::map<std::int64_t, double> bins_;
  mutable bool dirty_ = false;
  mutable std::vector<double> bin_values_;
  mutable std::vector<double> bin_counts_;
};

enum class DegeneratePolicy { Reseed, Throw };

struct EmOptions {
  double variance_floor = kVarianceFloor;
  double mass_floor = kMassFloor;
  DegeneratePolicy policy = DegeneratePolicy::Reseed;
};

struct EmStepResult {
  MixtureModel model;
  double loglik_before;              // log p(X | input model)
  std::vector<std::size_t> reseeded;  // indices (in input order) that were reseeded
};

/// Log-likelihood of the data under the model, accumulated in log domain.
double log_likelihood(const MixtureModel& model, const SampleView& data);

/// Posterior responsibilities Pr(i | x) for a single value.
std::vector<double> responsibilities(const MixtureModel& model, double x);

/// One EM re-estimation of weights, means and per-component variances.
EmStepResult em_step(const MixtureModel& model, const SampleView& data,
                     const EmOptions& options = {});
EmStepResult em_step(const MixtureModel& model, const ObservationBuffer& buffer,
                     const EmOptions& options = {});

struct EmTrace {
  std::vector<double> loglik;  // loglik[k]: model entering iteration k
  int iterations = 0;          // M-steps applied
  bool converged = false;
  int reseeds = 0;

  void write_csv(std::ostream& out) const;
};

struct FitResult {
  MixtureModel model;
  EmTrace trace;
};

/// Repeats em_step until the log-likelihood gain drops below `tol` or
/// `max_iter` steps have been applied.
FitResult fit_em(const MixtureModel& model, const SampleView& data, double tol, int max_iter,
                 const EmOptions& options = {});
FitResult fit_em(const MixtureModel& model, const ObservationBuffer& buffer, double tol,
                 int max_iter, const EmOptions& options = {});

/// KL divergence between the weight vectors of two canonically ordered
/// mixtures, in nats. Returns +infinity when q has a zero where p does not.
double kl_components(const MixtureModel& p, const MixtureModel& q);

/// Monte-Carlo estimate of the density KL  E_p[log p(x) - log q(x)].
double kl_density_mc(const MixtureModel& p, const MixtureModel& q, std::size_t n_samples,
                     Rng& rng);

/// Draws an agent's medical tendency: pick group i with probability w_i, draw
/// its mean from that group's Gaussian, and attach `sigma_indiv`.
GaussianComponent sample_agent_tendency(const MixtureModel& model, double sigma_indiv, Rng& rng);

/// Same draw with the group fixed by the caller.
GaussianComponent sample_tendency_in_group(const MixtureModel& model, std::size_t group,
                                           double sigma_indiv, Rng& rng);

/// Vector-quantisation start for EM: K-means centroids over `prior`, equal
/// weights, and the pooled within-cluster spread as every component's std.
MixtureModel vq_initial_model(std::span<const double> prior, std::size_t k, Rng& rng,
                              int restarts = 5);

}  // namespace normsim::gmm
