#include "normsim/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "normsim/error.hpp"
#include "normsim/kmeans.hpp"

namespace normsim::gmm {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double normal_log_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return -0.5 * z * z - std::log(std) - kLogSqrt2Pi;
}

double normal_pdf(double x, double mean, double std) {
  return std::exp(normal_log_pdf(x, mean, std));
}

MixtureModel::MixtureModel(std::vector<double> weights, std::vector<GaussianComponent> components) {
  if (weights.empty()) throw PreconditionError("mixture needs at least one component");
  if (weights.size() != components.size())
    throw DimensionMismatch("mixture weights and components differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("mixture weight must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw PreconditionError("mixture weights must sum to 1 (got " + std::to_string(total) + ")");
  for (const auto& c : components) {
    if (!std::isfinite(c.mean)) throw PreconditionError("component mean must be finite");
    if (!(c.std > 0.0) || !std::isfinite(c.std))
      throw PreconditionError("component std must be positive");
  }

  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return components[a].mean < components[b].mean;
  });
  weights_.reserve(order.size());
  components_.reserve(order.size());
  for (auto i : order) {
    weights_.push_back(weights[i] / total);
    components_.push_back(components[i]);
  }
}

MixtureModel MixtureModel::with_shared_std(std::vector<double> weights, std::vector<double> means,
                                           double std) {
  if (weights.size() != means.size())
    throw DimensionMismatch("weights and means differ in length");
  std::vector<GaussianComponent> comps;
  comps.reserve(means.size());
  for (double m : means) comps.push_back({m, std});
  return MixtureModel(std::move(weights), std::move(comps));
}

std::vector<double> MixtureModel::means() const {
  std::vector<double> out;
  for (const auto& c : components_) out.push_back(c.mean);
  return out;
}

std::vector<double> MixtureModel::stds() const {
  std::vector<double> out;
  for (const auto& c : components_) out.push_back(c.std);
  return out;
}

double MixtureModel::pdf(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    s += weights_[i] * normal_pdf(x, components_[i].mean, components_[i].std);
  return s;
}

double MixtureModel::log_pdf(double x) const {
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i)
    terms[i] = std::log(weights_[i]) + normal_log_pdf(x, components_[i].mean, components_[i].std);
  return log_sum_exp(terms);
}

double MixtureModel::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m += weights_[i] * components_[i].mean;
  return m;
}

double MixtureModel::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  const auto& c = components_[pick(rng)];
  return std::normal_distribution<double>(c.mean, c.std)(rng);
}

nlohmann::json MixtureModel::to_json() const {
  return {{"weights", weights_}, {"means", means()}, {"stds", stds()}};
}

MixtureModel MixtureModel::from_json(const nlohmann::json& j) {
  auto w = j.at("weights").get<std::vector<double>>();
  auto m = j.at("means").get<std::vector<double>>();
  auto s = j.at("stds").get<std::vector<double>>();
  if (w.size() != m.size() || w.size() != s.size())
    throw DimensionMismatch("mixture JSON arrays differ in length");
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < m.size(); ++i) comps.push_back({m[i], s[i]});
  return MixtureModel(std::move(w), std::move(comps));
}

double mixture_pdf(const MixtureModel& model, double x) { return model.pdf(x); }

double SampleView::total_weight() const {
  if (weights.empty()) return static_cast<double>(values.size());
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

ObservationBuffer::ObservationBuffer(BufferPolicy policy) : policy_(policy) {
  if (policy_.kind == BufferPolicy::Kind::Ring && policy_.ring_capacity == 0)
    throw PreconditionError("ring buffer capacity must be >= 1");
  if (policy_.kind == BufferPolicy::Kind::Binned && !(policy_.bin_width > 0.0))
    throw PreconditionError("bin width must be positive");
}

void ObservationBuffer::push(double x) {
  if (!std::isfinite(x)) throw PreconditionError("observation must be finite");
  ++received_;
  switch (policy_.kind) {
    case BufferPolicy::Kind::Unbounded:
      samples_.push_back(x);
      break;
    case BufferPolicy::Kind::Ring:
      if (samples_.size() < policy_.ring_capacity) {
        samples_.push_back(x);
      } else {
        samples_[ring_next_] = x;
        ring_next_ = (ring_next_ + 1) % policy_.ring_capacity;
      }
      break;
    case BufferPolicy::Kind::Binned:
      bins_[static_cast<std::int64_t>(std::floor(x / policy_.bin_width))] += 1.0;
      dirty_ = true;
      break;
  }
}

std::size_t ObservationBuffer::retained() const {
  return policy_.kind == BufferPolicy::Kind::Binned ? bins_.size() : samples_.size();
}

SampleView ObservationBuffer::view() const {
  if (policy_.kind != BufferPolicy::Kind::Binned) return {samples_, {}};
  if (dirty_ || bin_values_.size() != bins_.size()) {
    bin_values_.clear();
    bin_counts_.clear();
    for (const auto& [idx, count] : bins_) {
      bin_values_.push_back((static_cast<double>(idx) + 0.5) * policy_.bin_width);
      bin_counts_.push_back(count);
    }
    dirty_ = false;
  }
  return {bin_values_, bin_counts_};
}

double log_likelihood(const MixtureModel& model, const SampleView& data) {
  const std::size_t k = model.size();
  std::vector<double> logw(k), terms(k);
  for (std::size_t i = 0; i < k; ++i) logw[i] = std::log(model.weights()[i]);
  double ll = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto& c = model.components()[i];
      terms[i] = logw[i] + normal_log_pdf(data.values[t], c.mean, c.std);
    }
    ll += data.weight(t) * log_sum_exp(terms);
  }
  return ll;
}

std::vector<double> responsibilities(const MixtureModel& model, double x) {
  const std::size_t k = model.size();
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = model.components()[i];
    terms[i] = std::log(model.weights()[i]) + normal_log_pdf(x, c.mean, c.std);
  }
  const double lse = log_sum_exp(terms);
  for (auto& v : terms) v = std::exp(v - lse);
  return terms;
}

EmStepResult em_step(const MixtureModel& model, const SampleView& data, const EmOptions& options) {
  if (data.size() == 0) throw PreconditionError("em_step needs a nonempty buffer");
  const std::size_t k = model.size();
  const double total = data.total_weight();

  // Sufficient statistics are accumulated around the data centre so the
  // variance formula sum(r x^2)/n - mean^2 does not cancel catastrophically.
  double centre = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) centre += data.weight(t) * data.values[t];
  centre /= total;

  std::vector<double> logw(k), inv_std(k), log_norm(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = model.components()[i];
    logw[i] = std::log(model.weights()[i]);
    inv_std[i] = 1.0 / c.std;
    log_norm[i] = logw[i] - std::log(c.std) - kLogSqrt2Pi;
  }

  std::vector<double> mass(k, 0.0), s1(k, 0.0), s2(k, 0.0), terms(k);
  double ll = 0.0;
  double worst_ll = std::numeric_limits<double>::infinity();
  double worst_x = data.values[0];
  double lo = data.values[0], hi = data.values[0];
  for (std::size_t t = 0; t < data.size(); ++t) {
    const double x = data.values[t];
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double z = (x - model.components()[i].mean) * inv_std[i];
      terms[i] = log_norm[i] - 0.5 * z * z;
      m = std::max(m, terms[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      terms[i] = std::exp(terms[i] - m);
      s += terms[i];
    }
    const double point_ll = m + std::log(s);
    const double wt = data.weight(t);
    ll += wt * point_ll;
    if (point_ll < worst_ll) {
      worst_ll = point_ll;
      worst_x = x;
    }
    const double dx = x - centre;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = wt * terms[i] / s;
      mass[i] += r;
      s1[i] += r * dx;
      s2[i] += r * dx * dx;
    }
  }

  std::vector<double> weights(k);
  std::vector<GaussianComponent> comps(k);
  std::vector<std::size_t> reseeded;
  const double spread =
      std::max((hi - lo) / static_cast<double>(2 * k), std::sqrt(options.variance_floor));
  for (std::size_t i = 0; i < k; ++i) {
    if (mass[i] < options.mass_floor) {
      if (options.policy == DegeneratePolicy::Throw) throw DegenerateComponent(i, mass[i]);
      // Restart the component on the worst-explained sample.
      reseeded.push_back(i);
      weights[i] = 1.0 / static_cast<double>(k);
      comps[i] = {worst_x, spread};
      continue;
    }
    const double mu = s1[i] / mass[i];
    const double var = std::max(s2[i] / mass[i] - mu * mu, options.variance_floor);
    weights[i] = mass[i] / total;
    comps[i] = {centre + mu, std::sqrt(var)};
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= wsum;
  return {MixtureModel(std::move(weights), std::move(comps)), ll, std::move(reseeded)};
}

EmStepResult em_step(const MixtureModel& model, const ObservationBuffer& buffer,
                     const EmOptions& options) {
  return em_step(model, buffer.view(), options);
}

void EmTrace::write_csv(std::ostream& out) const {
  out << "iter,loglik\n";
  out.precision(17);
  for (std::size_t i = 0; i < loglik.size(); ++i) out << i << ',' << loglik[i] << '\n';
}

FitResult fit_em(const MixtureModel& model, const SampleView& data, double tol, int max_iter,
                 const EmOptions& options) {
  require(tol > 0.0, "fit_em: tol must be positive");
  require(max_iter >= 1, "fit_em: max_iter must be >= 1");
  if (data.size() == 0) throw PreconditionError("fit_em needs a nonempty buffer");

  FitResult out{model, {}};
  for (int it = 0; it < max_iter; ++it) {
    auto step = em_step(out.model, data, options);
    out.trace.loglik.push_back(step.loglik_before);
    const auto n = out.trace.loglik.size();
    if (n >= 2 && step.reseeded.empty() &&
        out.trace.loglik[n - 1] - out.trace.loglik[n - 2] < tol) {
      out.trace.converged = true;
      break;
    }
    out.trace.reseeds += static_cast<int>(step.reseeded.size());
    out.model = std::move(step.model);
    ++out.trace.iterations;
  }
  return out;
}

FitResult fit_em(const MixtureModel& model, const ObservationBuffer& buffer, double tol,
                 int max_iter, const EmOptions& options) {
  return fit_em(model, buffer.view(), tol, max_iter, options);
}

double kl_components(const MixtureModel& p, const MixtureModel& q) {
  if (p.size() != q.size())
    throw DimensionMismatch("kl_components: models have " + std::to_string(p.size()) + " and " +
                            std::to_string(q.size()) + " components");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.weights()[i];
    const double qi = q.weights()[i];
    if (pi == 0.0) continue;
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

double kl_density_mc(const MixtureModel& p, const MixtureModel& q, std::size_t n_samples,
                     Rng& rng) {
  require(n_samples >= 1, "kl_density_mc: n_samples must be >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x = p.sample(rng);
    acc += p.log_pdf(x) - q.log_pdf(x);
  }
  return acc / static_cast<double>(n_samples);
}

GaussianComponent sample_tendency_in_group(const MixtureModel& model, std::size_t group,
                                           double sigma_indiv, Rng& rng) {
  require(sigma_indiv > 0.0, "sigma_indiv must be positive");
  require(group < model.size(), "group index out of range");
  const auto& g = model.components()[group];
  return {std::normal_distribution<double>(g.mean, g.std)(rng), sigma_indiv};
}

GaussianComponent sample_agent_tendency(const MixtureModel& model, double sigma_indiv, Rng& rng) {
  require(sigma_indiv > 0.0, "sigma_indiv must be positive");
  std::discrete_distribution<std::size_t> pick(model.weights().begin(), model.weights().end());
  return sample_tendency_in_group(model, pick(rng), sigma_indiv, rng);
}

MixtureModel vq_initial_model(std::span<const double> prior, std::size_t k, Rng& rng,
                              int restarts) {
  require(k >= 1, "vq_initial_model: k must be >= 1");
  require(prior.size() >= k, "vq_initial_model: need at least k prior samples");
  const auto km = analysis::kmeans_1d(prior, k, restarts, rng);
  const double pooled = std::sqrt(std::max(km.wcss / static_cast<double>(prior.size()), kVarianceFloor));
  std::vector<GaussianComponent> comps;
  for (double c : km.centroids) comps.push_back({c, pooled});
  return MixtureModel(std::vector<double>(k, 1.0 / static_cast<double>(k)), std::move(comps));
}

}  // namespace normsim::gmm
