#include "normsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "normsim/error.hpp"
#include "normsim/parallel.hpp"

namespace normsim::network {

gmm::MixtureModel clinic_objective() {
  return gmm::MixtureModel::with_shared_std({0.1, 0.2, 0.1, 0.4, 0.2},
                                            {0.85, 1.05, 1.25, 1.45, 1.65}, 0.04);
}

void CommunityConfig::validate() const {
  require(agents >= 2, "community needs at least 2 agents");
  require(sigma_indiv > 0.0, "sigma_indiv must be positive");
  require(epsilon > 0.0, "epsilon must be positive");
  require(prior_samples >= obj.size(), "prior_samples must be at least the group count");
  require(init_noise >= 0.0, "init_noise must be >= 0");
  require(em_iterations >= 1, "em_iterations must be >= 1");
  require(em_tol > 0.0, "em_tol must be positive");
}

Community::Community(CommunityConfig config, std::vector<Agent> agents)
    : config_(std::move(config)), agents_(std::move(agents)) {
  config_.validate();
  require(agents_.size() == config_.agents, "agent count does not match config");
  for (const auto& a : agents_)
    if (a.sinp.size() != config_.obj.size())
      throw DimensionMismatch("agent SINP has a different component count than OBJ");
}

std::size_t Community::converged_count() const {
  return static_cast<std::size_t>(std::count_if(
      agents_.begin(), agents_.end(), [](const Agent& a) { return a.converged_at.has_value(); }));
}

namespace {

// Largest-remainder apportionment of n seats over the weights.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t n) {
  std::vector<std::size_t> seats(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(n);
    seats[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += seats[i];
    remainders.emplace_back(exact - static_cast<double>(seats[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < n; ++r, ++used) ++seats[remainders[r % remainders.size()].second];
  return seats;
}

double mixture_std(const gmm::MixtureModel& m) {
  const double mu = m.mean();
  double var = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& c = m.components()[i];
    var += m.weights()[i] * (c.std * c.std + (c.mean - mu) * (c.mean - mu));
  }
  return std::sqrt(var);
}

}  // namespace

Community make_community(const CommunityConfig& config, Rng& rng) {
  config.validate();
  const std::size_t n = config.agents;
  const std::size_t k = config.obj.size();

  std::vector<std::size_t> groups;
  if (config.stratified_groups) {
    const auto seats = apportion(config.obj.weights(), n);
    for (std::size_t g = 0; g < k; ++g) groups.insert(groups.end(), seats[g], g);
    std::shuffle(groups.begin(), groups.end(), rng);
  } else {
    std::discrete_distribution<std::size_t> pick(config.obj.weights().begin(),
                                                 config.obj.weights().end());
    for (std::size_t i = 0; i < n; ++i) groups.push_back(pick(rng));
  }

  const double noise = config.init_noise * mixture_std(config.obj);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<Agent> agents;
  agents.reserve(n);
  const gmm::MixtureModel prior_source =
      config.prior_equal_weights
          ? gmm::MixtureModel(std::vector<double>(k, 1.0 / static_cast<double>(k)),
                              config.obj.components())
          : config.obj;
  std::vector<double> prior(config.prior_samples);
  for (std::size_t i = 0; i < n; ++i) {
    auto tendency = gmm::sample_tendency_in_group(config.obj, groups[i], config.sigma_indiv, rng);
    for (auto& x : prior) x = prior_source.sample(rng);
    auto vq = gmm::vq_initial_model(prior, k, rng);
    std::vector<gmm::GaussianComponent> comps = vq.components();
    for (auto& c : comps) c.mean += noise * jitter(rng);
    gmm::ObservationBuffer buffer(config.buffer);
    if (config.prior_in_buffer)
      for (double x : prior) buffer.push(x);
    agents.push_back(Agent{i, groups[i], tendency,
                           gmm::MixtureModel(vq.weights(), std::move(comps)), std::move(buffer),
                           std::nullopt});
  }
  return Community(config, std::move(agents));
}

void step(Community& community, Rng& rng) {
  auto& agents = community.agents();
  const std::size_t n = agents.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> receivers(order.begin(), order.begin() + static_cast<long>(n / 2));
  std::vector<std::size_t> senders(order.begin() + static_cast<long>(n / 2), order.end());
  std::sort(receivers.begin(), receivers.end());
  std::sort(senders.begin(), senders.end());

  for (auto r : receivers) {
    for (auto s : senders) {
      const auto& t = agents[s].tendency;
      agents[r].buffer.push(std::normal_distribution<double>(t.mean, t.std)(rng));
    }
  }

  const auto& cfg = community.config();
  gmm::EmOptions em;
  em.variance_floor = cfg.sinp_variance_floor > 0.0 ? cfg.sinp_variance_floor
                                                    : cfg.sigma_indiv * cfg.sigma_indiv;
  for (auto r : receivers) {
    auto& a = agents[r];
    if (a.converged_at && !cfg.refit_converged) continue;
    a.sinp = gmm::fit_em(a.sinp, a.buffer, cfg.em_tol, cfg.em_iterations, em).model;
  }
  community.set_last_receivers(std::move(receivers));
  community.advance_time();
}

std::vector<double> kl_to_objective(const Community& community) {
  std::vector<double> out;
  out.reserve(community.size());
  for (const auto& a : community.agents()) out.push_back(gmm::kl_components(a.sinp, community.obj()));
  return out;
}

void check_convergence(Community& community) {
  for (auto& a : community.agents()) {
    if (a.converged_at) continue;
    if (gmm::kl_components(a.sinp, community.obj()) < community.epsilon())
      a.converged_at = community.time();
  }
}

ConvergenceReport run_until_converged(Community& community, long max_steps, Rng& rng,
                                      std::uint64_t seed, const StepObserver& observer) {
  require(max_steps >= 0, "max_steps must be >= 0");
  check_convergence(community);
  if (observer) observer(community);
  while (!community.all_converged() && community.time() < max_steps) {
    step(community, rng);
    check_convergence(community);
    if (observer) observer(community);
  }

  ConvergenceReport rep;
  rep.seed = seed;
  rep.agents = community.size();
  rep.steps_run = community.time();
  for (const auto& a : community.agents()) rep.converged_step.push_back(a.converged_at);
  rep.fraction = static_cast<double>(community.converged_count()) /
                 static_cast<double>(community.size());
  if (community.all_converged()) {
    long last = 0;
    for (const auto& s : rep.converged_step) last = std::max(last, *s);
    rep.all_converged_step = last;
  }
  return rep;
}

void ConvergenceReport::write_csv(std::ostream& out) const {
  out << "seed,N,agent_id,converged_step\n";
  for (std::size_t i = 0; i < converged_step.size(); ++i) {
    out << seed << ',' << agents << ',' << i << ',';
    if (converged_step[i]) out << *converged_step[i];
    out << '\n';
  }
  out << seed << ',' << agents << ",summary,";
  if (all_converged_step) out << *all_converged_step;
  out << ",fraction=" << fraction << ",steps=" << steps_run << '\n';
}

std::vector<ScanPoint> convergence_ratio_scan(std::size_t n_from, std::size_t n_to,
                                              std::size_t n_step, std::size_t repeats,
                                              const CommunityConfig& base, long max_steps,
                                              std::uint64_t seed, unsigned jobs) {
  require(n_from <= n_to, "scan: n_from must be <= n_to");
  require(n_step >= 1, "scan: n_step must be >= 1");
  require(repeats >= 1, "scan: repeats must be >= 1");
  std::vector<std::size_t> sizes;
  for (std::size_t n = n_from; n <= n_to; n += n_step) sizes.push_back(n);

  std::vector<double> fractions(sizes.size() * repeats);
  parallel_for(fractions.size(), jobs, [&](std::size_t idx) {
    const std::size_t si = idx / repeats;
    const std::size_t rep = idx % repeats;
    auto cfg = base;
    cfg.agents = sizes[si];
    cfg.refit_converged = false;
    const auto run_seed = derive_seed(seed, {sizes[si], rep});
    Rng rng(run_seed);
    auto community = make_community(cfg, rng);
    fractions[idx] = run_until_converged(community, max_steps, rng, run_seed).fraction;
  });

  std::vector<ScanPoint> out;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    double mean = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) mean += fractions[si * repeats + r];
    mean /= static_cast<double>(repeats);
    double var = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      const double d = fractions[si * repeats + r] - mean;
      var += d * d;
    }
    const double sd = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
    out.push_back({sizes[si], mean, sd});
  }
  return out;
}

void write_scan_csv(std::ostream& out, const std::vector<ScanPoint>& scan) {
  out << "N,mean_fraction,std_fraction\n";
  out.precision(12);
  for (const auto& p : scan) out << p.agents << ',' << p.mean_fraction << ',' << p.std_fraction << '\n';
}

}  // namespace normsim::network
