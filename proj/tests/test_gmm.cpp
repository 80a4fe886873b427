#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "near.hpp"
#include "normsim/error.hpp"
#include "normsim/gmm.hpp"

using namespace normsim;
using namespace normsim::gmm;

namespace {

MixtureModel two(double w0, double m0, double m1, double sd) {
  return MixtureModel::with_shared_std({w0, 1.0 - w0}, {m0, m1}, sd);
}

// Direct evaluation of sum_i w_i N(x | mu_i, sd_i), independent of the library.
double density_by_hand(const std::vector<double>& w, const std::vector<double>& mu,
                       const std::vector<double>& sd, double x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double z = (x - mu[i]) / sd[i];
    s += w[i] * std::exp(-0.5 * z * z) / (sd[i] * std::sqrt(2.0 * std::numbers::pi));
  }
  return s;
}

}  // namespace

TEST_SUITE("gmm") {

TEST_CASE("mixture density at hand-checked points") {
  CHECK_NEAR(mixture_pdf(MixtureModel({1.0}, {{0.0, 1.0}}), 0.0), 0.39894, 1e-5);
  CHECK_NEAR(mixture_pdf(two(0.5, -1.0, 1.0, 1.0), 0.0), 0.24197, 1e-5);
  // 0.3 and 0.7 weights at equal distance 2 sd: both terms are 0.7978846 * e^-2.
  CHECK_NEAR(mixture_pdf(two(0.3, 0.0, 2.0, 0.5), 1.0), 0.1079819330, 1e-9);
}

TEST_CASE("mixture density integrates to one") {
  const auto m = MixtureModel({0.2, 0.5, 0.3}, {{-1.0, 0.3}, {0.5, 0.1}, {2.0, 0.7}});
  const double lo = -1.0 - 10 * 0.7, hi = 2.0 + 10 * 0.7;
  const int n = 200000;  // Simpson, even n
  const double h = (hi - lo) / n;
  double s = m.pdf(lo) + m.pdf(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * m.pdf(lo + i * h);
  CHECK_NEAR(s * h / 3.0, 1.0, 1e-6);
}

TEST_CASE("mixture rejects invalid parameters") {
  CHECK_THROWS_AS(MixtureModel({0.5, 0.6}, {{0, 1}, {1, 1}}), PreconditionError);
  CHECK_THROWS_AS(MixtureModel({1.0}, {{0, 0.0}}), PreconditionError);
  CHECK_THROWS_AS(MixtureModel({0.5, 0.5}, {{0, 1}}), DimensionMismatch);
  CHECK_THROWS_AS(MixtureModel({}, {}), PreconditionError);
}

TEST_CASE("components are kept in ascending mean order") {
  const auto m = MixtureModel({0.7, 0.3}, {{5.0, 1.0}, {1.0, 2.0}});
  CHECK(m.means() == std::vector<double>{1.0, 5.0});
  CHECK(m.weights() == std::vector<double>{0.3, 0.7});
  CHECK(m.stds() == std::vector<double>{2.0, 1.0});
}

TEST_CASE("json round trip") {
  const auto m = MixtureModel({0.25, 0.75}, {{-1.0, 0.5}, {3.0, 2.0}});
  const auto j = m.to_json();
  CHECK(j.at("weights").size() == 2);
  CHECK(j.at("stds")[1] == 2.0);
  CHECK(MixtureModel::from_json(j) == m);
}

TEST_CASE("tendency draws") {
  Rng rng(3);
  const auto degenerate = MixtureModel::with_shared_std({1.0}, {5.0}, 1e-300);
  const auto t = sample_agent_tendency(degenerate, 0.1, rng);
  CHECK(t.mean == 5.0);
  CHECK(t.std == 0.1);

  const auto m = two(0.2, 0.0, 100.0, 1.0);
  int low = 0;
  for (int i = 0; i < 10000; ++i) low += sample_agent_tendency(m, 0.05, rng).mean < 50.0;
  CHECK_NEAR(low / 10000.0, 0.2, 0.02);

  Rng a(11), b(11);
  const auto five = MixtureModel::with_shared_std({0.1, 0.2, 0.1, 0.4, 0.2},
                                                  {0.85, 1.05, 1.25, 1.45, 1.65}, 0.04);
  CHECK(sample_agent_tendency(five, 0.05, a).mean == sample_agent_tendency(five, 0.05, b).mean);
  CHECK_THROWS_AS(sample_agent_tendency(five, 0.0, a), PreconditionError);
}

TEST_CASE("single-component EM step is the closed-form ML fit") {
  const std::vector<double> x = {1.0, 2.0, 3.0};
  const auto r = em_step(MixtureModel({1.0}, {{0.0, 1.0}}), SampleView{x, {}});
  CHECK_NEAR(r.model.components()[0].mean, 2.0, 1e-12);
  const double sd = r.model.components()[0].std;
  CHECK_NEAR(sd * sd, 2.0 / 3.0, 1e-12);
}

TEST_CASE("symmetric model splits the midpoint evenly") {
  const auto m = two(0.5, -1.0, 1.0, 0.7);
  const auto r = responsibilities(m, 0.0);
  CHECK_NEAR(r[0], 0.5, 1e-12);
  CHECK_NEAR(r[1], 0.5, 1e-12);
}

TEST_CASE("EM weights stay normalized and responsibilities sum to one") {
  Rng rng(5);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(40);
    for (auto& v : x) v = z(rng) * 2.0;
    const auto m = MixtureModel({0.3, 0.3, 0.4}, {{-1.0, 1.0}, {0.0, 0.5}, {2.0, 1.0}});
    const auto r = em_step(m, SampleView{x, {}});
    double s = 0.0;
    for (double w : r.model.weights()) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
    for (double v : x) {
      double t = 0.0;
      for (double p : responsibilities(m, v)) t += p;
      CHECK(std::abs(t - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("EM log-likelihood never decreases") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> kdist(1, 4), ndist(20, 200);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(ndist(rng));
    const double c = u(rng);
    for (auto& v : x) v = c + u(rng) * (rep % 3 + 1) * 0.3;
    const int k = kdist(rng);
    std::vector<double> w(k, 1.0 / k);
    std::vector<GaussianComponent> comps;
    for (int i = 0; i < k; ++i) comps.push_back({u(rng), 1.0});
    const auto fit = fit_em(MixtureModel(w, comps), SampleView{x, {}}, 1e-12, 50);
    for (std::size_t i = 1; i < fit.trace.loglik.size(); ++i)
      CHECK(fit.trace.loglik[i] >= fit.trace.loglik[i - 1] - 1e-9);
  }
}

TEST_CASE("EM recovers two separated clusters") {
  Rng rng(2);
  std::normal_distribution<double> z;
  std::vector<double> x;
  for (int i = 0; i < 500; ++i) x.push_back(z(rng));
  for (int i = 0; i < 500; ++i) x.push_back(10.0 + z(rng));
  const auto fit = fit_em(two(0.5, 2.0, 7.0, 3.0), SampleView{x, {}}, 1e-9, 500);
  CHECK_NEAR(fit.model.means()[0], 0.0, 0.2);
  CHECK(std::abs(fit.model.means()[1] - 10.0) < 0.2);
  CHECK(fit.trace.converged);
}

TEST_CASE("EM from the generating model barely moves") {
  Rng rng(4);
  const auto m = two(0.4, 0.0, 6.0, 1.0);
  std::vector<double> x(20000);
  for (auto& v : x) v = m.sample(rng);
  const auto fit = fit_em(m, SampleView{x, {}}, 1e-3, 100);
  CHECK(fit.trace.iterations <= 5);
  CHECK(fit.trace.loglik.back() - fit.trace.loglik.front() < 5.0);
}

TEST_CASE("fit_em and em_step preconditions") {
  const std::vector<double> x = {1.0};
  const auto m = MixtureModel({1.0}, {{0.0, 1.0}});
  CHECK_THROWS_AS(fit_em(m, SampleView{x, {}}, 1e-6, 0), PreconditionError);
  CHECK_THROWS_AS(fit_em(m, SampleView{x, {}}, 0.0, 5), PreconditionError);
  CHECK_THROWS_AS(em_step(m, ObservationBuffer{}), PreconditionError);
}

TEST_CASE("collapsed component is reseeded or reported") {
  const std::vector<double> x = {0.0, 0.01, -0.01, 0.02};
  const auto m = two(0.5, 0.0, 1000.0, 0.1);
  const auto r = em_step(m, SampleView{x, {}});
  CHECK(r.reseeded.size() == 1);
  EmOptions strict;
  strict.policy = DegeneratePolicy::Throw;
  CHECK_THROWS_AS(em_step(m, SampleView{x, {}}, strict), DegenerateComponent);
}

TEST_CASE("variance floor holds on repeated samples") {
  const std::vector<double> x(10, 3.0);
  const auto r = em_step(MixtureModel({1.0}, {{3.0, 1.0}}), SampleView{x, {}});
  CHECK(r.model.components()[0].std * r.model.components()[0].std >= kVarianceFloor * (1 - 1e-12));
}

TEST_CASE("weight KL") {
  CHECK(kl_components(two(0.5, 0, 1, 1), two(0.5, 0, 1, 1)) == 0.0);
  CHECK_NEAR(kl_components(two(0.5, 0, 1, 1), two(0.9, 0, 1, 1)), 0.5108, 1e-4);
  CHECK_NEAR(kl_components(two(1.0, 0, 1, 1), two(0.5, 0, 1, 1)), 0.6931, 1e-4);
  CHECK(std::isinf(kl_components(two(0.5, 0, 1, 1), two(1.0, 0, 1, 1))));
  CHECK_THROWS_AS(kl_components(two(0.5, 0, 1, 1), MixtureModel({1.0}, {{0, 1}})),
                  DimensionMismatch);
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 200; ++i) CHECK(kl_components(two(u(rng), 0, 1, 1), two(u(rng), 0, 1, 1)) >= 0.0);
}

TEST_CASE("density KL estimate") {
  Rng rng(8);
  const auto p = MixtureModel({1.0}, {{0.0, 1.0}});
  const auto q = MixtureModel({1.0}, {{1.0, 1.0}});
  CHECK(std::abs(kl_density_mc(p, p, 100000, rng)) < 0.02);
  CHECK_NEAR(kl_density_mc(p, q, 100000, rng), 0.5, 0.05);
  CHECK(std::isfinite(kl_density_mc(p, q, 1, rng)));
}

TEST_CASE("buffers") {
  ObservationBuffer ring(BufferPolicy::ring(3));
  for (int i = 0; i < 5; ++i) ring.push(i);
  CHECK(ring.size() == 5);
  CHECK(ring.retained() == 3);

  ObservationBuffer binned(BufferPolicy::binned(0.1));
  for (double x : {1.0, 1.01, 1.02, 2.0}) binned.push(x);
  CHECK(binned.size() == 4);
  const auto v = binned.view();
  CHECK_NEAR(v.total_weight(), 4.0, 1e-12);
  CHECK(v.size() < 4);
  CHECK_THROWS_AS(binned.push(NAN), PreconditionError);
}

TEST_CASE("EM trace CSV") {
  const std::vector<double> x = {1, 2, 3, 4};
  const auto fit = fit_em(MixtureModel({1.0}, {{0.0, 1.0}}), SampleView{x, {}}, 1e-9, 3);
  std::ostringstream s;
  fit.trace.write_csv(s);
  CHECK(s.str().rfind("iter,loglik\n", 0) == 0);
}

TEST_CASE("density matches direct summation") {
  const auto m = MixtureModel({0.1, 0.6, 0.3}, {{-2, 0.4}, {0, 1}, {3, 2}});
  for (double x = -5; x <= 6; x += 0.37)
    CHECK_NEAR(m.pdf(x), density_by_hand({0.1, 0.6, 0.3}, {-2, 0, 3}, {0.4, 1, 2}, x), 1e-12);
}

}
