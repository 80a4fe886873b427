#include "normsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <gsl/gsl_multimin.h>

#include "normsim/error.hpp"

namespace normsim::analysis {

// ---------------------------------------------------------------- k-means

double wcss_1d(std::span<const double> points, std::span<const double> centroids) {
  double total = 0.0;
  for (double x : points) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : centroids) best = std::min(best, (x - c) * (x - c));
    total += best;
  }
  return total;
}

namespace {

KMeansResult lloyd_once(std::span<const double> points, std::size_t k, Rng& rng, int max_iter) {
  const std::size_t n = points.size();
  std::vector<double> centroids;
  centroids.reserve(k);

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centroids.push_back(points[first(rng)]);
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centroids) best = std::min(best, (points[i] - c) * (points[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centroids.push_back(points[first(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(points[pick]);
  }

  KMeansResult res;
  res.labels.assign(n, 0);
  std::vector<double> sum(k);
  std::vector<std::size_t> count(k);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bestd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (points[i] - centroids[c]) * (points[i] - centroids[c]);
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
    }
    res.iterations = it + 1;
    if (!changed) break;
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[res.labels[i]] += points[i];
      ++count[res.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centroids[c] = sum[c] / static_cast<double>(count[c]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its centroid.
      std::size_t far = 0;
      double fard = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(points[i] - centroids[res.labels[i]]);
        if (d > fard) {
          fard = d;
          far = i;
        }
      }
      centroids[c] = points[far];
    }
  }

  // Canonical ascending order, relabelled.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return centroids[a] < centroids[b]; });
  std::vector<std::size_t> rank(k);
  for (std::size_t r = 0; r < k; ++r) rank[order[r]] = r;
  res.centroids.resize(k);
  for (std::size_t r = 0; r < k; ++r) res.centroids[r] = centroids[order[r]];
  for (auto& l : res.labels) l = rank[l];
  res.wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = points[i] - res.centroids[res.labels[i]];
    res.wcss += d * d;
  }
  return res;
}

}  // namespace

KMeansResult kmeans_1d(std::span<const double> points, std::size_t k, int restarts, Rng& rng,
                       int max_iter) {
  if (points.empty()) throw PreconditionError("kmeans: no points");
  require(k >= 1 && k <= points.size(), "kmeans: k must be in [1, number of points]");
  require(restarts >= 1, "kmeans: restarts must be >= 1");
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto res = lloyd_once(points, k, rng, max_iter);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  return best;
}

std::vector<ElbowPoint> kmeans_elbow(std::span<const double> points,
                                     std::pair<std::size_t, std::size_t> k_range, int restarts,
                                     Rng& rng) {
  if (points.empty()) throw PreconditionError("kmeans_elbow: no points");
  const auto [lo, hi] = k_range;
  require(lo >= 1 && lo <= hi && hi <= points.size(),
          "kmeans_elbow: k range must lie within [1, number of points]");
  std::vector<ElbowPoint> out;
  for (std::size_t k = lo; k <= hi; ++k) {
    auto res = kmeans_1d(points, k, restarts, rng);
    double w = res.wcss;
    // Best-of-restarts can still land above the previous k; keeping the
    // smaller value is valid because k clusters can reproduce any k-1 split.
    if (!out.empty()) w = std::min(w, out.back().wcss);
    out.push_back({k, w});
  }
  return out;
}

std::size_t elbow_k(std::span<const ElbowPoint> curve, double floor_ratio) {
  if (curve.empty()) throw PreconditionError("elbow_k: empty curve");
  const double base = curve.front().wcss;
  if (base <= 0.0 || curve.size() == 1) return curve.front().k;
  const double floor = floor_ratio * base;
  auto lw = [&](std::size_t i) { return std::log(std::max(curve[i].wcss, floor)); };
  if (curve.size() == 2) return lw(1) < lw(0) ? curve[1].k : curve[0].k;
  std::size_t best = 0;
  double best_bend = 0.0;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double bend = (lw(i - 1) - lw(i)) - (lw(i) - lw(i + 1));
    if (bend > best_bend) {
      best_bend = bend;
      best = i;
    }
  }
  return curve[best].k;
}

// ---------------------------------------------------------------- Shannon

double shannon_diversity(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw PreconditionError("preference vector entries must be >= 0");
    sum += v;
  }
  if (sum == 0.0) throw PreconditionError("diversity index undefined for an all-zero vector");
  if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("preference vector must sum to 1");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

// ---------------------------------------------------------------- fits

std::string to_string(Family f) {
  switch (f) {
    case Family::Lognormal: return "lognormal";
    case Family::Pareto: return "pareto";
    case Family::Burr: return "burr";
    case Family::Normal: return "normal";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "lognormal") return Family::Lognormal;
  if (s == "pareto") return Family::Pareto;
  if (s == "burr") return Family::Burr;
  if (s == "normal") return Family::Normal;
  throw PreconditionError("unknown distribution family '" + s + "'");
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double burr_logpdf(double x, double c, double k, double s) {
  const double z = x / s;
  const double zc = std::pow(z, c);
  return std::log(c) + std::log(k) - std::log(s) + (c - 1.0) * std::log(z) -
         (k + 1.0) * std::log1p(zc);
}

struct BurrData {
  std::span<const double> xs;
};

double burr_negll(const gsl_vector* v, void* params) {
  const auto* d = static_cast<const BurrData*>(params);
  const double c = std::exp(gsl_vector_get(v, 0));
  const double k = std::exp(gsl_vector_get(v, 1));
  const double s = std::exp(gsl_vector_get(v, 2));
  double ll = 0.0;
  for (double x : d->xs) ll += burr_logpdf(x, c, k, s);
  if (!std::isfinite(ll)) return 1e300;
  return -ll;
}

// Nelder-Mead on (log c, log k, log scale).
std::pair<std::vector<double>, bool> fit_burr(std::span<const double> xs, double start_scale,
                                              double start_c) {
  BurrData data{xs};
  gsl_multimin_function fn{&burr_negll, 3, &data};
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;

  std::vector<double> best;
  double best_f = std::numeric_limits<double>::infinity();
  bool best_conv = false;
  for (double k0 : {0.5, 1.0, 3.0}) {
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(type, 3);
    gsl_vector* x = gsl_vector_alloc(3);
    gsl_vector* step = gsl_vector_alloc(3);
    gsl_vector_set(x, 0, std::log(start_c));
    gsl_vector_set(x, 1, std::log(k0));
    gsl_vector_set(x, 2, std::log(start_scale));
    gsl_vector_set_all(step, 0.5);
    gsl_multimin_fminimizer_set(m, &fn, x, step);
    bool conv = false;
    for (int it = 0; it < 2000; ++it) {
      if (gsl_multimin_fminimizer_iterate(m) != 0) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-7) == GSL_SUCCESS) {
        conv = true;
        break;
      }
    }
    const double f = m->fval;
    if (f < best_f) {
      best_f = f;
      best_conv = conv;
      best = {std::exp(gsl_vector_get(m->x, 0)), std::exp(gsl_vector_get(m->x, 1)),
              std::exp(gsl_vector_get(m->x, 2))};
    }
    gsl_vector_free(step);
    gsl_vector_free(x);
    gsl_multimin_fminimizer_free(m);
  }
  return {best, best_conv};
}

}  // namespace

double FitResult::cdf(double x) const {
  switch (family) {
    case Family::Lognormal:
      if (x <= 0.0) return 0.0;
      return 0.5 * std::erfc(-(std::log(x) - params[0]) / params[1] * kInvSqrt2);
    case Family::Pareto:
      if (x <= params[0]) return 0.0;
      return 1.0 - std::pow(params[0] / x, params[1]);
    case Family::Burr:
      if (x <= 0.0) return 0.0;
      return 1.0 - std::pow(1.0 + std::pow(x / params[2], params[0]), -params[1]);
    case Family::Normal:
      return 0.5 * std::erfc(-(x - params[0]) / params[1] * kInvSqrt2);
  }
  return 0.0;
}

double FitResult::pdf(double x) const {
  switch (family) {
    case Family::Lognormal: {
      if (x <= 0.0) return 0.0;
      const double z = (std::log(x) - params[0]) / params[1];
      return std::exp(-0.5 * z * z) / (x * params[1] * std::sqrt(2.0 * M_PI));
    }
    case Family::Pareto:
      if (x < params[0]) return 0.0;
      return params[1] * std::pow(params[0], params[1]) / std::pow(x, params[1] + 1.0);
    case Family::Burr:
      if (x <= 0.0) return 0.0;
      return std::exp(burr_logpdf(x, params[0], params[1], params[2]));
    case Family::Normal: {
      const double z = (x - params[0]) / params[1];
      return std::exp(-0.5 * z * z) / (params[1] * std::sqrt(2.0 * M_PI));
    }
  }
  return 0.0;
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw PreconditionError("ks_statistic: no samples");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

FitResult fit_heavy_tail(std::span<const double> samples, Family family) {
  require(samples.size() >= 10, "fit_heavy_tail: need at least 10 samples");
  for (double x : samples)
    if (!(x > 0.0) || !std::isfinite(x)) throw PreconditionError("fit_heavy_tail: samples must be positive");
  const double n = static_cast<double>(samples.size());

  FitResult fit;
  fit.family = family;
  switch (family) {
    case Family::Lognormal: {
      double mu = 0.0;
      for (double x : samples) mu += std::log(x);
      mu /= n;
      double var = 0.0;
      for (double x : samples) var += (std::log(x) - mu) * (std::log(x) - mu);
      fit.params = {mu, std::max(std::sqrt(var / n), 1e-12)};
      break;
    }
    case Family::Pareto: {
      const double xm = *std::min_element(samples.begin(), samples.end());
      double s = 0.0;
      for (double x : samples) s += std::log(x / xm);
      fit.params = {xm, s > 0.0 ? n / s : 1e12};
      break;
    }
    case Family::Normal: {
      const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
      double var = 0.0;
      for (double x : samples) var += (x - mean) * (x - mean);
      fit.params = {mean, std::max(std::sqrt(var / n), 1e-12)};
      break;
    }
    case Family::Burr: {
      std::vector<double> sorted(samples.begin(), samples.end());
      std::sort(sorted.begin(), sorted.end());
      const double median = sorted[sorted.size() / 2];
      double lmu = 0.0, lvar = 0.0;
      for (double x : samples) lmu += std::log(x);
      lmu /= n;
      for (double x : samples) lvar += (std::log(x) - lmu) * (std::log(x) - lmu);
      const double lsd = std::max(std::sqrt(lvar / n), 1e-3);
      auto [params, conv] = fit_burr(samples, median, std::clamp(1.6 / lsd, 0.05, 200.0));
      fit.params = params;
      fit.converged = conv;
      break;
    }
  }
  fit.loglik = 0.0;
  for (double x : samples) fit.loglik += std::log(std::max(fit.pdf(x), 1e-300));
  fit.ks_statistic = ks_statistic(samples, [&](double x) { return fit.cdf(x); });
  return fit;
}

// ---------------------------------------------------------------- smoothing

std::vector<double> sliding_window_mean(std::span<const double> series, std::size_t window) {
  require(window >= 1, "sliding_window_mean: window must be >= 1");
  const std::size_t n = series.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
  const std::size_t left = (window - 1) / 2;
  const std::size_t right = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

bool DailySeries::covers(std::chrono::year_month_day d) const {
  const auto offset = (std::chrono::sys_days(d) - std::chrono::sys_days(start)).count();
  return offset >= 0 && static_cast<std::size_t>(offset) < days();
}

double DailySeries::value(std::size_t agent, std::chrono::year_month_day d) const {
  const auto offset = (std::chrono::sys_days(d) - std::chrono::sys_days(start)).count();
  return agents.at(agent).at(static_cast<std::size_t>(offset));
}

namespace {

double increment_for(const DailySeries& s, int y) {
  using namespace std::chrono;
  const year_month_day a{year{y}, December, day{31}};
  const year_month_day b{year{y + 1}, December, day{31}};
  double acc = 0.0;
  for (std::size_t i = 0; i < s.agents.size(); ++i) acc += s.value(i, b) - s.value(i, a);
  return acc / static_cast<double>(s.agents.size());
}

}  // namespace

std::vector<std::pair<int, double>> yearly_increment(const DailySeries& series,
                                                     std::span<const int> years) {
  using namespace std::chrono;
  require(!series.agents.empty(), "yearly_increment: no agents");
  std::vector<std::pair<int, double>> out;
  for (int y : years) {
    const year_month_day a{year{y}, December, day{31}};
    const year_month_day b{year{y + 1}, December, day{31}};
    if (!series.covers(a) || !series.covers(b))
      throw PreconditionError("yearly_increment: series does not cover Dec 31 of " +
                              std::to_string(series.covers(a) ? y + 1 : y));
    out.emplace_back(y, increment_for(series, y));
  }
  return out;
}

std::vector<std::pair<int, double>> yearly_increment(const DailySeries& series) {
  using namespace std::chrono;
  std::vector<int> years;
  if (series.days() == 0) return {};
  const int first = static_cast<int>(series.start.year()) - 1;
  const auto last_day = sys_days(series.start) + days(static_cast<long>(series.days()) - 1);
  const int last = static_cast<int>(year_month_day(last_day).year());
  for (int y = first; y <= last; ++y) {
    const year_month_day a{year{y}, December, day{31}};
    const year_month_day b{year{y + 1}, December, day{31}};
    if (series.covers(a) && series.covers(b)) years.push_back(y);
  }
  return yearly_increment(series, years);
}

// ---------------------------------------------------------------- export

std::vector<HistogramBin> histogram_with_fit(std::span<const double> samples, std::size_t bins,
                                             const FitResult& fit) {
  require(bins >= 1, "histogram: bins must be >= 1");
  require(!samples.empty(), "histogram: no samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn;
  const double width = std::max((*mx - lo) / static_cast<double>(bins), 1e-12);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].left = lo + width * static_cast<double>(b);
    out[b].right = out[b].left + width;
    out[b].count = 0;
    out[b].fitted_density =
        static_cast<double>(samples.size()) * (fit.cdf(out[b].right) - fit.cdf(out[b].left));
  }
  for (double x : samples) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    ++out[std::min(b, bins - 1)].count;
  }
  return out;
}

void write_fit_csv(std::ostream& out, std::span<const FitResult> fits) {
  out << "family,p0,p1,p2,loglik,ks_statistic,converged\n";
  out.precision(12);
  for (const auto& f : fits) {
    out << to_string(f.family);
    for (std::size_t i = 0; i < 3; ++i) {
      out << ',';
      if (i < f.params.size()) out << f.params[i];
    }
    out << ',' << f.loglik << ',' << f.ks_statistic << ',' << (f.converged ? 1 : 0) << '\n';
  }
}

void write_elbow_csv(std::ostream& out, std::span<const ElbowPoint> curve) {
  out << "k,wcss\n";
  out.precision(12);
  for (const auto& p : curve) out << p.k << ',' << p.wcss << '\n';
}

void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "bin_left,bin_right,count,fitted_density\n";
  out.precision(12);
  for (const auto& b : bins)
    out << b.left << ',' << b.right << ',' << b.count << ',' << b.fitted_density << '\n';
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("ols_slope: length mismatch");
  require(x.size() >= 2, "ols_slope: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  require(sxx > 0.0, "ols_slope: x values are all equal");
  return sxy / sxx;
}

}  // namespace normsim::analysis
