#pragma once

// Measurements used by the experiments: diversity index, elbow curves,
// heavy-tail fits with Kolmogorov-Smirnov distance, and smoothing.

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "normsim/kmeans.hpp"
#include "normsim/random.hpp"

namespace normsim::analysis {

inline constexpr std::size_t kDiagnosticMethods = 7;

/// Shannon diversity -sum p ln p (nats) of a practice preference vector.
/// Throws PreconditionError for an all-zero vector or one that does not sum to 1.
double shannon_diversity(std::span<const double> proportions);

struct ElbowPoint {
  std::size_t k;
  double wcss;
};

std::vector<ElbowPoint> kmeans_elbow(std::span<const double> points,
                                     std::pair<std::size_t, std::size_t> k_range, int restarts,
                                     Rng& rng);

/// k at the sharpest bend of log WCSS: the drop into k minus the drop out of
/// it, largest over interior points. WCSS is floored at `floor_ratio` times
/// the k=1 value so that near-perfect fits do not dominate. Returns the first
/// k when the curve has no bend.
std::size_t elbow_k(std::span<const ElbowPoint> curve, double floor_ratio = 1e-3);

enum class Family { Lognormal, Pareto, Burr, Normal };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Parameter layout per family:
///   Lognormal (mu, sigma)   Pareto (x_min, alpha)
///   Burr XII  (c, k, scale) Normal (mean, sd)
struct FitResult {
  Family family = Family::Lognormal;
  std::vector<double> params;
  double loglik = 0.0;
  double ks_statistic = 1.0;
  bool converged = true;

  double cdf(double x) const;
  double pdf(double x) const;
};

/// Maximum-likelihood fit of `family` to positive samples, plus the KS distance
/// between the empirical CDF and the fitted CDF.
FitResult fit_heavy_tail(std::span<const double> samples, Family family);

/// sup_x |ECDF(x) - cdf(x)| for a continuous cdf.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Centred moving average; windows shrink at the ends.
std::vector<double> sliding_window_mean(std::span<const double> series, std::size_t window);

/// Daily values for several agents starting at `start`.
struct DailySeries {
  std::chrono::year_month_day start;
  std::vector<std::vector<double>> agents;

  std::size_t days() const { return agents.empty() ? 0 : agents.front().size(); }
  bool covers(std::chrono::year_month_day d) const;
  double value(std::size_t agent, std::chrono::year_month_day d) const;
};

/// Mean over agents of value(Dec 31, y+1) - value(Dec 31, y) for every year y
/// whose two boundaries are covered.
std::vector<std::pair<int, double>> yearly_increment(const DailySeries& series);

/// Same for explicitly requested years; throws PreconditionError if a boundary
/// date is not covered.
std::vector<std::pair<int, double>> yearly_increment(const DailySeries& series,
                                                     std::span<const int> years);

struct HistogramBin {
  double left;
  double right;
  std::size_t count;
  double fitted_density;  // expected count in the bin under the fit
};

std::vector<HistogramBin> histogram_with_fit(std::span<const double> samples, std::size_t bins,
                                             const FitResult& fit);

void write_fit_csv(std::ostream& out, std::span<const FitResult> fits);
void write_elbow_csv(std::ostream& out, std::span<const ElbowPoint> curve);
void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins);

/// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace normsim::analysis
