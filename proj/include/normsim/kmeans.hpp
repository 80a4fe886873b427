#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "normsim/random.hpp"

namespace normsim::analysis {

struct KMeansResult {
  std::vector<double> centroids;  // ascending
  std::vector<std::size_t> labels;
  double wcss = 0.0;
  int iterations = 0;
};

/// Best-of-`restarts` Lloyd's algorithm on scalar data with k-means++ seeding.
KMeansResult kmeans_1d(std::span<const double> points, std::size_t k, int restarts, Rng& rng,
                       int max_iter = 100);

/// Within-cluster sum of squares for fixed centroids (nearest-centroid labels).
double wcss_1d(std::span<const double> points, std::span<const double> centroids);

}  // namespace normsim::analysis
