#pragma once

#include <array>
#include <string>
#include <vector>

#include "mtae/common.hpp"
#include "mtae/manifest.hpp"

namespace mtae {

using VAPoint = std::array<double, 2>;  // (valence, activation)

struct VAClusterModel {
  int k = 0;
  std::vector<VAPoint> centroids;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, 10 restarts, and a 300-iteration
// cap per restart; convergence when assignments stop changing. An emptied
// cluster is reseeded to the point farthest from its centroid. Deterministic
// under the seed.
VAClusterModel fit_va_clusters(const std::vector<VAPoint>& points, int k,
                               u64 seed, int restarts = 10,
                               int max_iterations = 300);

VAClusterModel fit_va_clusters(const std::vector<UtteranceRecord>& records,
                               int k, u64 seed);

// Nearest centroid by Euclidean distance; ties go to the lowest index.
int assign_cluster(const VAPoint& point, const VAClusterModel& model);

std::string va_clusters_to_json(const VAClusterModel& model);
VAClusterModel va_clusters_from_json(const std::string& text);

}  // namespace mtae
