#include "mtae/clustering.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "mtae/rng.hpp"

namespace mtae {

namespace {

double dist2(const VAPoint& a, const VAPoint& b) {
  double dv = a[0] - b[0], da = a[1] - b[1];
  return dv * dv + da * da;
}

std::vector<VAPoint> seed_kmeanspp(const std::vector<VAPoint>& points, int k,
                                   Rng& rng) {
  std::vector<VAPoint> centroids;
  centroids.push_back(points[rng.uniform_index(points.size())]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0;
    for (size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, dist2(points[i], c));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total > 0) {
      double r = rng.uniform(0.0, total);
      double acc = 0;
      for (size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = rng.uniform_index(points.size());
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

struct LloydResult {
  std::vector<VAPoint> centroids;
  double inertia = 0.0;
};

LloydResult lloyd(const std::vector<VAPoint>& points,
                  std::vector<VAPoint> centroids, int max_iterations) {
  int k = static_cast<int>(centroids.size());
  std::vector<int> assign(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = dist2(points[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d = dist2(points[i], centroids[static_cast<size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<VAPoint> sums(static_cast<size_t>(k), {0, 0});
    std::vector<i64> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < points.size(); ++i) {
      sums[static_cast<size_t>(assign[i])][0] += points[i][0];
      sums[static_cast<size_t>(assign[i])][1] += points[i][1];
      ++counts[static_cast<size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) {
        // Reseed to the point farthest from its own centroid.
        size_t far = 0;
        double far_d = -1;
        for (size_t i = 0; i < points.size(); ++i) {
          double d = dist2(points[i], centroids[static_cast<size_t>(assign[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids[static_cast<size_t>(c)] = points[far];
      } else {
        centroids[static_cast<size_t>(c)] = {
            sums[static_cast<size_t>(c)][0] / counts[static_cast<size_t>(c)],
            sums[static_cast<size_t>(c)][1] / counts[static_cast<size_t>(c)]};
      }
    }
  }
  LloydResult out;
  out.centroids = std::move(centroids);
  out.inertia = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : out.centroids) best = std::min(best, dist2(points[i], c));
    out.inertia += best;
  }
  return out;
}

}  // namespace

VAClusterModel fit_va_clusters(const std::vector<VAPoint>& points, int k,
                               u64 seed, int restarts, int max_iterations) {
  if (k < 1) throw Error("kmeans: k must be >= 1");
  std::set<VAPoint> distinct(points.begin(), points.end());
  if (static_cast<int>(distinct.size()) < k)
    throw Error("kmeans: only " + std::to_string(distinct.size()) +
                " distinct points for k=" + std::to_string(k));

  VAClusterModel best;
  best.k = k;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<u64>(r)));
    LloydResult res =
        lloyd(points, seed_kmeanspp(points, k, rng), max_iterations);
    if (res.inertia < best.inertia) {
      best.inertia = res.inertia;
      best.centroids = std::move(res.centroids);
    }
  }
  return best;
}

VAClusterModel fit_va_clusters(const std::vector<UtteranceRecord>& records,
                               int k, u64 seed) {
  std::vector<VAPoint> points;
  for (const auto& r : records)
    if (r.valence && r.activation) points.push_back({*r.valence, *r.activation});
  if (static_cast<int>(points.size()) < k)
    throw Error("kmeans: fewer annotated records than clusters");
  return fit_va_clusters(points, k, seed);
}

int assign_cluster(const VAPoint& point, const VAClusterModel& model) {
  if (model.centroids.empty()) throw Error("kmeans: empty model");
  int best = 0;
  double best_d = dist2(point, model.centroids[0]);
  for (size_t c = 1; c < model.centroids.size(); ++c) {
    double d = dist2(point, model.centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::string va_clusters_to_json(const VAClusterModel& model) {
  nlohmann::ordered_json j;
  j["k"] = model.k;
  j["inertia"] = model.inertia;
  j["centroids"] = model.centroids;
  return j.dump();
}

VAClusterModel va_clusters_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  VAClusterModel m;
  m.k = j.at("k").get<int>();
  m.inertia = j.at("inertia").get<double>();
  m.centroids = j.at("centroids").get<std::vector<VAPoint>>();
  if (static_cast<int>(m.centroids.size()) != m.k)
    throw Error("kmeans: centroid count does not match k");
  return m;
}

}  // namespace mtae
