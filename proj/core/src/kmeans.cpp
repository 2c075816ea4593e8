#include "varcal/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varcal/errors.hpp"
#include "varcal/rng.hpp"

namespace varcal {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

struct RunResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
  double sse = std::numeric_limits<double>::infinity();
  std::vector<double> sse_history;
  int reseeded = 0;
};

// k-means++: first centroid uniform, the rest D²-sampled.
std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.bounded(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen;
    if (total <= 0.0) {
      // All remaining mass at distance zero: fall back to a uniform pick.
      chosen = rng.bounded(n);
    } else {
      const double target = rng.next_double() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    centroids.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], centroids.back()));
    }
  }
  return centroids;
}

RunResult run_lloyd(const std::vector<std::vector<double>>& points, int k,
                    int max_iter, Rng& rng) {
  const std::size_t n = points.size();
  const std::size_t dim = points[0].size();
  RunResult run;
  run.centroids = seed_centroids(points, k, rng);
  run.assignment.assign(n, -1);

  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step (ties go to the lowest centroid index).
    bool changed = false;
    double sse = 0.0;
    std::vector<long> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], run.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], run.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.assignment[i] != best) {
        run.assignment[i] = best;
        changed = true;
      }
      ++counts[best];
      sse += best_d;
    }
    run.sse_history.push_back(sse);
    run.sse = sse;
    if (!changed && iter > 0) break;

    // Update step; an empty cluster is re-seeded at the point farthest
    // from its assigned centroid.
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = points[i];
      auto& c = next[run.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += p[d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          next[c][d] /= static_cast<double>(counts[c]);
        }
      } else {
        std::size_t farthest = 0;
        double farthest_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d =
              sq_dist(points[i], run.centroids[run.assignment[i]]);
          if (d > farthest_d) {
            farthest_d = d;
            farthest = i;
          }
        }
        next[c] = points[farthest];
        ++run.reseeded;
      }
    }
    run.centroids = std::move(next);
  }
  return run;
}

}  // namespace

Clustering kmeans(const std::vector<std::vector<double>>& points, int k,
                  const KmeansOptions& options) {
  if (points.empty()) throw InputError("kmeans: no points");
  if (k < 1) throw InputError("kmeans: k must be at least 1");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw InputError("kmeans: k=" + std::to_string(k) + " exceeds " +
                     std::to_string(points.size()) + " points");
  }
  const std::size_t dim = points[0].size();
  if (dim == 0) throw InputError("kmeans: zero-dimensional points");
  for (const auto& p : points) {
    if (p.size() != dim) throw InputError("kmeans: ragged points");
  }
  if (options.n_init < 1 || options.max_iter < 1) {
    throw InputError("kmeans: n_init and max_iter must be positive");
  }

  RunResult best;
  for (int r = 0; r < options.n_init; ++r) {
    Rng rng(derive_seed(options.seed, "kmeans",
                        static_cast<std::uint64_t>(r)));
    RunResult run = run_lloyd(points, k, options.max_iter, rng);
    if (run.sse < best.sse) best = std::move(run);
  }

  Clustering result;
  result.k = k;
  result.centroids = std::move(best.centroids);
  result.assignment = std::move(best.assignment);
  result.sse = best.sse;
  result.sse_history = std::move(best.sse_history);
  result.reseeded_empty_clusters = best.reseeded;
  return result;
}

std::vector<int> select_k_grid(std::size_t k_max) {
  std::vector<int> grid;
  // Python range(2, k_max, k_max // 3); the guard keeps the step positive
  // where the quotient would be 0 (only reachable when the range is empty
  // anyway).
  const std::size_t step = std::max<std::size_t>(1, k_max / 3);
  for (std::size_t k = 2; k < k_max; k += step) {
    grid.push_back(static_cast<int>(k));
  }
  return grid;
}

int select_k(const std::vector<std::vector<double>>& points,
             const KmeansOptions& options) {
  const auto grid = select_k_grid(points.size());
  if (grid.size() < 2) return 2;
  std::vector<double> sses;
  sses.reserve(grid.size());
  for (int k : grid) {
    sses.push_back(kmeans(points, k, options).sse);
  }
  // Knee: maximum perpendicular distance from the chord through the first
  // and last (k, sse) grid points; ties toward smaller k.
  const double x1 = grid.front(), y1 = sses.front();
  const double x2 = grid.back(), y2 = sses.back();
  const double dx = x2 - x1, dy = y2 - y1;
  const double norm = std::sqrt(dx * dx + dy * dy);
  int best_k = grid.front();
  double best_dist = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dist =
        norm > 0.0
            ? std::abs(dy * (grid[i] - x1) - dx * (sses[i] - y1)) / norm
            : 0.0;
    if (dist > best_dist) {
      best_dist = dist;
      best_k = grid[i];
    }
  }
  return best_k;
}

}  // namespace varcal
