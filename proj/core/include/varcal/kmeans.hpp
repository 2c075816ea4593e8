#pragma once

#include <cstdint>
#include <vector>

namespace varcal {

struct KmeansOptions {
  int n_init = 20;    // restarts; best SSE wins
  int max_iter = 400; // Lloyd iterations per restart
  std::uint64_t seed = 0;
};

struct Clustering {
  int k = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;  // per input point, in input order
  double sse = 0.0;
  std::vector<double> sse_history;  // winning restart, one entry per
                                    // assignment step (non-increasing)
  int reseeded_empty_clusters = 0;  // empty-cluster repair events
};

/// Lloyd's algorithm with k-means++ seeding, best of n_init restarts by
/// SSE. Restart r uses the seed derived from (options.seed, r), so results
/// are identical across runs and across restart execution order. Empty
/// clusters are re-seeded at the point farthest from its assigned centroid.
/// Throws InputError when k < 1, k > #points, or points are ragged/empty.
Clustering kmeans(const std::vector<std::vector<double>>& points, int k,
                  const KmeansOptions& options = {});

/// The appendix's candidate grid: k in range(2, k_max, k_max//3) with
/// Python range semantics. Exposed for tests.
std::vector<int> select_k_grid(std::size_t k_max);

/// Chooses k on the SSE curve over select_k_grid(#points): the knee is the
/// grid point with maximum perpendicular distance from the chord between
/// the first and last grid points; ties break toward smaller k. Fewer than
/// two grid points → 2.
int select_k(const std::vector<std::vector<double>>& points,
             const KmeansOptions& options = {});

}  // namespace varcal
