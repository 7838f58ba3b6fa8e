#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vtlab/matrix.hpp"

namespace vtlab::cluster {

struct ClusterAssignment {
  std::vector<int> assignment;  // sample index -> cluster id in [0, C)
  Matrix centroids;             // [C x d]
  std::size_t iterations = 0;

  std::vector<std::vector<std::size_t>> members(int num_clusters) const;
};

// Lloyd iterations where seeded points are pinned to their seed cluster.
// Seedless clusters start from random points; unseeded points go to the
// nearest centroid (L2, ties toward the lower cluster id). Deterministic
// under `seed`.
ClusterAssignment constrained_seed_kmeans(
    const Matrix& points,
    const std::vector<std::pair<std::size_t, int>>& seeds, int num_clusters,
    std::size_t max_iter, std::uint64_t seed);

double within_cluster_ss(const Matrix& points, const ClusterAssignment& a);

}  // namespace vtlab::cluster
