#include "vtlab/clustering.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "vtlab/kernels.hpp"
#include "vtlab/rng.hpp"

namespace vtlab::cluster {

std::vector<std::vector<std::size_t>> ClusterAssignment::members(
    int num_clusters) const {
  std::vector<std::vector<std::size_t>> out(num_clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i)
    out[assignment[i]].push_back(i);
  return out;
}

namespace {

int nearest_centroid(const Matrix& centroids, std::span<const double> p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = kern::sqdist(centroids.row_span(c), p);
    if (d < best_d) {  // strict: ties stay with the lower id
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void recompute_centroids(const Matrix& points, const std::vector<int>& assign,
                         Matrix& centroids, std::vector<std::size_t>& counts) {
  std::fill(centroids.data.begin(), centroids.data.end(), 0.0);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const int c = assign[i];
    ++counts[c];
    kern::axpy(1.0, points.row_span(i), centroids.row_span(c));
  }
  for (std::size_t c = 0; c < centroids.rows; ++c)
    if (counts[c] > 0)
      for (std::size_t j = 0; j < centroids.cols; ++j)
        centroids.at(c, j) /= static_cast<double>(counts[c]);
}

// Empty-cluster repair: move the point of the largest cluster that lies
// farthest from that cluster's centroid.
bool repair_empty(const Matrix& points, std::vector<int>& assign,
                  const std::vector<bool>& pinned, Matrix& centroids,
                  std::vector<std::size_t>& counts) {
  bool repaired = false;
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    if (counts[c] > 0) continue;
    std::size_t donor = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
      if (counts[k] > counts[donor]) donor = k;
    if (counts[donor] <= 1) continue;
    std::ptrdiff_t far_idx = -1;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (assign[i] != static_cast<int>(donor) || pinned[i]) continue;
      const double d = kern::sqdist(centroids.row_span(donor),
                                    points.row_span(i));
      if (d > far_d) {
        far_d = d;
        far_idx = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (far_idx < 0) continue;
    assign[static_cast<std::size_t>(far_idx)] = static_cast<int>(c);
    --counts[donor];
    ++counts[c];
    repaired = true;
  }
  return repaired;
}

}  // namespace

ClusterAssignment constrained_seed_kmeans(
    const Matrix& points,
    const std::vector<std::pair<std::size_t, int>>& seeds, int num_clusters,
    std::size_t max_iter, std::uint64_t seed) {
  const std::size_t n = points.rows;
  if (num_clusters < 1)
    throw std::invalid_argument("kmeans: need at least one cluster");
  if (static_cast<std::size_t>(num_clusters) > n)
    throw std::invalid_argument("kmeans: more clusters than points");

  std::vector<bool> pinned(n, false);
  std::vector<int> assign(n, -1);
  for (const auto& [idx, cls] : seeds) {
    if (idx >= n) throw std::invalid_argument("kmeans: seed index out of range");
    if (cls < 0 || cls >= num_clusters)
      throw std::invalid_argument("kmeans: seed class out of range");
    pinned[idx] = true;
    assign[idx] = cls;
  }

  // Initial centroids: per-class seed means, random points for seedless
  // clusters.
  Matrix centroids(num_clusters, points.cols);
  std::vector<std::size_t> counts(num_clusters, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!pinned[i]) continue;
    ++counts[assign[i]];
    kern::axpy(1.0, points.row_span(i), centroids.row_span(assign[i]));
  }
  Rng rng(seed);
  for (int c = 0; c < num_clusters; ++c) {
    if (counts[c] > 0) {
      for (std::size_t j = 0; j < centroids.cols; ++j)
        centroids.at(c, j) /= static_cast<double>(counts[c]);
    } else {
      const std::size_t pick = static_cast<std::size_t>(rng.below(n));
      std::copy(points.row(pick), points.row(pick) + points.cols,
                centroids.row(c));
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    if (!pinned[i]) assign[i] = nearest_centroid(centroids, points.row_span(i));

  ClusterAssignment result;
  result.iterations = 0;
  std::vector<int> prev = assign;
  for (std::size_t it = 0; it < max_iter; ++it) {
    recompute_centroids(points, assign, centroids, counts);
    while (repair_empty(points, assign, pinned, centroids, counts))
      recompute_centroids(points, assign, centroids, counts);
    for (std::size_t i = 0; i < n; ++i)
      if (!pinned[i])
        assign[i] = nearest_centroid(centroids, points.row_span(i));
    ++result.iterations;
    if (assign == prev) break;
    prev = assign;
  }

  recompute_centroids(points, assign, centroids, counts);
  result.assignment = std::move(assign);
  result.centroids = std::move(centroids);
  return result;
}

double within_cluster_ss(const Matrix& points, const ClusterAssignment& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i)
    total += kern::sqdist(points.row_span(i),
                          a.centroids.row_span(a.assignment[i]));
  return total;
}

}  // namespace vtlab::cluster
