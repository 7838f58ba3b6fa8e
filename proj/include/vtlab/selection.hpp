#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vtlab/matrix.hpp"

namespace vtlab::select {

// RBF kernel k(x,y) = exp(-|x-y|^2 / (2 sigma^2)), so k(x,x) = 1.
struct RbfKernel {
  double sigma = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const;
};

// Median pairwise distance of the rows (fallback 1.0 when degenerate).
double median_heuristic_sigma(const Matrix& points);

// Direct evaluation of the biased two-sample MMD^2 estimate.
double mmd2(const Matrix& x, const Matrix& y, const RbfKernel& kernel);

// Greedy-selection state over a fixed reference set D. Keeps kernel
// row-sums per candidate so that adding a point and evaluating candidate
// deltas are O(1) after an O(N) refresh per accepted point.
class MmdState {
 public:
  MmdState(const Matrix& reference, RbfKernel kernel);

  // MMD^2(D, Q) - MMD^2(D, Q + {u}). For empty Q this is -MMD^2(D, {u})
  // so the argmax is still the point whose singleton set best matches D.
  double expressiveness_delta(std::size_t candidate) const;

  void add(std::size_t candidate);

  bool selected(std::size_t candidate) const { return in_q_[candidate]; }
  std::size_t selected_count() const { return q_size_; }
  // MMD^2(D, Q); infinity while Q is empty.
  double current_mmd2() const;

  const Matrix& reference() const { return ref_; }
  const RbfKernel& kernel() const { return kernel_; }

  // Recomputes every cache from scratch and compares (debug audit).
  double max_cache_drift() const;

 private:
  double mmd2_with(double qq_sum, double dq_sum, std::size_t q) const;

  Matrix ref_;
  RbfKernel kernel_;
  std::vector<bool> in_q_;
  std::size_t q_size_ = 0;
  double dd_sum_ = 0.0;            // sum_{x,x' in D} k(x,x')
  double qq_sum_ = 0.0;            // sum_{y,y' in Q} k(y,y')
  double dq_selected_sum_ = 0.0;   // sum_{y in Q} row_d_sum_[y]
  std::vector<double> row_d_sum_;  // per candidate: sum_{x in D} k(x_u, x)
  std::vector<double> row_q_sum_;  // per candidate: sum_{y in Q} k(x_u, y)
};

// One selection round of the preparation loop: per cluster, pick the top
// eta not-yet-selected members by expressiveness. Sequential greedy by
// default (state updates after each pick); batch mode ranks once.
struct RoundResult {
  std::vector<std::size_t> picked;                  // Z for this round
  std::vector<std::vector<std::size_t>> per_class;  // additions per cluster
};

RoundResult select_round(
    const std::vector<std::vector<std::size_t>>& clusters, MmdState& state,
    std::size_t eta, bool sequential = true);

enum class StopDecision { go_on, stop };

// Stop when |mmd_t - mmd_{t-1}| <= tolerance or the round exceeds max_rounds.
StopDecision stopping_check(std::span<const double> mmd_history,
                            double tolerance, std::size_t round,
                            std::size_t max_rounds);

}  // namespace vtlab::select
