#include "vtlab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vtlab/detectors.hpp"
#include "vtlab/kernels.hpp"

namespace vtlab::select {

double RbfKernel::operator()(std::span<const double> a,
                             std::span<const double> b) const {
  return std::exp(-kern::sqdist(a, b) / (2.0 * sigma * sigma));
}

double median_heuristic_sigma(const Matrix& points) {
  return detect::median_heuristic_bandwidth(points);
}

double mmd2(const Matrix& x, const Matrix& y, const RbfKernel& kernel) {
  const std::size_t m = x.rows, n = y.rows;
  if (m == 0 || n == 0) throw std::invalid_argument("mmd2: empty set");
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      xx += kernel(x.row_span(i), x.row_span(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      yy += kernel(y.row_span(i), y.row_span(j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      xy += kernel(x.row_span(i), y.row_span(j));
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return xx / (dm * dm) + yy / (dn * dn) - 2.0 * xy / (dm * dn);
}

MmdState::MmdState(const Matrix& reference, RbfKernel kernel)
    : ref_(reference), kernel_(kernel) {
  const std::size_t n = ref_.rows;
  if (n == 0) throw std::invalid_argument("MmdState: empty reference set");
  in_q_.assign(n, false);
  row_d_sum_.assign(n, 0.0);
  row_q_sum_.assign(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += kernel_(ref_.row_span(u), ref_.row_span(i));
    row_d_sum_[u] = s;
    dd_sum_ += s;
  }
}

double MmdState::mmd2_with(double qq_sum, double dq_sum, std::size_t q) const {
  const double n = static_cast<double>(ref_.rows);
  const double dq = static_cast<double>(q);
  return dd_sum_ / (n * n) + qq_sum / (dq * dq) - 2.0 * dq_sum / (n * dq);
}

double MmdState::current_mmd2() const {
  if (q_size_ == 0) return std::numeric_limits<double>::infinity();
  return mmd2_with(qq_sum_, dq_selected_sum_, q_size_);
}

double MmdState::expressiveness_delta(std::size_t candidate) const {
  if (candidate >= ref_.rows)
    throw std::invalid_argument("expressiveness_delta: index out of range");
  if (in_q_[candidate])
    throw std::invalid_argument("expressiveness_delta: candidate already selected");
  // k(u,u) = 1 for the RBF kernel.
  const double qq_next = qq_sum_ + 2.0 * row_q_sum_[candidate] + 1.0;
  const double dq_next = dq_selected_sum_ + row_d_sum_[candidate];
  const double next = mmd2_with(qq_next, dq_next, q_size_ + 1);
  if (q_size_ == 0) return -next;
  return current_mmd2() - next;
}

void MmdState::add(std::size_t candidate) {
  if (candidate >= ref_.rows)
    throw std::invalid_argument("MmdState::add: index out of range");
  if (in_q_[candidate])
    throw std::invalid_argument("MmdState::add: already selected");
  qq_sum_ += 2.0 * row_q_sum_[candidate] + 1.0;
  dq_selected_sum_ += row_d_sum_[candidate];
  in_q_[candidate] = true;
  ++q_size_;
  for (std::size_t u = 0; u < ref_.rows; ++u)
    row_q_sum_[u] += kernel_(ref_.row_span(u), ref_.row_span(candidate));
}

double MmdState::max_cache_drift() const {
  double worst = 0.0;
  double qq = 0.0, dq = 0.0;
  for (std::size_t a = 0; a < ref_.rows; ++a) {
    if (!in_q_[a]) continue;
    dq += row_d_sum_[a];
    for (std::size_t b = 0; b < ref_.rows; ++b)
      if (in_q_[b]) qq += kernel_(ref_.row_span(a), ref_.row_span(b));
  }
  worst = std::max(worst, std::abs(qq - qq_sum_));
  worst = std::max(worst, std::abs(dq - dq_selected_sum_));
  for (std::size_t u = 0; u < ref_.rows; ++u) {
    double rq = 0.0;
    for (std::size_t b = 0; b < ref_.rows; ++b)
      if (in_q_[b]) rq += kernel_(ref_.row_span(u), ref_.row_span(b));
    worst = std::max(worst, std::abs(rq - row_q_sum_[u]));
  }
  return worst;
}

RoundResult select_round(
    const std::vector<std::vector<std::size_t>>& clusters, MmdState& state,
    std::size_t eta, bool sequential) {
  if (eta == 0) throw std::invalid_argument("select_round: eta must be >= 1");
  RoundResult result;
  result.per_class.resize(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<std::size_t> candidates;
    for (std::size_t idx : clusters[c])
      if (!state.selected(idx)) candidates.push_back(idx);
    if (candidates.empty()) continue;
    if (sequential) {
      const std::size_t take = std::min(eta, candidates.size());
      for (std::size_t pick = 0; pick < take; ++pick) {
        std::size_t best = candidates.size();
        double best_delta = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          if (state.selected(candidates[i])) continue;
          const double d = state.expressiveness_delta(candidates[i]);
          if (d > best_delta) {
            best_delta = d;
            best = i;
          }
        }
        if (best == candidates.size()) break;
        state.add(candidates[best]);
        result.picked.push_back(candidates[best]);
        result.per_class[c].push_back(candidates[best]);
      }
    } else {
      // Batch mode: rank once with the round-start state.
      std::vector<std::pair<double, std::size_t>> ranked;
      ranked.reserve(candidates.size());
      for (std::size_t idx : candidates)
        ranked.emplace_back(state.expressiveness_delta(idx), idx);
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const std::size_t take = std::min(eta, ranked.size());
      for (std::size_t i = 0; i < take; ++i) {
        state.add(ranked[i].second);
        result.picked.push_back(ranked[i].second);
        result.per_class[c].push_back(ranked[i].second);
      }
    }
  }
  return result;
}

StopDecision stopping_check(std::span<const double> mmd_history,
                            double tolerance, std::size_t round,
                            std::size_t max_rounds) {
  if (round > max_rounds) return StopDecision::stop;
  if (mmd_history.size() >= 2) {
    const double prev = mmd_history[mmd_history.size() - 2];
    const double cur = mmd_history.back();
    if (std::isfinite(prev) && std::isfinite(cur) &&
        std::abs(cur - prev) <= tolerance)
      return StopDecision::stop;
  }
  return StopDecision::go_on;
}

}  // namespace vtlab::select
