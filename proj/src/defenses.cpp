#include "vtlab/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vtlab::defense {

std::vector<double> apply_noisy(std::vector<double> e, double sigma,
                                Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("apply_noisy: sigma < 0");
  if (sigma == 0.0) return e;
  for (double& v : e) v += rng.normal(0.0, sigma);
  return e;
}

std::vector<double> apply_discrete(
    std::vector<double> e, std::size_t bins,
    const std::vector<data::Bounds>& calibration) {
  if (bins == 0) throw std::invalid_argument("apply_discrete: bins == 0");
  if (calibration.size() != e.size())
    throw std::invalid_argument("apply_discrete: calibration dim mismatch");
  for (std::size_t j = 0; j < e.size(); ++j) {
    const double lo = calibration[j].lo, hi = calibration[j].hi;
    if (lo > hi) throw std::invalid_argument("apply_discrete: min > max");
    if (lo == hi) {
      e[j] = lo;
      continue;
    }
    const double v = std::clamp(e[j], lo, hi);
    const double width = (hi - lo) / static_cast<double>(bins);
    std::size_t bin = static_cast<std::size_t>((v - lo) / width);
    bin = std::min(bin, bins - 1);
    const double left = lo + static_cast<double>(bin) * width;
    const double right = lo + static_cast<double>(bin + 1) * width;
    // ties snap to the lower endpoint
    e[j] = (v - left <= right - v) ? left : right;
  }
  return e;
}

std::vector<double> apply_compressed(std::vector<double> e,
                                     double preserved_ratio) {
  if (preserved_ratio <= 0.0 || preserved_ratio > 1.0)
    throw std::invalid_argument("apply_compressed: ratio must be in (0, 1]");
  if (e.empty()) return e;
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(preserved_ratio * static_cast<double>(e.size())));
  if (keep >= e.size()) return e;
  std::vector<std::size_t> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return std::abs(e[a]) > std::abs(e[b]);
                   });
  std::vector<bool> kept(e.size(), false);
  for (std::size_t i = 0; i < keep; ++i) kept[order[i]] = true;
  for (std::size_t j = 0; j < e.size(); ++j)
    if (!kept[j]) e[j] = 0.0;
  return e;
}

std::vector<double> apply(const DefenseSpec& spec, std::vector<double> e,
                          Rng& rng) {
  switch (spec.kind) {
    case Kind::none:
      return e;
    case Kind::noisy:
      return apply_noisy(std::move(e), spec.sigma, rng);
    case Kind::discrete:
      return apply_discrete(std::move(e), spec.bins, spec.calibration);
    case Kind::compressed:
      return apply_compressed(std::move(e), spec.preserved_ratio);
  }
  return e;
}

}  // namespace vtlab::defense
