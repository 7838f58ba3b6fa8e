#include "vtlab/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace vtlab::harness {

double compute_asr(std::span<const vfl::PredictionLabel> predictions,
                   int targeted_label) {
  if (predictions.empty())
    throw std::invalid_argument("compute_asr: empty prediction list");
  std::size_t hits = 0;
  for (const auto& p : predictions)
    if (!p.is_rej && p.class_index == targeted_label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double detector_f1(std::span<const bool> flagged,
                   std::span<const bool> truth) {
  if (flagged.size() != truth.size())
    throw std::invalid_argument("detector_f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (flagged[i] && truth[i]) ++tp;
    if (flagged[i] && !truth[i]) ++fp;
    if (!flagged[i] && truth[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace vtlab::harness
