#pragma once

#include <span>
#include <vector>

#include "vtlab/vfl.hpp"

namespace vtlab::harness {

// Fraction of predictions exactly equal to the targeted label; REJ never
// matches.
double compute_asr(std::span<const vfl::PredictionLabel> predictions,
                   int targeted_label);

// F1 on the anomaly class. Degenerate zero-positive cases are 0.
double detector_f1(std::span<const bool> flagged, std::span<const bool> truth);

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace vtlab::harness
