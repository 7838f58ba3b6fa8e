#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vtlab/attack.hpp"
#include "vtlab/config.hpp"
#include "vtlab/metrics.hpp"

namespace vtlab::harness {

struct SeedOutcome {
  std::uint64_t seed = 0;
  attack::AttackReport report;
  double main_accuracy = 0.0;
  double detector_f1 = 0.0;
  vfl::TrainStats train_stats;
};

struct Aggregates {
  MeanStd overall_asr;
  MeanStd s1;
  MeanStd s2;
  MeanStd accuracy;
  MeanStd anomaly_ratio;
  MeanStd f1;
};

struct ResultsRecord {
  std::string config_digest;
  Variant variant = Variant::vtarbel;
  std::vector<SeedOutcome> per_seed;
  Aggregates aggregates;

  void recompute_aggregates();
};

// One full pipeline run for a single seed: data, split, VFL training,
// defender detector, variant execution, metrics.
SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

ResultsRecord run_experiment(const ExperimentConfig& cfg);

// Results file: header row, one summary row per seed, AGGREGATE mean and
// stdev rows. Tab-separated, fixed float formatting, no timestamps, so
// identical runs produce identical bytes.
void write_results(std::ostream& out, const ResultsRecord& record);
std::string results_to_string(const ResultsRecord& record);

// Pretty-print a results file (the `inspect` subcommand).
std::string inspect_results(const std::string& path);

}  // namespace vtlab::harness
