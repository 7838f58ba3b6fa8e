#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vtlab/dataset.hpp"
#include "vtlab/defenses.hpp"
#include "vtlab/detectors.hpp"
#include "vtlab/vfl.hpp"

namespace vtlab::harness {

enum class Variant {
  vtarbel,
  only_preparation,
  only_attack,
  random_prep_with_clustering,
  random_prep_without_clustering,
  random_attack,
};

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

enum class TransportKind { inproc, tcp };

struct DatasetConfig {
  enum class Kind { synthetic, tabular } kind = Kind::synthetic;

  // synthetic
  int classes = 4;
  std::size_t dim = 20;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 500;
  double stdev = 1.0;
  double grid_spacing = 10.0;
  std::vector<std::vector<double>> centers;  // optional explicit centers

  // tabular
  std::string path;
  char delimiter = ',';
  std::size_t label_column = 0;
  bool has_header = false;
  double train_fraction = 0.5;
};

struct ModelConfig {
  std::vector<std::size_t> bottom_hidden = {32, 16};
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> top_hidden = {16};
  vfl::Aggregation aggregation = vfl::Aggregation::sum;
};

struct TrainSection {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t batch_size = 32;
};

struct DetectorConfig {
  detect::DetectorKind kind = detect::DetectorKind::deepae;
  double percentile = 95.0;
  bool global_tau = false;
  double kde_bandwidth = 0.0;  // 0 = median heuristic
  std::size_t ae_hidden = 16;
  std::size_t ae_bottleneck = 4;
  std::size_t ae_epochs = 200;
  std::size_t ae_batch = 32;
  double ae_lr = 0.01;
  vfl::MonitorMode monitor = vfl::MonitorMode::monitored_party;
};

struct AttackSection {
  int party = 0;  // compromised passive party
  int targeted_label = 0;
  double lambda = 0.0;  // 0 = auto: 1 for deepae, 20 for kde
  std::size_t t_opt = 50;
  double alpha = 0.0;  // 0 = 0.05 x mean per-dimension raw range
  double beta = 1.0;
  std::size_t eta = 10;
  double epsilon = 1e-4;
  std::size_t max_rounds = 10;
  std::size_t t_ft = 50;
  double ft_lr = 0.05;
  detect::DetectorKind est_kind = detect::DetectorKind::kde;
  double est_percentile = 95.0;
  std::size_t est_ae_hidden = 16;
  std::size_t est_ae_bottleneck = 4;
  std::size_t est_ae_epochs = 100;
  double est_ae_lr = 0.01;
  bool cluster_on_embeddings = true;
  std::size_t cluster_max_iter = 50;
  bool sequential_selection = true;
  std::size_t random_prep_size = 0;  // 0 = same stopping rule as vtarbel
};

struct DefenseSection {
  defense::Kind kind = defense::Kind::none;
  double sigma = 0.0;
  std::size_t bins = 1;
  double preserved_ratio = 1.0;
  bool per_dimension_calibration = true;
};

struct TransportSection {
  TransportKind kind = TransportKind::inproc;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 = ephemeral
};

struct OutputSection {
  std::string path = "results.tsv";
  std::string report_dir;  // empty = per-sample reports not written
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<double> split_fractions = {0.5, 0.5};
  data::SplitMode split_mode = data::SplitMode::contiguous;
  ModelConfig model;
  TrainSection train;
  DetectorConfig detector;
  AttackSection attack;
  DefenseSection defense;
  TransportSection transport;
  OutputSection output;
  Variant variant = Variant::vtarbel;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  void validate() const;
  // FNV-1a over the semantic fields. Transport and output are excluded so
  // results files are comparable across transports.
  std::string digest() const;
};

// Flat line-oriented key=value format with section prefixes
// (e.g. attack.lambda=1). '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace vtlab::harness
