#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtlab/dataset.hpp"
#include "vtlab/defenses.hpp"
#include "vtlab/detectors.hpp"
#include "vtlab/matrix.hpp"
#include "vtlab/nn.hpp"
#include "vtlab/rng.hpp"

namespace vtlab::vfl {

enum class Aggregation { sum, concat };

// Split network: one bottom model per party plus the active party's top
// model over the aggregated embedding.
struct VflModel {
  std::vector<nn::Mlp> bottoms;  // indexed by party id
  nn::Mlp top;
  Aggregation aggregation = Aggregation::sum;

  std::size_t num_parties() const { return bottoms.size(); }
  std::size_t embedding_dim(std::size_t party) const {
    return bottoms[party].output_dim();
  }
  void validate() const;
};

// A class index in [0, C) or the distinguished rejection label.
struct PredictionLabel {
  static PredictionLabel rejected() { return PredictionLabel{true, -1}; }
  static PredictionLabel of(int cls) { return PredictionLabel{false, cls}; }

  bool is_rej = false;
  int class_index = -1;

  bool operator==(const PredictionLabel&) const = default;
};

std::vector<double> aggregate(const std::vector<std::vector<double>>& parts,
                              Aggregation mode);

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::vector<std::size_t> bottom_hidden = {32, 16};
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> top_hidden = {16};
  Aggregation aggregation = Aggregation::sum;
};

struct TrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

// Standard split-network training: parties forward embeddings, the active
// party backpropagates the per-party embedding gradients.
VflModel train_vfl(const std::vector<data::PartyView>& views,
                   std::span<const int> labels, int num_classes,
                   const TrainConfig& cfg, TrainStats* stats = nullptr);

// Per-party embeddings of every row in each view.
std::vector<Matrix> party_embeddings(const VflModel& model,
                                     const std::vector<data::PartyView>& views);

enum class MonitorMode { monitored_party, aggregated };

// The defender half of the inference path: aggregation, top-model argmax
// (ties toward the lowest class), detection, optional embedding defense.
// Shared by the in-process channel and the TCP server so both transports
// run bit-identical logic.
class ActivePartyCore {
 public:
  ActivePartyCore(const VflModel* model,
                  const detect::LabelAwareDetector* detector,
                  int monitored_party,
                  MonitorMode mode = MonitorMode::monitored_party);

  void set_defense(const defense::DefenseSpec* spec, std::uint64_t rng_seed);

  // `monitored_embedding` is the embedding received from the monitored
  // (attacker-designated) party; `others` hold the remaining parties'
  // embeddings indexed by party id (the monitored slot is ignored).
  PredictionLabel decide(std::vector<std::vector<double>> embeddings_by_party);

  const VflModel& model() const { return *model_; }
  int monitored_party() const { return monitored_; }

 private:
  const VflModel* model_;
  const detect::LabelAwareDetector* detector_;
  int monitored_;
  MonitorMode mode_;
  const defense::DefenseSpec* defense_ = nullptr;
  Rng defense_rng_{0};
};

// Full-knowledge convenience path used by tests and the in-process
// harness: computes every party's embedding from raw parts, then decides.
PredictionLabel detector_enhanced_infer(
    const VflModel& model, const detect::LabelAwareDetector& detector,
    int monitored_party, const std::vector<std::vector<double>>& raw_parts,
    MonitorMode mode = MonitorMode::monitored_party);

}  // namespace vtlab::vfl
