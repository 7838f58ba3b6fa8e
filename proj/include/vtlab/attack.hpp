#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "vtlab/config.hpp"
#include "vtlab/dataset.hpp"
#include "vtlab/detectors.hpp"
#include "vtlab/matrix.hpp"
#include "vtlab/nn.hpp"
#include "vtlab/selection.hpp"
#include "vtlab/transport.hpp"
#include "vtlab/vfl.hpp"

namespace vtlab::attack {

using harness::AttackSection;
using harness::Variant;

enum class Stage { preparation, attack };

struct SampleRecord {
  std::size_t index = 0;
  Stage stage = Stage::preparation;
  vfl::PredictionLabel label;
  bool modified = false;  // attack stage: submission differed from the original
};

// Accumulated selection state of the preparation loop.
struct PreparationState {
  std::vector<std::size_t> q_star;  // selection order
  std::vector<std::vector<std::size_t>> q_by_class;
  std::vector<std::pair<std::size_t, int>> d_loc;  // (index, pseudo-label)
  std::vector<double> mmd_history;                 // starts at +inf
  std::size_t rounds = 0;
};

struct AttackReport {
  std::vector<SampleRecord> records;
  std::size_t total_samples = 0;
  std::size_t q_size = 0;
  std::size_t prep_successes = 0;
  std::size_t attack_successes = 0;
  std::size_t overall_successes = 0;
  std::size_t rejected = 0;
  double s1 = 0.0;
  double s2 = 0.0;
  double overall_asr = 0.0;
  double anomaly_ratio = 0.0;

  // Recounts every aggregate from the per-sample records.
  void recompute(int targeted_label);
};

// Per-sample rows ("index stage label") plus a trailing summary record.
void write_report(std::ostream& out, const AttackReport& report);

// Everything the compromised party holds.
struct AttackerContext {
  const data::PartyView* view = nullptr;  // attacker's test-set slice
  const nn::Mlp* bottom = nullptr;        // trained bottom model
  net::InferenceService* service = nullptr;
  int num_classes = 0;
  std::vector<data::Bounds> raw_bounds;  // valid ranges of the attacker's columns
};

struct PreparationResult {
  PreparationState state;
  nn::Mlp surrogate;  // attacker bottom composed with the fine-tuned head
  detect::LabelAwareDetector estimated_detector;
  std::vector<SampleRecord> records;
  Matrix attacker_embeddings;  // [N x emb], benign embeddings of the test set
};

// Algorithm: cluster, select by expressiveness, benign inference, extend
// the pseudo-labeled set, repeat until the MMD stopping rule fires; then
// fine-tune the surrogate and fit the estimated detector on D_loc.
PreparationResult run_preparation_stage(const AttackerContext& ctx,
                                        const AttackSection& cfg,
                                        Variant variant, std::uint64_t seed);

// Surrogate = bottom composed with head, all layers trained on D_loc.
nn::Mlp fine_tune_surrogate(const nn::Mlp& bottom, const nn::Mlp& head,
                            const Matrix& inputs, std::span<const int> labels,
                            std::size_t epochs, double lr, std::uint64_t seed);

struct PgdSettings {
  int targeted_label = 0;
  double lambda = 1.0;
  double alpha = 0.1;
  double radius = 1.0;  // beta * r_max
  std::size_t max_steps = 50;
};

// r_max is the L2 norm of the per-dimension (max - min) ranges over the
// preparation set's raw attacker features (the view bounds when the
// preparation set is empty); alpha defaults to 0.05 x the mean range.
PgdSettings build_pgd_settings(const AttackerContext& ctx,
                               const std::vector<std::size_t>& q_star,
                               const AttackSection& cfg);

struct PgdOutcome {
  std::vector<double> sample;
  bool modified = false;
  std::size_t steps_accepted = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

// Projected gradient descent on J(x) = CE(softmax(surrogate(x)), t*) +
// lambda * score(bottom(x)) with projection onto the L2 ball around the
// original sample intersected with the per-dimension bounds. A step whose
// estimated-detector score exceeds the class threshold is rejected and the
// loop stops; the last accepted iterate is returned.
PgdOutcome generate_malicious(std::span<const double> original,
                              const nn::Mlp& surrogate, const nn::Mlp& bottom,
                              const detect::LabelAwareDetector& estimator,
                              std::span<const data::Bounds> bounds,
                              const PgdSettings& settings);

AttackReport run_attack_stage(const AttackerContext& ctx,
                              const PreparationResult& prep,
                              const AttackSection& cfg, Variant variant,
                              std::uint64_t seed);

// Dispatches preparation + attack per the requested Table-style variant.
AttackReport run_variant(const AttackerContext& ctx, const AttackSection& cfg,
                         Variant variant, std::uint64_t seed);

}  // namespace vtlab::attack
