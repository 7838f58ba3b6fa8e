#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtlab/matrix.hpp"
#include "vtlab/nn.hpp"

namespace vtlab::detect {

// Kernel density scorer over a fixed observation set. The anomaly score is
// the negated density so that "score above threshold" flags anomalies for
// both detector kinds.
struct KdeDetector {
  Matrix observations;  // [n x d]
  double bandwidth = 1.0;

  double density(std::span<const double> x) const;
  double score(std::span<const double> x) const;
  // d(score)/dx, used by the gradient-based attack.
  std::vector<double> score_grad(std::span<const double> x) const;
};

// Median pairwise distance of the rows; falls back to 1.0 when degenerate.
double median_heuristic_bandwidth(const Matrix& points);

KdeDetector fit_kde(const Matrix& observations,
                    std::optional<double> bandwidth = std::nullopt);

struct DeepAeConfig {
  std::size_t hidden = 16;
  std::size_t bottleneck = 4;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 0.01;
  std::uint64_t seed = 1;
};

struct DeepAeDetector {
  nn::Mlp encoder;
  nn::Mlp decoder;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;

  std::vector<double> reconstruct(std::span<const double> x) const;
  // Squared L2 reconstruction error.
  double score(std::span<const double> x) const;
  std::vector<double> score_grad(std::span<const double> x) const;
};

DeepAeDetector fit_deepae(const Matrix& observations, const DeepAeConfig& cfg);

enum class DetectorKind { kde, deepae };

enum class Verdict { normal, anomalous };

// One sub-detector per class plus calibrated per-class thresholds.
// An empty class has no sub-detector; scoring against it returns +inf.
class LabelAwareDetector {
 public:
  struct FitConfig {
    DetectorKind kind = DetectorKind::kde;
    std::optional<double> kde_bandwidth;  // default: median heuristic
    DeepAeConfig ae;
  };

  static LabelAwareDetector fit(const Matrix& embeddings,
                                std::span<const int> labels, int num_classes,
                                const FitConfig& cfg);

  // Untrained detector (randomly initialized DeepAE, thresholds +inf);
  // used by the only_attack variant.
  static LabelAwareDetector untrained(std::size_t dim, const DeepAeConfig& ae);

  double score(std::span<const double> x, int label) const;
  std::vector<double> score_grad(std::span<const double> x, int label) const;

  // p-th percentile (linear interpolation) of per-class calibration scores.
  // With global_tau, one threshold over all classes' scores is used.
  void calibrate(const Matrix& embeddings, std::span<const int> labels,
                 double percentile, bool global_tau = false);
  void set_thresholds(std::vector<double> taus);
  void set_uniform_threshold(double tau);

  bool calibrated() const { return calibrated_; }
  double threshold(int label) const;

  // Anomalous iff score strictly exceeds the class threshold.
  Verdict detect(std::span<const double> x, int label) const;

  int num_classes() const { return num_classes_; }
  DetectorKind kind() const { return kind_; }
  bool has_subdetector(int label) const;
  std::size_t observations_of(int label) const;

 private:
  DetectorKind kind_ = DetectorKind::kde;
  int num_classes_ = 0;
  bool calibrated_ = false;
  std::vector<double> thresholds_;
  std::vector<std::optional<KdeDetector>> kde_;
  std::vector<std::optional<DeepAeDetector>> ae_;
  std::optional<DeepAeDetector> untrained_ae_;
};

// p-th percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double p);

// Checkpoint containers. KDE: magic "VTKD", u16 version, u32 rows, u32
// cols, f64 bandwidth, row-major f64 observations. DeepAE: two
// back-to-back VTNN records (encoder, then decoder).
void save_kde(std::ostream& out, const KdeDetector& det);
KdeDetector load_kde(std::istream& in);
void save_deepae(std::ostream& out, const DeepAeDetector& det);
DeepAeDetector load_deepae(std::istream& in);

}  // namespace vtlab::detect
