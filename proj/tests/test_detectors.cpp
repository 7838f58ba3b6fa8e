#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "vtlab/dataset.hpp"
#include "vtlab/detectors.hpp"
#include "vtlab/rng.hpp"

using namespace vtlab;

TEST_SUITE_BEGIN("detectors");

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> vals) {
  std::vector<std::vector<double>> v;
  for (const auto& r : vals) v.emplace_back(r);
  return Matrix::from_rows(v);
}

}  // namespace

TEST_CASE("kde: single observation peak") {
  const detect::KdeDetector det = detect::fit_kde(rows({{0.0}}), 1.0);
  CHECK(det.density(std::vector<double>{0.0}) == doctest::Approx(1.0));
  CHECK(det.score(std::vector<double>{0.0}) == doctest::Approx(-1.0));
}

TEST_CASE("kde: two observations, query between") {
  const detect::KdeDetector det = detect::fit_kde(rows({{-1.0}, {1.0}}), 1.0);
  const double density = det.density(std::vector<double>{0.0});
  CHECK(density == doctest::Approx(std::exp(-1.0)));
  CHECK(det.score(std::vector<double>{0.0}) ==
        doctest::Approx(-std::exp(-1.0)));
}

TEST_CASE("kde: far query approaches the maximal score 0") {
  const detect::KdeDetector det = detect::fit_kde(rows({{0.0}, {1.0}}), 1.0);
  const double far_score = det.score(std::vector<double>{1e4});
  CHECK(far_score == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(far_score > det.score(std::vector<double>{0.5}));
}

TEST_CASE("kde: score is symmetric under observation permutation") {
  const detect::KdeDetector a =
      detect::fit_kde(rows({{0.0, 1.0}, {2.0, 3.0}, {-1.0, 0.5}}), 0.7);
  const detect::KdeDetector b =
      detect::fit_kde(rows({{-1.0, 0.5}, {0.0, 1.0}, {2.0, 3.0}}), 0.7);
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> q{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    CHECK(a.score(q) == doctest::Approx(b.score(q)).epsilon(1e-14));
  }
}

TEST_CASE("kde: widening bandwidth flattens densities toward zero") {
  const Matrix obs = rows({{0.0}, {0.4}, {-0.3}});
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  double prev_max = 1e9;
  for (const double h : {1.0, 10.0, 100.0, 1000.0}) {
    const detect::KdeDetector det = detect::fit_kde(obs, h);
    double mx = 0.0;
    for (double q : grid) mx = std::max(mx, det.density(std::vector<double>{q}));
    CHECK(mx < prev_max);
    prev_max = mx;
  }
  CHECK(prev_max < 1e-3);
}

TEST_CASE("kde: non-finite query rejected") {
  const detect::KdeDetector det = detect::fit_kde(rows({{0.0}}), 1.0);
  CHECK_THROWS(det.score(std::vector<double>{
      std::numeric_limits<double>::quiet_NaN()}));
}

TEST_CASE("kde: gradient of the score matches finite differences") {
  const detect::KdeDetector det =
      detect::fit_kde(rows({{0.3, -0.2}, {1.0, 0.8}, {-0.4, 0.1}}), 0.9);
  Rng rng(8);
  const double eps = 1e-6;
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const std::vector<double> g = det.score_grad(x);
    for (std::size_t j = 0; j < x.size(); ++j) {
      std::vector<double> p = x, m = x;
      p[j] += eps;
      m[j] -= eps;
      const double numeric = (det.score(p) - det.score(m)) / (2 * eps);
      CHECK(g[j] == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
}

TEST_CASE("median heuristic bandwidth") {
  // pairwise distances of {0, 1, 3}: 1, 3, 2 -> median 2
  CHECK(detect::median_heuristic_bandwidth(rows({{0.0}, {1.0}, {3.0}})) ==
        doctest::Approx(2.0));
  // degenerate data falls back to 1
  CHECK(detect::median_heuristic_bandwidth(rows({{5.0}, {5.0}})) == 1.0);
}

TEST_CASE("deepae: training reduces reconstruction loss") {
  data:: BlobSpec spec;
  spec.centers = {{0.0, 0.0}, {3.0, 3.0}};
  spec.stdev = {0.5, 0.5};
  spec.count = {40, 40};
  const data::Dataset ds = data::generate_synthetic(spec, 5);

  detect::DeepAeConfig cfg;
  cfg.hidden = 8;
  cfg.bottleneck = 1;
  cfg.epochs = 0;
  cfg.seed = 3;
  const detect::DeepAeDetector before = detect::fit_deepae(ds.features, cfg);
  cfg.epochs = 200;
  const detect::DeepAeDetector after = detect::fit_deepae(ds.features, cfg);

  auto mean_score = [&](const detect::DeepAeDetector& det) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.features.rows; ++i)
      s += det.score(ds.features.row_span(i));
    return s / static_cast<double>(ds.features.rows);
  };
  const double initial = mean_score(before);
  const double trained = mean_score(after);
  CHECK(trained < initial);
  CHECK(trained < 0.5 * initial);
}

TEST_CASE("deepae: epochs=0 returns the seeded initialization") {
  Matrix obs = rows({{1.0, 2.0}, {1.5, 2.5}});
  detect::DeepAeConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 12;
  const detect::DeepAeDetector a = detect::fit_deepae(obs, cfg);
  const detect::DeepAeDetector b = detect::fit_deepae(obs, cfg);
  CHECK(a.encoder.layers[0].weights.data == b.encoder.layers[0].weights.data);
  CHECK(a.epochs == 0);
}

TEST_CASE("deepae: score semantics") {
  // Encoder and decoder that together implement the identity map.
  detect::DeepAeDetector det;
  det.encoder.layers.push_back(
      {Matrix(2, 2), {0.0, 0.0}, nn::Activation::identity});
  det.decoder.layers.push_back(
      {Matrix(2, 2), {0.0, 0.0}, nn::Activation::identity});
  det.encoder.layers[0].weights.at(0, 0) = 1.0;
  det.encoder.layers[0].weights.at(1, 1) = 1.0;
  det.decoder.layers[0].weights.at(0, 0) = 1.0;
  det.decoder.layers[0].weights.at(1, 1) = 1.0;
  SUBCASE("perfect reconstruction scores zero") {
    CHECK(det.score(std::vector<double>{3.0, -2.0}) == doctest::Approx(0.0));
  }
  SUBCASE("constant-zero decoder scores the squared norm") {
    det.decoder.layers[0].weights.at(0, 0) = 0.0;
    det.decoder.layers[0].weights.at(1, 1) = 0.0;
    CHECK(det.score(std::vector<double>{3.0, 4.0}) == doctest::Approx(25.0));
  }
  SUBCASE("scoring is pure") {
    const std::vector<double> x{0.5, 0.7};
    CHECK(det.score(x) == det.score(x));
  }
}

TEST_CASE("deepae: analytic score gradient matches finite differences") {
  Matrix obs(20, 3);
  Rng rng(6);
  for (double& v : obs.data) v = rng.uniform(-1, 1);
  detect::DeepAeConfig cfg;
  cfg.hidden = 5;
  cfg.bottleneck = 2;
  cfg.epochs = 30;
  cfg.seed = 21;
  const detect::DeepAeDetector det = detect::fit_deepae(obs, cfg);
  const double eps = 1e-6;
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1)};
    const std::vector<double> g = det.score_grad(x);
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> p = x, m = x;
      p[j] += eps;
      m[j] -= eps;
      const double numeric = (det.score(p) - det.score(m)) / (2 * eps);
      CHECK(g[j] == doctest::Approx(numeric).epsilon(1e-4));
    }
  }
}

TEST_CASE("label-aware fit: sub-detectors see only their class") {
  const Matrix emb = rows({{0.0}, {0.1}, {10.0}, {10.1}});
  const std::vector<int> labels{0, 0, 1, 1};
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  cfg.kde_bandwidth = 1.0;
  const auto det = detect::LabelAwareDetector::fit(emb, labels, 2, cfg);
  // class-0 detector peaks near 0, class-1 near 10
  CHECK(det.score(std::vector<double>{0.05}, 0) <
        det.score(std::vector<double>{0.05}, 1));
  CHECK(det.score(std::vector<double>{10.05}, 1) <
        det.score(std::vector<double>{10.05}, 0));
  CHECK(det.observations_of(0) == 2);
  CHECK(det.observations_of(1) == 2);
}

TEST_CASE("label-aware fit: empty class is always anomalous") {
  const Matrix emb = rows({{0.0}, {0.1}});
  const std::vector<int> labels{0, 0};
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  auto det = detect::LabelAwareDetector::fit(emb, labels, 2, cfg);
  CHECK(!det.has_subdetector(1));
  CHECK(det.score(std::vector<double>{0.0}, 1) ==
        std::numeric_limits<double>::infinity());
  det.set_thresholds({1e9, 1e9});
  CHECK(det.detect(std::vector<double>{0.0}, 1) ==
        detect::Verdict::anomalous);
}

TEST_CASE("percentile: linear interpolation convention") {
  std::vector<double> scores(100);
  for (int i = 0; i < 100; ++i) scores[i] = i + 1;  // 1..100
  CHECK(detect::percentile(scores, 95.0) == doctest::Approx(95.05));
  CHECK(detect::percentile(scores, 99.99) <= 100.0);
  CHECK(detect::percentile({5.0, 5.0, 5.0}, 95.0) == 5.0);
  CHECK_THROWS(detect::percentile({1.0}, 0.0));
  CHECK_THROWS(detect::percentile({1.0}, 100.0));
}

TEST_CASE("calibration bounds the flagged fraction") {
  Rng rng(14);
  Matrix emb(200, 2);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = static_cast<int>(i % 2);
    emb.at(i, 0) = rng.normal(labels[i] * 5.0, 1.0);
    emb.at(i, 1) = rng.normal(0.0, 1.0);
  }
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  auto det = detect::LabelAwareDetector::fit(emb, labels, 2, cfg);
  const double p = 95.0;
  det.calibrate(emb, labels, p);
  for (int c = 0; c < 2; ++c) {
    std::size_t flagged = 0, count = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      if (labels[i] != c) continue;
      ++count;
      if (det.detect(emb.row_span(i), c) == detect::Verdict::anomalous)
        ++flagged;
    }
    const double frac = static_cast<double>(flagged) / count;
    CHECK(frac <= (100.0 - p) / 100.0 + 1.0 / count);
  }
}

TEST_CASE("detect: strict threshold comparison") {
  const Matrix emb = rows({{0.0}, {1.0}, {2.0}});
  const std::vector<int> labels{0, 0, 0};
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  cfg.kde_bandwidth = 1.0;
  auto det = detect::LabelAwareDetector::fit(emb, labels, 1, cfg);
  const double s = det.score(std::vector<double>{5.0}, 0);
  det.set_thresholds({s});
  // equal to tau -> normal; strictly above -> anomalous
  CHECK(det.detect(std::vector<double>{5.0}, 0) == detect::Verdict::normal);
  CHECK(det.detect(std::vector<double>{6.0}, 0) == detect::Verdict::anomalous);
}

TEST_CASE("detect: label-awareness changes the verdict") {
  Rng rng(9);
  Matrix emb(100, 1);
  std::vector<int> labels(100);
  for (std::size_t i = 0; i < 100; ++i) {
    labels[i] = static_cast<int>(i % 2);
    emb.at(i, 0) = rng.normal(labels[i] * 20.0, 1.0);
  }
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  auto det = detect::LabelAwareDetector::fit(emb, labels, 2, cfg);
  det.calibrate(emb, labels, 95.0);
  // a point inside the class-0 blob
  const std::vector<double> q{0.2};
  CHECK(det.detect(q, 0) == detect::Verdict::normal);
  CHECK(det.detect(q, 1) == detect::Verdict::anomalous);
}

TEST_CASE("uncalibrated detector refuses to decide") {
  const Matrix emb = rows({{0.0}});
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  const auto det = detect::LabelAwareDetector::fit(emb, {0}, 1, cfg);
  CHECK_THROWS_AS(det.detect(std::vector<double>{0.0}, 0), std::logic_error);
}

TEST_CASE("kde checkpoint roundtrip and errors") {
  const detect::KdeDetector det =
      detect::fit_kde(rows({{1.0, 2.0}, {3.0, 4.0}}), 0.75);
  std::stringstream buf;
  detect::save_kde(buf, det);
  const detect::KdeDetector loaded = detect::load_kde(buf);
  CHECK(loaded.bandwidth == det.bandwidth);
  CHECK(loaded.observations.data == det.observations.data);

  std::stringstream bad;
  bad << "NOPE";
  CHECK_THROWS(detect::load_kde(bad));
}

TEST_CASE("deepae checkpoint roundtrip") {
  Matrix obs(10, 2);
  Rng rng(4);
  for (double& v : obs.data) v = rng.uniform(-1, 1);
  detect::DeepAeConfig cfg;
  cfg.hidden = 4;
  cfg.bottleneck = 1;
  cfg.epochs = 10;
  const detect::DeepAeDetector det = detect::fit_deepae(obs, cfg);
  std::stringstream buf;
  detect::save_deepae(buf, det);
  const detect::DeepAeDetector loaded = detect::load_deepae(buf);
  const std::vector<double> q{0.3, -0.6};
  CHECK(loaded.score(q) == det.score(q));
}

TEST_SUITE_END();
