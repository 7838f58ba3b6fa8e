#include <doctest.h>

#include <cmath>
#include <limits>

#include "vtlab/dataset.hpp"
#include "vtlab/rng.hpp"
#include "vtlab/vfl.hpp"

using namespace vtlab;

TEST_SUITE_BEGIN("vfl");

namespace {

// 2-party, 2-class separated blobs; columns split evenly.
struct Fixture {
  data::Dataset ds;
  std::vector<data::PartyView> views;

  explicit Fixture(std::size_t per_class = 120, std::uint64_t seed = 5) {
    data::BlobSpec spec;
    spec.centers = {{0.0, 0.0, 0.0, 0.0}, {6.0, 6.0, 6.0, 6.0}};
    spec.stdev = {0.8, 0.8};
    spec.count = {per_class, per_class};
    ds = data::generate_synthetic(spec, seed);
    views = data::vertical_split(ds, {0.5, 0.5}, seed,
                                 data::SplitMode::contiguous);
  }
};

vfl::TrainConfig small_train_config() {
  vfl::TrainConfig tc;
  tc.epochs = 30;
  tc.lr = 0.05;
  tc.batch_size = 32;
  tc.seed = 7;
  tc.bottom_hidden = {16, 8};
  tc.embedding_dim = 4;
  tc.top_hidden = {8};
  return tc;
}

detect::LabelAwareDetector fit_defender(const vfl::VflModel& model,
                                        const Fixture& fx, int monitored,
                                        double percentile = 95.0) {
  const Matrix emb =
      nn::forward(model.bottoms[monitored], fx.views[monitored].features);
  detect::LabelAwareDetector::FitConfig cfg;
  cfg.kind = detect::DetectorKind::kde;
  auto det = detect::LabelAwareDetector::fit(emb, fx.ds.labels,
                                             fx.ds.num_classes, cfg);
  det.calibrate(emb, fx.ds.labels, percentile);
  return det;
}

}  // namespace

TEST_CASE("aggregate") {
  const std::vector<std::vector<double>> parts{{1.0, 2.0}, {3.0, 4.0}};
  SUBCASE("sum") {
    CHECK(vfl::aggregate(parts, vfl::Aggregation::sum) ==
          std::vector<double>{4.0, 6.0});
  }
  SUBCASE("concat keeps party order") {
    CHECK(vfl::aggregate(parts, vfl::Aggregation::concat) ==
          std::vector<double>{1.0, 2.0, 3.0, 4.0});
  }
  SUBCASE("single party is the identity under both modes") {
    const std::vector<std::vector<double>> one{{7.0, -1.0}};
    CHECK(vfl::aggregate(one, vfl::Aggregation::sum) == one[0]);
    CHECK(vfl::aggregate(one, vfl::Aggregation::concat) == one[0]);
  }
  SUBCASE("sum rejects mismatched dims") {
    CHECK_THROWS(vfl::aggregate({{1.0}, {1.0, 2.0}}, vfl::Aggregation::sum));
  }
}

TEST_CASE("train_vfl: epochs=0 returns the seeded initialization") {
  const Fixture fx(40);
  vfl::TrainConfig tc = small_train_config();
  tc.epochs = 0;
  const vfl::VflModel a =
      vfl::train_vfl(fx.views, fx.ds.labels, fx.ds.num_classes, tc);
  const vfl::VflModel b =
      vfl::train_vfl(fx.views, fx.ds.labels, fx.ds.num_classes, tc);
  CHECK(a.bottoms[0].layers[0].weights.data ==
        b.bottoms[0].layers[0].weights.data);
  CHECK(a.top.layers[0].weights.data == b.top.layers[0].weights.data);
}

TEST_CASE("train_vfl: separable fixture reaches 0.95 training accuracy") {
  const Fixture fx;
  vfl::TrainStats stats;
  const vfl::VflModel model = vfl::train_vfl(
      fx.views, fx.ds.labels, fx.ds.num_classes, small_train_config(), &stats);
  CHECK(stats.final_loss <= stats.initial_loss);
  CHECK(stats.train_accuracy >= 0.95);
  model.validate();
}

// Finite differences through the full split network confirm the gradients
// handed to each party equal d loss / d embedding.
TEST_CASE("train_vfl: party gradients match finite differences") {
  const Fixture fx(6);
  vfl::TrainConfig tc = small_train_config();
  tc.epochs = 0;
  const vfl::VflModel model =
      vfl::train_vfl(fx.views, fx.ds.labels, fx.ds.num_classes, tc);

  // Composite loss as a function of one party's embedding, others fixed.
  const std::size_t sample = 2;
  std::vector<std::vector<double>> embeddings(2);
  for (int p = 0; p < 2; ++p) {
    Matrix in(1, fx.views[p].features.cols);
    std::copy(fx.views[p].features.row(sample),
              fx.views[p].features.row(sample) + in.cols, in.data.begin());
    embeddings[p] = nn::forward(model.bottoms[p], in).data;
  }
  auto loss_at = [&](const std::vector<std::vector<double>>& embs) {
    const std::vector<double> agg = vfl::aggregate(embs, model.aggregation);
    Matrix in(1, agg.size());
    std::copy(agg.begin(), agg.end(), in.data.begin());
    const Matrix logits = nn::forward(model.top, in);
    return nn::softmax_cross_entropy(logits.row_span(0), fx.ds.labels[sample])
        .loss;
  };

  // Analytic: backprop through the top model.
  const std::vector<double> agg = vfl::aggregate(embeddings, model.aggregation);
  Matrix in(1, agg.size());
  std::copy(agg.begin(), agg.end(), in.data.begin());
  nn::ForwardTrace trace;
  const Matrix logits = nn::forward(model.top, in, &trace);
  const auto lg =
      nn::softmax_cross_entropy(logits.row_span(0), fx.ds.labels[sample]);
  Matrix dlogits(1, lg.grad.size());
  std::copy(lg.grad.begin(), lg.grad.end(), dlogits.data.begin());
  const auto back = nn::backward(model.top, trace, dlogits);

  const double eps = 1e-6;
  for (int p = 0; p < 2; ++p) {
    for (std::size_t j = 0; j < embeddings[p].size(); ++j) {
      auto plus = embeddings, minus = embeddings;
      plus[p][j] += eps;
      minus[p][j] -= eps;
      const double numeric = (loss_at(plus) - loss_at(minus)) / (2 * eps);
      // sum aggregation: every party receives the same embedding gradient
      const double analytic = back.input_grad.at(0, j);
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-4));
    }
  }
}

TEST_CASE("detector_enhanced_infer") {
  const Fixture fx;
  vfl::TrainStats stats;
  const vfl::VflModel model = vfl::train_vfl(
      fx.views, fx.ds.labels, fx.ds.num_classes, small_train_config(), &stats);
  REQUIRE(stats.train_accuracy >= 0.95);
  auto detector = fit_defender(model, fx, 0);

  auto parts_of = [&](std::size_t i) {
    std::vector<std::vector<double>> parts(2);
    for (int p = 0; p < 2; ++p)
      parts[p] = to_vector(fx.views[p].features.row_span(i));
    return parts;
  };

  SUBCASE("benign traffic is mostly accepted at the 95th percentile") {
    std::size_t rej = 0;
    const std::size_t n = fx.ds.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto label =
          vfl::detector_enhanced_infer(model, detector, 0, parts_of(i));
      if (label.is_rej) ++rej;
    }
    const double ratio = static_cast<double>(rej) / static_cast<double>(n);
    CHECK(ratio < 0.12);
    CHECK(ratio > 0.0);
  }

  SUBCASE("far-out-of-distribution embedding is rejected") {
    std::vector<std::vector<double>> embeddings(2);
    Matrix in(1, fx.views[1].features.cols);
    std::copy(fx.views[1].features.row(0),
              fx.views[1].features.row(0) + in.cols, in.data.begin());
    embeddings[1] = nn::forward(model.bottoms[1], in).data;
    embeddings[0].assign(model.embedding_dim(0), 1e6);
    vfl::ActivePartyCore core(&model, &detector, 0);
    CHECK(core.decide(embeddings).is_rej);
  }

  SUBCASE("tau = +inf disables rejection; -inf rejects everything") {
    detect::LabelAwareDetector open = detector;
    open.set_uniform_threshold(std::numeric_limits<double>::infinity());
    detect::LabelAwareDetector closed = detector;
    closed.set_uniform_threshold(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(!vfl::detector_enhanced_infer(model, open, 0, parts_of(i)).is_rej);
      CHECK(vfl::detector_enhanced_infer(model, closed, 0, parts_of(i)).is_rej);
    }
  }
}

TEST_CASE("inference equals the composed network when bottoms are identity") {
  // concat aggregation with identity bottoms reduces the split system to a
  // single network over the reassembled features.
  const Fixture fx(30);
  vfl::VflModel model;
  model.aggregation = vfl::Aggregation::concat;
  for (int p = 0; p < 2; ++p) {
    nn::Mlp identity;
    nn::Layer l;
    const std::size_t d = fx.views[p].features.cols;
    l.weights = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) l.weights.at(i, i) = 1.0;
    l.bias.assign(d, 0.0);
    identity.layers.push_back(l);
    model.bottoms.push_back(identity);
  }
  model.top = nn::make_mlp({4, 8, 2}, 99);
  detect::LabelAwareDetector never =
      detect::LabelAwareDetector::untrained(4, {});

  for (std::size_t i = 0; i < fx.ds.size(); i += 7) {
    std::vector<std::vector<double>> parts(2);
    for (int p = 0; p < 2; ++p)
      parts[p] = to_vector(fx.views[p].features.row_span(i));
    const auto split_label =
        vfl::detector_enhanced_infer(model, never, 0, parts);
    // column order: party 0 columns then party 1 columns == parent order
    const Matrix logits = nn::forward(model.top, Matrix::from_rows({to_vector(
                                                     fx.ds.features.row_span(i))}));
    CHECK(!split_label.is_rej);
    CHECK(split_label.class_index == nn::argmax_row(logits.row_span(0)));
  }
}

TEST_CASE("argmax ties break toward the lowest class index") {
  CHECK(nn::argmax_row(std::vector<double>{1.0, 1.0, 0.5}) == 0);
  CHECK(nn::argmax_row(std::vector<double>{0.2, 1.0, 1.0}) == 1);
}

TEST_SUITE_END();
