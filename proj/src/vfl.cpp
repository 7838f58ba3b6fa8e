#include "vtlab/vfl.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "vtlab/kernels.hpp"
#include "vtlab/rng.hpp"

namespace vtlab::vfl {

void VflModel::validate() const {
  if (bottoms.empty()) throw std::invalid_argument("vfl: no bottom models");
  for (const nn::Mlp& b : bottoms) b.validate();
  top.validate();
  if (aggregation == Aggregation::sum) {
    const std::size_t dim = bottoms.front().output_dim();
    for (const nn::Mlp& b : bottoms)
      if (b.output_dim() != dim)
        throw std::invalid_argument(
            "vfl: sum aggregation requires equal embedding dims");
    if (top.input_dim() != dim)
      throw std::invalid_argument("vfl: top input dim != embedding dim");
  } else {
    std::size_t total = 0;
    for (const nn::Mlp& b : bottoms) total += b.output_dim();
    if (top.input_dim() != total)
      throw std::invalid_argument(
          "vfl: top input dim != sum of embedding dims");
  }
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& parts,
                              Aggregation mode) {
  if (parts.empty()) throw std::invalid_argument("aggregate: no parties");
  if (mode == Aggregation::sum) {
    std::vector<double> out = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) {
      if (parts[k].size() != out.size())
        throw std::invalid_argument("aggregate: dim mismatch for sum");
      kern::axpy(1.0, parts[k], out);
    }
    return out;
  }
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

VflModel train_vfl(const std::vector<data::PartyView>& views,
                   std::span<const int> labels, int num_classes,
                   const TrainConfig& cfg, TrainStats* stats) {
  if (views.empty()) throw std::invalid_argument("train_vfl: no parties");
  const std::size_t n = views.front().features.rows;
  for (const auto& v : views)
    if (v.features.rows != n)
      throw std::invalid_argument("train_vfl: row counts differ across views");
  if (labels.size() != n)
    throw std::invalid_argument("train_vfl: label count mismatch");

  VflModel model;
  model.aggregation = cfg.aggregation;
  Rng seeder(cfg.seed);
  for (const auto& v : views) {
    std::vector<std::size_t> dims{v.features.cols};
    dims.insert(dims.end(), cfg.bottom_hidden.begin(), cfg.bottom_hidden.end());
    dims.push_back(cfg.embedding_dim);
    model.bottoms.push_back(nn::make_mlp(dims, seeder.fork_seed()));
  }
  const std::size_t agg_dim = cfg.aggregation == Aggregation::sum
                                  ? cfg.embedding_dim
                                  : cfg.embedding_dim * views.size();
  std::vector<std::size_t> top_dims{agg_dim};
  top_dims.insert(top_dims.end(), cfg.top_hidden.begin(), cfg.top_hidden.end());
  top_dims.push_back(static_cast<std::size_t>(num_classes));
  model.top = nn::make_mlp(top_dims, seeder.fork_seed());
  model.validate();

  const std::size_t parties = views.size();
  Rng order_rng(seeder.fork_seed());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);

  auto epoch_pass = [&](bool update) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      const std::size_t m = stop - start;
      std::vector<Matrix> party_in(parties);
      std::vector<nn::ForwardTrace> bottom_traces(parties);
      std::vector<Matrix> embeddings(parties);
      for (std::size_t p = 0; p < parties; ++p) {
        party_in[p] = Matrix(m, views[p].features.cols);
        for (std::size_t i = 0; i < m; ++i)
          std::copy(views[p].features.row(order[start + i]),
                    views[p].features.row(order[start + i]) +
                        views[p].features.cols,
                    party_in[p].row(i));
        embeddings[p] =
            nn::forward(model.bottoms[p], party_in[p], &bottom_traces[p]);
      }
      Matrix agg(m, agg_dim);
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::vector<double>> parts(parties);
        for (std::size_t p = 0; p < parties; ++p)
          parts[p] = to_vector(embeddings[p].row_span(i));
        const std::vector<double> e = aggregate(parts, cfg.aggregation);
        std::copy(e.begin(), e.end(), agg.row(i));
      }
      std::vector<int> batch_labels(m);
      for (std::size_t i = 0; i < m; ++i)
        batch_labels[i] = labels[order[start + i]];
      nn::ForwardTrace top_trace;
      const Matrix logits = nn::forward(model.top, agg, &top_trace);
      Matrix dlogits;
      loss_sum +=
          nn::softmax_cross_entropy_batch(logits, batch_labels, &dlogits);
      ++batches;
      if (!update) continue;
      const auto top_back = nn::backward(model.top, top_trace, dlogits);
      // Embedding gradients delivered to each party.
      for (std::size_t p = 0; p < parties; ++p) {
        const std::size_t dim = cfg.embedding_dim;
        Matrix dembed(m, dim);
        for (std::size_t i = 0; i < m; ++i) {
          const double* src =
              cfg.aggregation == Aggregation::sum
                  ? top_back.input_grad.row(i)
                  : top_back.input_grad.row(i) + p * dim;
          std::copy(src, src + dim, dembed.row(i));
        }
        const auto bottom_back =
            nn::backward(model.bottoms[p], bottom_traces[p], dembed);
        nn::sgd_update(model.bottoms[p], bottom_back.grads, cfg.lr);
      }
      nn::sgd_update(model.top, top_back.grads, cfg.lr);
    }
    return loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
  };

  double initial_loss = epoch_pass(false);
  double final_loss = initial_loss;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    final_loss = epoch_pass(true);
  }

  if (stats) {
    stats->initial_loss = initial_loss;
    stats->final_loss = final_loss;
    std::size_t correct = 0;
    const std::vector<Matrix> embeds = party_embeddings(model, views);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::vector<double>> parts(parties);
      for (std::size_t p = 0; p < parties; ++p)
        parts[p] = to_vector(embeds[p].row_span(i));
      Matrix e(1, agg_dim);
      const std::vector<double> ev = aggregate(parts, cfg.aggregation);
      std::copy(ev.begin(), ev.end(), e.row(0));
      const Matrix logits = nn::forward(model.top, e);
      if (nn::argmax_row(logits.row_span(0)) == labels[i]) ++correct;
    }
    stats->train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return model;
}

std::vector<Matrix> party_embeddings(
    const VflModel& model, const std::vector<data::PartyView>& views) {
  std::vector<Matrix> out;
  out.reserve(views.size());
  for (std::size_t p = 0; p < views.size(); ++p)
    out.push_back(nn::forward(model.bottoms[p], views[p].features));
  return out;
}

ActivePartyCore::ActivePartyCore(const VflModel* model,
                                 const detect::LabelAwareDetector* detector,
                                 int monitored_party, MonitorMode mode)
    : model_(model),
      detector_(detector),
      monitored_(monitored_party),
      mode_(mode) {
  if (monitored_party < 0 ||
      static_cast<std::size_t>(monitored_party) >= model->num_parties())
    throw std::invalid_argument("ActivePartyCore: bad monitored party");
}

void ActivePartyCore::set_defense(const defense::DefenseSpec* spec,
                                  std::uint64_t rng_seed) {
  defense_ = spec;
  defense_rng_ = Rng(rng_seed);
}

PredictionLabel ActivePartyCore::decide(
    std::vector<std::vector<double>> embeddings_by_party) {
  if (embeddings_by_party.size() != model_->num_parties())
    throw std::invalid_argument("decide: embedding count != party count");
  if (defense_ && defense_->kind != defense::Kind::none)
    embeddings_by_party[monitored_] = defense::apply(
        *defense_, std::move(embeddings_by_party[monitored_]), defense_rng_);

  const std::vector<double> agg =
      aggregate(embeddings_by_party, model_->aggregation);
  Matrix in(1, agg.size());
  std::copy(agg.begin(), agg.end(), in.data.begin());
  const Matrix logits = nn::forward(model_->top, in);
  const int predicted = nn::argmax_row(logits.row_span(0));

  const std::vector<double>& scored = mode_ == MonitorMode::monitored_party
                                          ? embeddings_by_party[monitored_]
                                          : agg;
  if (detector_->detect(scored, predicted) == detect::Verdict::anomalous)
    return PredictionLabel::rejected();
  return PredictionLabel::of(predicted);
}

PredictionLabel detector_enhanced_infer(
    const VflModel& model, const detect::LabelAwareDetector& detector,
    int monitored_party, const std::vector<std::vector<double>>& raw_parts,
    MonitorMode mode) {
  if (raw_parts.size() != model.num_parties())
    throw std::invalid_argument("infer: part count != party count");
  std::vector<std::vector<double>> embeddings(raw_parts.size());
  for (std::size_t p = 0; p < raw_parts.size(); ++p) {
    Matrix in(1, raw_parts[p].size());
    std::copy(raw_parts[p].begin(), raw_parts[p].end(), in.data.begin());
    embeddings[p] = nn::forward(model.bottoms[p], in).data;
  }
  ActivePartyCore core(&model, &detector, monitored_party, mode);
  return core.decide(std::move(embeddings));
}

}  // namespace vtlab::vfl
