#include "vtlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "vtlab/clustering.hpp"
#include "vtlab/kernels.hpp"
#include "vtlab/rng.hpp"

namespace vtlab::attack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> row_vec(const Matrix& m, std::size_t i) {
  return to_vector(m.row_span(i));
}

Matrix single_row(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

bool uses_expressiveness(Variant v) {
  return v == Variant::vtarbel || v == Variant::random_attack;
}

bool has_attack_stage(Variant v) { return v != Variant::only_preparation; }

}  // namespace

void AttackReport::recompute(int targeted_label) {
  q_size = 0;
  prep_successes = attack_successes = rejected = 0;
  std::size_t attack_count = 0;
  for (const SampleRecord& r : records) {
    const bool hit = !r.label.is_rej && r.label.class_index == targeted_label;
    if (r.stage == Stage::preparation) {
      ++q_size;
      if (hit) ++prep_successes;
    } else {
      ++attack_count;
      if (hit) ++attack_successes;
    }
    if (r.label.is_rej) ++rejected;
  }
  total_samples = records.size();
  overall_successes = prep_successes + attack_successes;
  s1 = q_size ? static_cast<double>(prep_successes) / static_cast<double>(q_size)
              : 0.0;
  s2 = attack_count ? static_cast<double>(attack_successes) /
                          static_cast<double>(attack_count)
                    : 0.0;
  overall_asr = total_samples ? static_cast<double>(overall_successes) /
                                    static_cast<double>(total_samples)
                              : 0.0;
  anomaly_ratio = total_samples ? static_cast<double>(rejected) /
                                      static_cast<double>(total_samples)
                                : 0.0;
}

void write_report(std::ostream& out, const AttackReport& report) {
  out << "index\tstage\tlabel\n";
  for (const SampleRecord& r : report.records) {
    out << r.index << '\t'
        << (r.stage == Stage::preparation ? "preparation" : "attack") << '\t';
    if (r.label.is_rej)
      out << "REJ";
    else
      out << r.label.class_index;
    out << '\n';
  }
  out << "# s1=" << report.s1 << " s2=" << report.s2
      << " overall=" << report.overall_asr
      << " anomaly_ratio=" << report.anomaly_ratio << " q=" << report.q_size
      << '\n';
}

nn::Mlp fine_tune_surrogate(const nn::Mlp& bottom, const nn::Mlp& head,
                            const Matrix& inputs, std::span<const int> labels,
                            std::size_t epochs, double lr,
                            std::uint64_t seed) {
  if (inputs.rows == 0)
    throw std::invalid_argument("fine_tune_surrogate: empty training set");
  if (head.input_dim() != bottom.output_dim())
    throw std::invalid_argument("fine_tune_surrogate: head does not chain");
  nn::Mlp surrogate;
  surrogate.layers = bottom.layers;
  surrogate.layers.insert(surrogate.layers.end(), head.layers.begin(),
                          head.layers.end());
  surrogate.seed = head.seed;
  surrogate.validate();

  Rng order_rng(seed);
  std::vector<std::size_t> order(inputs.rows);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = 32;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, order_rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      Matrix batch(stop - start, inputs.cols);
      std::vector<int> batch_labels(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        std::copy(inputs.row(order[i]), inputs.row(order[i]) + inputs.cols,
                  batch.row(i - start));
        batch_labels[i - start] = labels[order[i]];
      }
      nn::ForwardTrace trace;
      const Matrix logits = nn::forward(surrogate, batch, &trace);
      Matrix dlogits;
      nn::softmax_cross_entropy_batch(logits, batch_labels, &dlogits);
      const auto back = nn::backward(surrogate, trace, dlogits);
      nn::sgd_update(surrogate, back.grads, lr);
    }
  }
  return surrogate;
}

namespace {

// J(x) and dJ/dx. The detector term scores the raw-feature iterate's
// embedding under the surrogate's current predicted class.
struct Objective {
  double value = 0.0;
  std::vector<double> grad;
  int predicted = 0;
  double detector_score = 0.0;
};

Objective evaluate_objective(std::span<const double> x, const nn::Mlp& surrogate,
                             const nn::Mlp& bottom,
                             const detect::LabelAwareDetector& estimator,
                             int targeted_label, double lambda) {
  Objective out;
  const Matrix in = single_row(x);
  nn::ForwardTrace sur_trace;
  const Matrix logits = nn::forward(surrogate, in, &sur_trace);
  out.predicted = nn::argmax_row(logits.row_span(0));
  const nn::LossGrad ce =
      nn::softmax_cross_entropy(logits.row_span(0), targeted_label);
  const auto sur_back =
      nn::backward(surrogate, sur_trace, single_row(ce.grad));
  out.grad = sur_back.input_grad.data;
  out.value = ce.loss;

  if (lambda != 0.0) {
    nn::ForwardTrace bot_trace;
    const Matrix emb = nn::forward(bottom, in, &bot_trace);
    out.detector_score = estimator.score(emb.row_span(0), out.predicted);
    const std::vector<double> demb =
        estimator.score_grad(emb.row_span(0), out.predicted);
    const auto bot_back = nn::backward(bottom, bot_trace, single_row(demb));
    kern::axpy(lambda, bot_back.input_grad.data, out.grad);
    if (std::isfinite(out.detector_score))
      out.value += lambda * out.detector_score;
  }
  return out;
}

// Project onto the L2 ball around `origin`, then clamp into the bounds.
// Clamping never moves a coordinate away from the (in-bounds) origin, so
// the ball constraint survives the second step.
void project(std::span<const double> origin, std::span<double> x,
             double radius, std::span<const data::Bounds> bounds) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - origin[j];
    d2 += d * d;
  }
  if (radius >= 0.0 && d2 > radius * radius) {
    const double scale = d2 > 0.0 ? radius / std::sqrt(d2) : 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = origin[j] + (x[j] - origin[j]) * scale;
  }
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = std::clamp(x[j], bounds[j].lo, bounds[j].hi);
}

}  // namespace

PgdOutcome generate_malicious(std::span<const double> original,
                              const nn::Mlp& surrogate, const nn::Mlp& bottom,
                              const detect::LabelAwareDetector& estimator,
                              std::span<const data::Bounds> bounds,
                              const PgdSettings& settings) {
  if (bounds.size() != original.size())
    throw std::invalid_argument("generate_malicious: bounds dim mismatch");
  PgdOutcome out;
  out.sample.assign(original.begin(), original.end());
  std::vector<double> current(original.begin(), original.end());

  Objective obj = evaluate_objective(current, surrogate, bottom, estimator,
                                     settings.targeted_label, settings.lambda);
  out.initial_objective = obj.value;
  out.final_objective = obj.value;

  for (std::size_t step = 0; step < settings.max_steps; ++step) {
    bool finite = true;
    for (double g : obj.grad)
      if (!std::isfinite(g)) finite = false;
    if (!finite) {
      // Abort the sample: submit the original unmodified.
      out.sample.assign(original.begin(), original.end());
      out.modified = false;
      out.steps_accepted = 0;
      return out;
    }
    std::vector<double> candidate = current;
    kern::axpy(-settings.alpha, obj.grad, candidate);
    project(original, candidate, settings.radius, bounds);

    // Detector check on the would-be next iterate.
    const Matrix emb = nn::forward(bottom, single_row(candidate));
    const Matrix logits = nn::forward(surrogate, single_row(candidate));
    const int predicted = nn::argmax_row(logits.row_span(0));
    const double score = emb.cols ? estimator.score(emb.row_span(0), predicted)
                                  : 0.0;
    if (estimator.calibrated() && score > estimator.threshold(predicted)) break;

    current = std::move(candidate);
    ++out.steps_accepted;
    obj = evaluate_objective(current, surrogate, bottom, estimator,
                             settings.targeted_label, settings.lambda);
  }

  out.final_objective = obj.value;
  out.modified = !std::equal(current.begin(), current.end(), original.begin());
  out.sample = std::move(current);
  return out;
}

namespace {

detect::LabelAwareDetector fit_estimated_detector(
    const Matrix& embeddings, const std::vector<std::pair<std::size_t, int>>& d_loc,
    int num_classes, const AttackSection& cfg, std::uint64_t seed) {
  Matrix obs(d_loc.size(), embeddings.cols);
  std::vector<int> labels(d_loc.size());
  for (std::size_t i = 0; i < d_loc.size(); ++i) {
    std::copy(embeddings.row(d_loc[i].first),
              embeddings.row(d_loc[i].first) + embeddings.cols, obs.row(i));
    labels[i] = d_loc[i].second;
  }
  detect::LabelAwareDetector::FitConfig fit_cfg;
  fit_cfg.kind = cfg.est_kind;
  fit_cfg.ae.hidden = cfg.est_ae_hidden;
  fit_cfg.ae.bottleneck = cfg.est_ae_bottleneck;
  fit_cfg.ae.epochs = cfg.est_ae_epochs;
  fit_cfg.ae.lr = cfg.est_ae_lr;
  fit_cfg.ae.seed = seed;
  detect::LabelAwareDetector det =
      detect::LabelAwareDetector::fit(obs, labels, num_classes, fit_cfg);
  det.calibrate(obs, labels, cfg.est_percentile);
  return det;
}

nn::Mlp make_head(std::size_t embedding_dim, int num_classes,
                  std::uint64_t seed) {
  return nn::make_mlp({embedding_dim, std::max<std::size_t>(embedding_dim, 8),
                       static_cast<std::size_t>(num_classes)},
                      seed);
}

}  // namespace

PreparationResult run_preparation_stage(const AttackerContext& ctx,
                                        const AttackSection& cfg,
                                        Variant variant, std::uint64_t seed) {
  if (!ctx.view || !ctx.bottom || !ctx.service)
    throw std::invalid_argument("run_preparation_stage: incomplete context");
  const std::size_t n = ctx.view->features.rows;
  const int num_classes = ctx.num_classes;

  PreparationResult result;
  result.attacker_embeddings = nn::forward(*ctx.bottom, ctx.view->features);
  result.state.q_by_class.resize(num_classes);
  result.state.mmd_history.push_back(kInf);

  Rng rng(seed);
  const std::uint64_t kmeans_seed = rng.fork_seed();
  const std::uint64_t head_seed = rng.fork_seed();
  const std::uint64_t ft_seed = rng.fork_seed();
  const std::uint64_t est_seed = rng.fork_seed();
  Rng pick_rng(rng.fork_seed());

  const nn::Mlp head = make_head(ctx.bottom->output_dim(), num_classes, head_seed);

  auto submit = [&](std::size_t idx) {
    const vfl::PredictionLabel label =
        ctx.service->infer(idx, row_vec(result.attacker_embeddings, idx));
    result.records.push_back({idx, Stage::preparation, label, false});
    if (!label.is_rej)
      result.state.d_loc.emplace_back(idx, label.class_index);
    return label;
  };

  if (variant == Variant::only_preparation) {
    for (std::size_t i = 0; i < n; ++i) submit(i);
    result.state.q_star.resize(n);
    std::iota(result.state.q_star.begin(), result.state.q_star.end(), 0);
    result.surrogate = *ctx.bottom;  // unused: no attack stage follows
    result.estimated_detector = detect::LabelAwareDetector::untrained(
        ctx.bottom->output_dim(), detect::DeepAeConfig{});
    return result;
  }

  if (variant == Variant::only_attack) {
    // The attack starts immediately: no queries, a random head, an
    // untrained estimator that never rejects a PGD step.
    nn::Mlp surrogate;
    surrogate.layers = ctx.bottom->layers;
    surrogate.layers.insert(surrogate.layers.end(), head.layers.begin(),
                            head.layers.end());
    result.surrogate = std::move(surrogate);
    result.estimated_detector = detect::LabelAwareDetector::untrained(
        ctx.bottom->output_dim(), detect::DeepAeConfig{});
    return result;
  }

  const Matrix& cluster_points =
      cfg.cluster_on_embeddings ? result.attacker_embeddings
                                : ctx.view->features;
  select::RbfKernel kernel{
      select::median_heuristic_sigma(result.attacker_embeddings)};
  select::MmdState mmd_state(result.attacker_embeddings, kernel);

  const bool clustered = variant != Variant::random_prep_without_clustering;
  std::size_t round = 1;
  while (true) {
    std::vector<std::vector<std::size_t>> clusters;
    if (clustered) {
      const cluster::ClusterAssignment assignment =
          cluster::constrained_seed_kmeans(cluster_points, result.state.d_loc,
                                           num_classes, cfg.cluster_max_iter,
                                           kmeans_seed);
      clusters = assignment.members(num_classes);
    } else {
      clusters.resize(1);
      clusters[0].resize(n);
      std::iota(clusters[0].begin(), clusters[0].end(), 0);
    }

    std::vector<std::size_t> picked;
    std::vector<int> picked_class;
    if (uses_expressiveness(variant)) {
      const select::RoundResult rr = select::select_round(
          clusters, mmd_state, cfg.eta, cfg.sequential_selection);
      picked = rr.picked;
      for (std::size_t c = 0; c < rr.per_class.size(); ++c)
        for (std::size_t k = 0; k < rr.per_class[c].size(); ++k)
          picked_class.push_back(static_cast<int>(c));
    } else {
      // Random-preparation ablations: uniform picks, same loop structure.
      const std::size_t per_bucket =
          clustered ? cfg.eta
                    : cfg.eta * static_cast<std::size_t>(num_classes);
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        std::vector<std::size_t> candidates;
        for (std::size_t idx : clusters[c])
          if (!mmd_state.selected(idx)) candidates.push_back(idx);
        for (std::size_t k = 0; k < per_bucket && !candidates.empty(); ++k) {
          const std::size_t at =
              static_cast<std::size_t>(pick_rng.below(candidates.size()));
          const std::size_t idx = candidates[at];
          candidates.erase(candidates.begin() +
                           static_cast<std::ptrdiff_t>(at));
          mmd_state.add(idx);
          picked.push_back(idx);
          picked_class.push_back(static_cast<int>(clustered ? c : 0));
        }
      }
    }

    if (picked.empty()) break;  // every cluster exhausted

    for (std::size_t k = 0; k < picked.size(); ++k) {
      result.state.q_star.push_back(picked[k]);
      if (clustered)
        result.state.q_by_class[picked_class[k]].push_back(picked[k]);
      submit(picked[k]);
    }
    result.state.mmd_history.push_back(mmd_state.current_mmd2());
    result.state.rounds = round;
    ++round;

    if (cfg.random_prep_size > 0 && !uses_expressiveness(variant) &&
        result.state.q_star.size() >= cfg.random_prep_size)
      break;
    if (select::stopping_check(result.state.mmd_history, cfg.epsilon, round,
                               cfg.max_rounds) == select::StopDecision::stop)
      break;
  }

  if (result.state.d_loc.empty())
    throw std::runtime_error(
        "preparation stage: every inference call returned REJ; cannot build "
        "a local training set");

  Matrix d_loc_inputs(result.state.d_loc.size(), ctx.view->features.cols);
  std::vector<int> d_loc_labels(result.state.d_loc.size());
  for (std::size_t i = 0; i < result.state.d_loc.size(); ++i) {
    const std::size_t idx = result.state.d_loc[i].first;
    std::copy(ctx.view->features.row(idx),
              ctx.view->features.row(idx) + ctx.view->features.cols,
              d_loc_inputs.row(i));
    d_loc_labels[i] = result.state.d_loc[i].second;
  }
  result.surrogate = fine_tune_surrogate(*ctx.bottom, head, d_loc_inputs,
                                         d_loc_labels, cfg.t_ft, cfg.ft_lr,
                                         ft_seed);
  result.estimated_detector =
      fit_estimated_detector(result.attacker_embeddings, result.state.d_loc,
                             num_classes, cfg, est_seed);
  return result;
}

namespace {

struct RawRanges {
  std::vector<double> range;  // per-dimension max - min
  double r_max = 0.0;
  double mean_range = 0.0;
};

RawRanges preparation_ranges(const AttackerContext& ctx,
                             const std::vector<std::size_t>& q_star) {
  RawRanges out;
  const std::size_t d = ctx.view->features.cols;
  out.range.assign(d, 0.0);
  if (q_star.empty()) {
    // No preparation samples (only_attack): fall back to the view's
    // data-derived bounds.
    for (std::size_t j = 0; j < d; ++j)
      out.range[j] = ctx.raw_bounds[j].hi - ctx.raw_bounds[j].lo;
  } else {
    std::vector<double> lo(d, kInf), hi(d, -kInf);
    for (std::size_t idx : q_star)
      for (std::size_t j = 0; j < d; ++j) {
        const double v = ctx.view->features.at(idx, j);
        lo[j] = std::min(lo[j], v);
        hi[j] = std::max(hi[j], v);
      }
    for (std::size_t j = 0; j < d; ++j) out.range[j] = hi[j] - lo[j];
  }
  double sum2 = 0.0, sum = 0.0;
  for (double r : out.range) {
    sum2 += r * r;
    sum += r;
  }
  out.r_max = std::sqrt(sum2);
  out.mean_range = sum / static_cast<double>(d);
  return out;
}

}  // namespace

PgdSettings build_pgd_settings(const AttackerContext& ctx,
                               const std::vector<std::size_t>& q_star,
                               const AttackSection& cfg) {
  const RawRanges ranges = preparation_ranges(ctx, q_star);
  PgdSettings settings;
  settings.targeted_label = cfg.targeted_label;
  settings.lambda = cfg.lambda != 0.0
                        ? cfg.lambda
                        : (cfg.est_kind == detect::DetectorKind::deepae ? 1.0
                                                                        : 20.0);
  settings.alpha = cfg.alpha != 0.0 ? cfg.alpha : 0.05 * ranges.mean_range;
  settings.radius = cfg.beta * ranges.r_max;
  settings.max_steps = cfg.t_opt;
  return settings;
}

AttackReport run_attack_stage(const AttackerContext& ctx,
                              const PreparationResult& prep,
                              const AttackSection& cfg, Variant variant,
                              std::uint64_t seed) {
  const std::size_t n = ctx.view->features.rows;
  AttackReport report;
  report.records = prep.records;

  std::vector<bool> in_q(n, false);
  for (std::size_t idx : prep.state.q_star) in_q[idx] = true;

  const PgdSettings settings = build_pgd_settings(ctx, prep.state.q_star, cfg);

  // Replay donors for the random_attack ablation: preparation samples the
  // system predicted as the targeted label.
  std::vector<std::size_t> donors;
  if (variant == Variant::random_attack) {
    for (const SampleRecord& r : prep.records)
      if (!r.label.is_rej && r.label.class_index == cfg.targeted_label)
        donors.push_back(r.index);
    if (donors.empty())
      throw std::runtime_error(
          "random_attack: no preparation sample was predicted as the "
          "targeted label");
  }
  Rng donor_rng(seed);

  for (std::size_t idx = 0; idx < n; ++idx) {
    if (in_q[idx]) continue;
    std::vector<double> submission;
    bool modified = false;
    if (variant == Variant::random_attack) {
      const std::size_t donor =
          donors[static_cast<std::size_t>(donor_rng.below(donors.size()))];
      submission = row_vec(prep.attacker_embeddings, donor);
      modified = donor != idx;
    } else {
      const PgdOutcome pgd = generate_malicious(
          ctx.view->features.row_span(idx), prep.surrogate, *ctx.bottom,
          prep.estimated_detector, ctx.raw_bounds, settings);
      const Matrix emb = nn::forward(*ctx.bottom, single_row(pgd.sample));
      submission = emb.data;
      modified = pgd.modified;
    }
    const vfl::PredictionLabel label = ctx.service->infer(idx, submission);
    report.records.push_back({idx, Stage::attack, label, modified});
  }

  report.recompute(cfg.targeted_label);
  return report;
}

AttackReport run_variant(const AttackerContext& ctx, const AttackSection& cfg,
                         Variant variant, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t prep_seed = rng.fork_seed();
  const std::uint64_t attack_seed = rng.fork_seed();
  PreparationResult prep = run_preparation_stage(ctx, cfg, variant, prep_seed);
  if (!has_attack_stage(variant)) {
    AttackReport report;
    report.records = std::move(prep.records);
    report.recompute(cfg.targeted_label);
    return report;
  }
  return run_attack_stage(ctx, prep, cfg, variant, attack_seed);
}

}  // namespace vtlab::attack
