#include "vtlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vtlab/rng.hpp"

namespace vtlab::harness {

namespace {

// Fixed-format float for byte-stable results files.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct SeedPlan {
  std::uint64_t train_data;
  std::uint64_t test_data;
  std::uint64_t split;
  std::uint64_t vfl_train;
  std::uint64_t detector;
  std::uint64_t attack;
  std::uint64_t defense;

  explicit SeedPlan(std::uint64_t seed) {
    Rng rng(seed);
    train_data = rng.fork_seed();
    test_data = rng.fork_seed();
    split = rng.fork_seed();
    vfl_train = rng.fork_seed();
    detector = rng.fork_seed();
    attack = rng.fork_seed();
    defense = rng.fork_seed();
  }
};

data::BlobSpec blob_spec(const DatasetConfig& d, bool train_set) {
  data::BlobSpec spec;
  const int c = d.classes;
  if (!d.centers.empty()) {
    if (static_cast<int>(d.centers.size()) != c)
      throw std::runtime_error("dataset.centers count != dataset.classes");
    spec.centers = d.centers;
    for (auto& center : spec.centers) center.resize(d.dim, 0.0);
  } else {
    // Grid placement in the first two dimensions (2x2 for four classes).
    const int cols = static_cast<int>(std::ceil(std::sqrt(double(c))));
    for (int k = 0; k < c; ++k) {
      std::vector<double> center(d.dim, 0.0);
      center[0] = static_cast<double>(k % cols) * d.grid_spacing;
      if (d.dim > 1) center[1] = static_cast<double>(k / cols) * d.grid_spacing;
      spec.centers.push_back(std::move(center));
    }
  }
  spec.stdev.assign(c, d.stdev);
  spec.count.assign(c, train_set ? d.train_per_class : d.test_per_class);
  return spec;
}

struct SeedData {
  data::Dataset train;
  data::Dataset test;
};

SeedData build_datasets(const ExperimentConfig& cfg, const SeedPlan& plan) {
  SeedData out;
  if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
    out.train = data::generate_synthetic(blob_spec(cfg.dataset, true),
                                         plan.train_data);
    out.test = data::generate_synthetic(blob_spec(cfg.dataset, false),
                                        plan.test_data);
  } else {
    data::TabularSchema schema{cfg.dataset.delimiter, cfg.dataset.label_column,
                               cfg.dataset.has_header};
    const data::Dataset full = data::load_tabular(cfg.dataset.path, schema);
    std::vector<std::size_t> order(full.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(plan.train_data);
    shuffle(order, rng);
    const std::size_t n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.dataset.train_fraction *
                                    static_cast<double>(full.size())));
    auto take = [&](std::size_t from, std::size_t to) {
      data::Dataset ds;
      ds.features = Matrix(to - from, full.dim());
      ds.labels.resize(to - from);
      ds.num_classes = full.num_classes;
      for (std::size_t i = from; i < to; ++i) {
        std::copy(full.features.row(order[i]),
                  full.features.row(order[i]) + full.dim(),
                  ds.features.row(i - from));
        ds.labels[i - from] = full.labels[order[i]];
      }
      ds.bounds = full.bounds;
      return ds;
    };
    out.train = take(0, n_train);
    out.test = take(n_train, full.size());
    if (out.test.size() == 0)
      throw std::runtime_error("tabular split left no test rows");
  }
  return out;
}

std::vector<data::PartyView> views_with_columns(
    const data::Dataset& ds, const std::vector<data::PartyView>& like) {
  std::vector<data::PartyView> views(like.size());
  for (std::size_t p = 0; p < like.size(); ++p) {
    views[p].party_id = like[p].party_id;
    views[p].columns = like[p].columns;
    views[p].features = Matrix(ds.size(), like[p].columns.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t j = 0; j < like[p].columns.size(); ++j)
        views[p].features.at(i, j) = ds.features.at(i, like[p].columns[j]);
  }
  return views;
}

defense::DefenseSpec build_defense(const ExperimentConfig& cfg,
                                   const Matrix& monitored_train_embeddings,
                                   std::uint64_t seed) {
  defense::DefenseSpec spec;
  spec.kind = cfg.defense.kind;
  spec.sigma = cfg.defense.sigma;
  spec.bins = cfg.defense.bins;
  spec.preserved_ratio = cfg.defense.preserved_ratio;
  spec.seed = seed;
  if (spec.kind == defense::Kind::discrete) {
    const Matrix& e = monitored_train_embeddings;
    if (cfg.defense.per_dimension_calibration) {
      spec.calibration.resize(e.cols);
      for (std::size_t j = 0; j < e.cols; ++j) {
        double lo = e.at(0, j), hi = lo;
        for (std::size_t i = 1; i < e.rows; ++i) {
          lo = std::min(lo, e.at(i, j));
          hi = std::max(hi, e.at(i, j));
        }
        spec.calibration[j] = {lo, hi};
      }
    } else {
      double lo = e.data.front(), hi = lo;
      for (double v : e.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      spec.calibration.assign(e.cols, {lo, hi});
    }
  }
  return spec;
}

}  // namespace

SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SeedPlan plan(seed);
  std::string stage = "dataset";
  try {
    const SeedData ds = build_datasets(cfg, plan);
    const int num_classes = ds.train.num_classes;
    if (cfg.attack.targeted_label >= num_classes)
      throw std::runtime_error("targeted label out of range for dataset");

    stage = "split";
    const std::vector<data::PartyView> train_views = data::vertical_split(
        ds.train, cfg.split_fractions, plan.split, cfg.split_mode);
    const std::vector<data::PartyView> test_views =
        views_with_columns(ds.test, train_views);
    const int monitored = cfg.attack.party;

    stage = "vfl_training";
    vfl::TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.lr = cfg.train.lr;
    tc.batch_size = cfg.train.batch_size;
    tc.seed = plan.vfl_train;
    tc.bottom_hidden = cfg.model.bottom_hidden;
    tc.embedding_dim = cfg.model.embedding_dim;
    tc.top_hidden = cfg.model.top_hidden;
    tc.aggregation = cfg.model.aggregation;
    SeedOutcome outcome;
    outcome.seed = seed;
    const vfl::VflModel model = vfl::train_vfl(
        train_views, ds.train.labels, num_classes, tc, &outcome.train_stats);

    stage = "detector";
    const Matrix monitored_train_emb = nn::forward(
        model.bottoms[monitored], train_views[monitored].features);
    const Matrix* calibration_source = &monitored_train_emb;
    Matrix aggregated_train_emb;
    if (cfg.detector.monitor == vfl::MonitorMode::aggregated) {
      const std::vector<Matrix> all =
          vfl::party_embeddings(model, train_views);
      std::vector<std::vector<double>> parts(all.size());
      aggregated_train_emb =
          Matrix(ds.train.size(), model.top.input_dim());
      for (std::size_t i = 0; i < ds.train.size(); ++i) {
        for (std::size_t p = 0; p < all.size(); ++p)
          parts[p] = to_vector(all[p].row_span(i));
        const std::vector<double> agg =
            vfl::aggregate(parts, model.aggregation);
        std::copy(agg.begin(), agg.end(), aggregated_train_emb.row(i));
      }
      calibration_source = &aggregated_train_emb;
    }
    detect::LabelAwareDetector::FitConfig fit_cfg;
    fit_cfg.kind = cfg.detector.kind;
    if (cfg.detector.kde_bandwidth > 0.0)
      fit_cfg.kde_bandwidth = cfg.detector.kde_bandwidth;
    fit_cfg.ae.hidden = cfg.detector.ae_hidden;
    fit_cfg.ae.bottleneck = cfg.detector.ae_bottleneck;
    fit_cfg.ae.epochs = cfg.detector.ae_epochs;
    fit_cfg.ae.batch_size = cfg.detector.ae_batch;
    fit_cfg.ae.lr = cfg.detector.ae_lr;
    fit_cfg.ae.seed = plan.detector;
    detect::LabelAwareDetector defender = detect::LabelAwareDetector::fit(
        *calibration_source, ds.train.labels, num_classes, fit_cfg);
    defender.calibrate(*calibration_source, ds.train.labels,
                       cfg.detector.percentile, cfg.detector.global_tau);

    stage = "transport";
    const defense::DefenseSpec defense_spec =
        build_defense(cfg, monitored_train_emb, plan.defense);
    vfl::ActivePartyCore core(&model, &defender, monitored,
                              cfg.detector.monitor);
    core.set_defense(&defense_spec, plan.defense);

    net::PartyEmbeddingTable table;
    table.monitored = monitored;
    table.by_party.resize(test_views.size());
    for (std::size_t p = 0; p < test_views.size(); ++p)
      if (static_cast<int>(p) != monitored)
        table.by_party[p] =
            nn::forward(model.bottoms[p], test_views[p].features);

    std::unique_ptr<net::TcpServer> server;
    std::unique_ptr<net::InferenceService> service;
    if (cfg.transport.kind == TransportKind::tcp) {
      server = std::make_unique<net::TcpServer>(std::move(core),
                                                std::move(table));
      const std::uint16_t port = server->start(cfg.transport.port);
      service = std::make_unique<net::TcpClient>(
          cfg.transport.host, port, static_cast<std::uint16_t>(monitored));
    } else {
      service = std::make_unique<net::InprocService>(std::move(core),
                                                     std::move(table));
    }

    stage = "accuracy";
    const Matrix attacker_test_emb = nn::forward(
        model.bottoms[monitored], test_views[monitored].features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
      const vfl::PredictionLabel label =
          service->infer(i, to_vector(attacker_test_emb.row_span(i)));
      if (!label.is_rej && label.class_index == ds.test.labels[i]) ++correct;
    }
    outcome.main_accuracy =
        static_cast<double>(correct) / static_cast<double>(ds.test.size());

    stage = std::string("variant:") + variant_name(cfg.variant);
    attack::AttackerContext ctx;
    ctx.view = &test_views[monitored];
    ctx.bottom = &model.bottoms[monitored];
    ctx.service = service.get();
    ctx.num_classes = num_classes;
    ctx.raw_bounds = data::view_bounds(ds.test, test_views[monitored]);
    outcome.report =
        attack::run_variant(ctx, cfg.attack, cfg.variant, plan.attack);

    stage = "metrics";
    std::vector<bool> flagged, truth;
    flagged.reserve(outcome.report.records.size());
    truth.reserve(outcome.report.records.size());
    for (const attack::SampleRecord& r : outcome.report.records) {
      flagged.push_back(r.label.is_rej);
      truth.push_back(r.stage == attack::Stage::attack && r.modified);
    }
    outcome.detector_f1 = detector_f1(flagged, truth);

    if (auto* client = dynamic_cast<net::TcpClient*>(service.get()))
      client->end_session();
    return outcome;
  } catch (const std::exception& e) {
    throw std::runtime_error("seed " + std::to_string(seed) + ", stage " +
                             stage + ": " + e.what());
  }
}

void ResultsRecord::recompute_aggregates() {
  std::vector<double> asr, s1, s2, acc, anom, f1;
  for (const SeedOutcome& o : per_seed) {
    asr.push_back(o.report.overall_asr);
    s1.push_back(o.report.s1);
    s2.push_back(o.report.s2);
    acc.push_back(o.main_accuracy);
    anom.push_back(o.report.anomaly_ratio);
    f1.push_back(o.detector_f1);
  }
  aggregates.overall_asr = mean_std(asr);
  aggregates.s1 = mean_std(s1);
  aggregates.s2 = mean_std(s2);
  aggregates.accuracy = mean_std(acc);
  aggregates.anomaly_ratio = mean_std(anom);
  aggregates.f1 = mean_std(f1);
}

ResultsRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultsRecord record;
  record.config_digest = cfg.digest();
  record.variant = cfg.variant;
  for (std::uint64_t seed : cfg.seeds)
    record.per_seed.push_back(run_seed(cfg, seed));
  record.recompute_aggregates();

  if (!cfg.output.report_dir.empty()) {
    for (const SeedOutcome& o : record.per_seed) {
      const std::string path = cfg.output.report_dir + "/report_" +
                               std::string(variant_name(cfg.variant)) +
                               "_seed" + std::to_string(o.seed) + ".tsv";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write report " + path);
      attack::write_report(out, o.report);
    }
  }
  return record;
}

void write_results(std::ostream& out, const ResultsRecord& record) {
  out << "# vtlab results\n";
  out << "# config_digest=" << record.config_digest << "\n";
  out << "seed\tvariant\tq_size\ts1\ts2\tasr_overall\taccuracy\t"
         "anomaly_ratio\tdetector_f1\n";
  for (const SeedOutcome& o : record.per_seed) {
    out << o.seed << '\t' << variant_name(record.variant) << '\t'
        << o.report.q_size << '\t' << fmt(o.report.s1) << '\t'
        << fmt(o.report.s2) << '\t' << fmt(o.report.overall_asr) << '\t'
        << fmt(o.main_accuracy) << '\t' << fmt(o.report.anomaly_ratio) << '\t'
        << fmt(o.detector_f1) << '\n';
  }
  const Aggregates& a = record.aggregates;
  out << "AGGREGATE\t" << variant_name(record.variant) << "\t-\t"
      << fmt(a.s1.mean) << '\t' << fmt(a.s2.mean) << '\t'
      << fmt(a.overall_asr.mean) << '\t' << fmt(a.accuracy.mean) << '\t'
      << fmt(a.anomaly_ratio.mean) << '\t' << fmt(a.f1.mean) << '\n';
  out << "AGGREGATE_STDEV\t" << variant_name(record.variant) << "\t-\t"
      << fmt(a.s1.stdev) << '\t' << fmt(a.s2.stdev) << '\t'
      << fmt(a.overall_asr.stdev) << '\t' << fmt(a.accuracy.stdev) << '\t'
      << fmt(a.anomaly_ratio.stdev) << '\t' << fmt(a.f1.stdev) << '\n';
}

std::string results_to_string(const ResultsRecord& record) {
  std::ostringstream out;
  write_results(out, record);
  return out.str();
}

std::string inspect_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results " + path);
  std::ostringstream pretty;
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      pretty << line << '\n';
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) return pretty.str();
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      pretty << row[i];
      if (i + 1 < row.size())
        pretty << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    pretty << '\n';
  }
  return pretty.str();
}

}  // namespace vtlab::harness
