#include "vtlab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vtlab/kernels.hpp"
#include "vtlab/rng.hpp"
#include "vtlab/wire.hpp"

namespace vtlab::detect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_query(std::span<const double> x, std::size_t dim,
                 const char* who) {
  if (x.size() != dim)
    throw std::invalid_argument(std::string(who) + ": query dim " +
                                std::to_string(x.size()) + " != " +
                                std::to_string(dim));
  for (double v : x)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(who) + ": non-finite query");
}

}  // namespace

double KdeDetector::density(std::span<const double> x) const {
  check_query(x, observations.cols, "kde");
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  double sum = 0.0;
  for (std::size_t i = 0; i < observations.rows; ++i)
    sum += std::exp(-kern::sqdist(observations.row_span(i), x) * inv_h2);
  return sum / (static_cast<double>(observations.rows) * bandwidth);
}

double KdeDetector::score(std::span<const double> x) const {
  return -density(x);
}

std::vector<double> KdeDetector::score_grad(std::span<const double> x) const {
  check_query(x, observations.cols, "kde");
  // score = -(1/(n h)) sum_i exp(-|x-x_i|^2 / h^2)
  // d/dx  =  (2/(n h^3)) sum_i exp(-|x-x_i|^2 / h^2) (x - x_i)
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  const double scale =
      2.0 / (static_cast<double>(observations.rows) * bandwidth * bandwidth *
             bandwidth);
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < observations.rows; ++i) {
    const double* obs = observations.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) diff[j] = x[j] - obs[j];
    const double w = std::exp(-kern::sqdist(observations.row_span(i), x) *
                              inv_h2);
    kern::axpy(scale * w, diff, grad);
  }
  return grad;
}

double median_heuristic_bandwidth(const Matrix& points) {
  if (points.rows < 2) return 1.0;
  std::vector<double> dists;
  dists.reserve(points.rows * (points.rows - 1) / 2);
  for (std::size_t i = 0; i < points.rows; ++i)
    for (std::size_t j = i + 1; j < points.rows; ++j)
      dists.push_back(
          std::sqrt(kern::sqdist(points.row_span(i), points.row_span(j))));
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  const double med = dists[dists.size() / 2];
  return med > 0.0 ? med : 1.0;
}

KdeDetector fit_kde(const Matrix& observations,
                    std::optional<double> bandwidth) {
  if (observations.rows == 0)
    throw std::invalid_argument("fit_kde: no observations");
  KdeDetector det;
  det.observations = observations;
  det.bandwidth = bandwidth.value_or(median_heuristic_bandwidth(observations));
  if (det.bandwidth <= 0.0)
    throw std::invalid_argument("fit_kde: bandwidth must be positive");
  return det;
}

namespace {

nn::Mlp make_encoder(std::size_t dim, const DeepAeConfig& cfg,
                     std::uint64_t seed) {
  return nn::make_mlp({dim, cfg.hidden, cfg.bottleneck}, seed);
}

nn::Mlp make_decoder(std::size_t dim, const DeepAeConfig& cfg,
                     std::uint64_t seed) {
  return nn::make_mlp({cfg.bottleneck, cfg.hidden, dim}, seed);
}

}  // namespace

std::vector<double> DeepAeDetector::reconstruct(
    std::span<const double> x) const {
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data.begin());
  const Matrix latent = nn::forward(encoder, in);
  const Matrix rec = nn::forward(decoder, latent);
  return rec.data;
}

double DeepAeDetector::score(std::span<const double> x) const {
  check_query(x, encoder.input_dim(), "deepae");
  const std::vector<double> rec = reconstruct(x);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - rec[j];
    s += d * d;
  }
  return s;
}

std::vector<double> DeepAeDetector::score_grad(
    std::span<const double> x) const {
  check_query(x, encoder.input_dim(), "deepae");
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data.begin());
  nn::ForwardTrace enc_trace, dec_trace;
  const Matrix latent = nn::forward(encoder, in, &enc_trace);
  const Matrix rec = nn::forward(decoder, latent, &dec_trace);
  // score = |x - AE(x)|^2, r = x - AE(x):
  //   d/dx = 2 r - J_AE^T (2 r)
  Matrix drec(1, x.size());
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double r = x[j] - rec.at(0, j);
    grad[j] = 2.0 * r;
    drec.at(0, j) = -2.0 * r;
  }
  const auto dec_back = nn::backward(decoder, dec_trace, drec);
  const auto enc_back = nn::backward(encoder, enc_trace, dec_back.input_grad);
  for (std::size_t j = 0; j < x.size(); ++j)
    grad[j] += enc_back.input_grad.at(0, j);
  return grad;
}

DeepAeDetector fit_deepae(const Matrix& observations, const DeepAeConfig& cfg) {
  if (observations.rows == 0)
    throw std::invalid_argument("fit_deepae: no observations");
  const std::size_t dim = observations.cols;
  DeepAeDetector det;
  Rng seeder(cfg.seed);
  det.encoder = make_encoder(dim, cfg, seeder.fork_seed());
  det.decoder = make_decoder(dim, cfg, seeder.fork_seed());
  det.epochs = cfg.epochs;
  det.lr = cfg.lr;
  det.seed = cfg.seed;

  Rng order_rng(seeder.fork_seed());
  std::vector<std::size_t> order(observations.rows);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      Matrix batch(stop - start, dim);
      for (std::size_t i = start; i < stop; ++i)
        std::copy(observations.row(order[i]), observations.row(order[i]) + dim,
                  batch.row(i - start));
      nn::ForwardTrace enc_trace, dec_trace;
      const Matrix latent = nn::forward(det.encoder, batch, &enc_trace);
      const Matrix rec = nn::forward(det.decoder, latent, &dec_trace);
      Matrix drec;
      nn::mse_loss_batch(batch, rec, &drec);
      const auto dec_back = nn::backward(det.decoder, dec_trace, drec);
      const auto enc_back =
          nn::backward(det.encoder, enc_trace, dec_back.input_grad);
      nn::sgd_update(det.decoder, dec_back.grads, cfg.lr);
      nn::sgd_update(det.encoder, enc_back.grads, cfg.lr);
    }
  }
  return det;
}

LabelAwareDetector LabelAwareDetector::fit(const Matrix& embeddings,
                                           std::span<const int> labels,
                                           int num_classes,
                                           const FitConfig& cfg) {
  if (embeddings.rows != labels.size())
    throw std::invalid_argument("fit_label_aware: label count mismatch");
  if (num_classes < 1)
    throw std::invalid_argument("fit_label_aware: num_classes < 1");
  LabelAwareDetector det;
  det.kind_ = cfg.kind;
  det.num_classes_ = num_classes;
  det.kde_.resize(num_classes);
  det.ae_.resize(num_classes);
  det.thresholds_.assign(num_classes, kInf);
  Rng seeder(cfg.ae.seed);
  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) rows.push_back(i);
    const std::uint64_t sub_seed = seeder.fork_seed();
    if (rows.empty()) continue;  // empty class: fail-closed at scoring
    Matrix obs(rows.size(), embeddings.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(embeddings.row(rows[i]), embeddings.row(rows[i]) + obs.cols,
                obs.row(i));
    if (cfg.kind == DetectorKind::kde) {
      det.kde_[c] = fit_kde(obs, cfg.kde_bandwidth);
    } else {
      DeepAeConfig sub_cfg = cfg.ae;
      sub_cfg.seed = sub_seed;
      det.ae_[c] = fit_deepae(obs, sub_cfg);
    }
  }
  return det;
}

LabelAwareDetector LabelAwareDetector::untrained(std::size_t dim,
                                                 const DeepAeConfig& ae) {
  LabelAwareDetector det;
  det.kind_ = DetectorKind::deepae;
  det.num_classes_ = 0;
  DeepAeConfig cfg = ae;
  cfg.epochs = 0;
  Matrix dummy(1, dim);
  det.untrained_ae_ = fit_deepae(dummy, cfg);
  det.calibrated_ = true;  // thresholds are +inf: nothing is ever flagged
  return det;
}

bool LabelAwareDetector::has_subdetector(int label) const {
  if (label < 0 || label >= num_classes_) return false;
  return kind_ == DetectorKind::kde ? kde_[label].has_value()
                                    : ae_[label].has_value();
}

std::size_t LabelAwareDetector::observations_of(int label) const {
  if (!has_subdetector(label)) return 0;
  return kind_ == DetectorKind::kde ? kde_[label]->observations.rows
                                    : std::size_t(0);
}

double LabelAwareDetector::score(std::span<const double> x, int label) const {
  if (untrained_ae_) return untrained_ae_->score(x);
  if (label < 0 || label >= num_classes_)
    throw std::invalid_argument("detector: label out of range");
  if (!has_subdetector(label)) return kInf;
  return kind_ == DetectorKind::kde ? kde_[label]->score(x)
                                    : ae_[label]->score(x);
}

std::vector<double> LabelAwareDetector::score_grad(std::span<const double> x,
                                                   int label) const {
  if (untrained_ae_) return untrained_ae_->score_grad(x);
  if (label < 0 || label >= num_classes_)
    throw std::invalid_argument("detector: label out of range");
  if (!has_subdetector(label)) return std::vector<double>(x.size(), 0.0);
  return kind_ == DetectorKind::kde ? kde_[label]->score_grad(x)
                                    : ae_[label]->score_grad(x);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (p <= 0.0 || p >= 100.0)
    throw std::invalid_argument("percentile: p must be in (0, 100)");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

void LabelAwareDetector::calibrate(const Matrix& embeddings,
                                   std::span<const int> labels,
                                   double percentile_p, bool global_tau) {
  if (embeddings.rows != labels.size())
    throw std::invalid_argument("calibrate: label count mismatch");
  std::vector<std::vector<double>> per_class(num_classes_);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes_)
      throw std::invalid_argument("calibrate: label out of range");
    if (!has_subdetector(c)) continue;
    per_class[c].push_back(score(embeddings.row_span(i), c));
  }
  if (global_tau) {
    std::vector<double> all;
    for (const auto& v : per_class) all.insert(all.end(), v.begin(), v.end());
    const double tau = percentile(all, percentile_p);
    thresholds_.assign(num_classes_, tau);
  } else {
    thresholds_.assign(num_classes_, kInf);
    for (int c = 0; c < num_classes_; ++c) {
      if (!has_subdetector(c)) continue;
      if (per_class[c].empty())
        throw std::invalid_argument("calibrate: class " + std::to_string(c) +
                                    " has no calibration points");
      thresholds_[c] = percentile(per_class[c], percentile_p);
    }
  }
  calibrated_ = true;
}

void LabelAwareDetector::set_thresholds(std::vector<double> taus) {
  if (static_cast<int>(taus.size()) != num_classes_)
    throw std::invalid_argument("set_thresholds: size mismatch");
  thresholds_ = std::move(taus);
  calibrated_ = true;
}

void LabelAwareDetector::set_uniform_threshold(double tau) {
  thresholds_.assign(std::max(num_classes_, 1), tau);
  calibrated_ = true;
}

double LabelAwareDetector::threshold(int label) const {
  if (!calibrated_) throw std::logic_error("detector not calibrated");
  if (untrained_ae_) return kInf;
  if (label < 0 || label >= num_classes_)
    throw std::invalid_argument("threshold: label out of range");
  return thresholds_[label];
}

Verdict LabelAwareDetector::detect(std::span<const double> x,
                                   int label) const {
  if (!calibrated_) throw std::logic_error("detector not calibrated");
  if (untrained_ae_) return Verdict::normal;
  const double s = score(x, label);
  return s > thresholds_[label] ? Verdict::anomalous : Verdict::normal;
}

namespace {
constexpr char kKdeMagic[4] = {'V', 'T', 'K', 'D'};
constexpr std::uint16_t kKdeVersion = 1;
}  // namespace

void save_kde(std::ostream& out, const KdeDetector& det) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kKdeMagic, kKdeMagic + 4);
  wire::put_u16(buf, kKdeVersion);
  wire::put_u32(buf, static_cast<std::uint32_t>(det.observations.rows));
  wire::put_u32(buf, static_cast<std::uint32_t>(det.observations.cols));
  wire::put_f64(buf, det.bandwidth);
  for (double v : det.observations.data) wire::put_f64(buf, v);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("kde checkpoint write failed");
}

KdeDetector load_kde(std::istream& in) {
  std::uint8_t hdr[22];
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (static_cast<std::size_t>(in.gcount()) != sizeof hdr)
    throw std::runtime_error("kde checkpoint truncated");
  if (std::memcmp(hdr, kKdeMagic, 4) != 0)
    throw std::runtime_error("kde checkpoint: bad magic");
  if (wire::get_u16(hdr + 4) != kKdeVersion)
    throw std::runtime_error("kde checkpoint: unsupported version");
  const std::uint32_t rows = wire::get_u32(hdr + 6);
  const std::uint32_t cols = wire::get_u32(hdr + 10);
  KdeDetector det;
  det.bandwidth = wire::get_f64(hdr + 14);
  det.observations = Matrix(rows, cols);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(rows) * cols * 8);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::runtime_error("kde checkpoint truncated");
  const std::uint8_t* p = raw.data();
  for (double& v : det.observations.data) {
    v = wire::get_f64(p);
    p += 8;
  }
  return det;
}

void save_deepae(std::ostream& out, const DeepAeDetector& det) {
  nn::save_mlp(out, det.encoder);
  nn::save_mlp(out, det.decoder);
}

DeepAeDetector load_deepae(std::istream& in) {
  DeepAeDetector det;
  det.encoder = nn::load_mlp(in);
  det.decoder = nn::load_mlp(in);
  if (det.encoder.output_dim() != det.decoder.input_dim() ||
      det.decoder.output_dim() != det.encoder.input_dim())
    throw std::runtime_error("deepae checkpoint: encoder/decoder mismatch");
  return det;
}

}  // namespace vtlab::detect
