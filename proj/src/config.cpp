#include "vtlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vtlab::harness {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::vtarbel:
      return "vtarbel";
    case Variant::only_preparation:
      return "only_preparation";
    case Variant::only_attack:
      return "only_attack";
    case Variant::random_prep_with_clustering:
      return "random_prep_with_clustering";
    case Variant::random_prep_without_clustering:
      return "random_prep_without_clustering";
    case Variant::random_attack:
      return "random_attack";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v :
       {Variant::vtarbel, Variant::only_preparation, Variant::only_attack,
        Variant::random_prep_with_clustering,
        Variant::random_prep_without_clustering, Variant::random_attack})
    if (name == variant_name(v)) return v;
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::runtime_error("config: bad value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) bad_value(key, v);
    return i;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
  std::vector<T> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(conv(key, trim(item)));
  if (out.empty()) bad_value(key, v);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool saw_dataset = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "dataset.kind") {
      saw_dataset = true;
      if (value == "synthetic")
        cfg.dataset.kind = DatasetConfig::Kind::synthetic;
      else if (value == "tabular")
        cfg.dataset.kind = DatasetConfig::Kind::tabular;
      else
        bad_value(key, value);
    } else if (key == "dataset.classes") {
      cfg.dataset.classes = static_cast<int>(to_int(key, value));
    } else if (key == "dataset.dim") {
      cfg.dataset.dim = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "dataset.train_per_class") {
      cfg.dataset.train_per_class = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "dataset.test_per_class") {
      cfg.dataset.test_per_class = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "dataset.stdev") {
      cfg.dataset.stdev = to_double(key, value);
    } else if (key == "dataset.grid_spacing") {
      cfg.dataset.grid_spacing = to_double(key, value);
    } else if (key.rfind("dataset.center.", 0) == 0) {
      const std::size_t idx =
          static_cast<std::size_t>(to_int(key, key.substr(15)));
      if (cfg.dataset.centers.size() <= idx) cfg.dataset.centers.resize(idx + 1);
      cfg.dataset.centers[idx] = to_list<double>(key, value, to_double);
    } else if (key == "dataset.path") {
      saw_dataset = true;
      cfg.dataset.path = value;
    } else if (key == "dataset.delimiter") {
      if (value.size() != 1) bad_value(key, value);
      cfg.dataset.delimiter = value[0];
    } else if (key == "dataset.label_column") {
      cfg.dataset.label_column = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "dataset.header") {
      cfg.dataset.has_header = to_bool(key, value);
    } else if (key == "dataset.train_fraction") {
      cfg.dataset.train_fraction = to_double(key, value);
    } else if (key == "split.fractions") {
      cfg.split_fractions = to_list<double>(key, value, to_double);
    } else if (key == "split.mode") {
      if (value == "contiguous")
        cfg.split_mode = data::SplitMode::contiguous;
      else if (value == "random")
        cfg.split_mode = data::SplitMode::random;
      else
        bad_value(key, value);
    } else if (key == "model.bottom_hidden") {
      cfg.model.bottom_hidden = to_list<std::size_t>(
          key, value, [](const std::string& k, const std::string& v) {
            return static_cast<std::size_t>(to_int(k, v));
          });
    } else if (key == "model.top_hidden") {
      cfg.model.top_hidden = to_list<std::size_t>(
          key, value, [](const std::string& k, const std::string& v) {
            return static_cast<std::size_t>(to_int(k, v));
          });
    } else if (key == "model.embedding_dim") {
      cfg.model.embedding_dim = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "model.aggregation") {
      if (value == "sum")
        cfg.model.aggregation = vfl::Aggregation::sum;
      else if (value == "concat")
        cfg.model.aggregation = vfl::Aggregation::concat;
      else
        bad_value(key, value);
    } else if (key == "train.epochs") {
      cfg.train.epochs = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "train.lr") {
      cfg.train.lr = to_double(key, value);
    } else if (key == "train.batch_size") {
      cfg.train.batch_size = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "detector.kind") {
      if (value == "kde")
        cfg.detector.kind = detect::DetectorKind::kde;
      else if (value == "deepae")
        cfg.detector.kind = detect::DetectorKind::deepae;
      else
        bad_value(key, value);
    } else if (key == "detector.percentile") {
      cfg.detector.percentile = to_double(key, value);
    } else if (key == "detector.global_tau") {
      cfg.detector.global_tau = to_bool(key, value);
    } else if (key == "detector.kde_bandwidth") {
      cfg.detector.kde_bandwidth = to_double(key, value);
    } else if (key == "detector.ae_hidden") {
      cfg.detector.ae_hidden = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "detector.ae_bottleneck") {
      cfg.detector.ae_bottleneck = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "detector.ae_epochs") {
      cfg.detector.ae_epochs = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "detector.ae_batch") {
      cfg.detector.ae_batch = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "detector.ae_lr") {
      cfg.detector.ae_lr = to_double(key, value);
    } else if (key == "detector.monitor") {
      if (value == "party")
        cfg.detector.monitor = vfl::MonitorMode::monitored_party;
      else if (value == "aggregate")
        cfg.detector.monitor = vfl::MonitorMode::aggregated;
      else
        bad_value(key, value);
    } else if (key == "attack.party") {
      cfg.attack.party = static_cast<int>(to_int(key, value));
    } else if (key == "attack.targeted_label") {
      cfg.attack.targeted_label = static_cast<int>(to_int(key, value));
    } else if (key == "attack.lambda") {
      cfg.attack.lambda = to_double(key, value);
    } else if (key == "attack.t_opt") {
      cfg.attack.t_opt = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.alpha") {
      cfg.attack.alpha = to_double(key, value);
    } else if (key == "attack.beta") {
      cfg.attack.beta = to_double(key, value);
    } else if (key == "attack.eta") {
      cfg.attack.eta = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.epsilon") {
      cfg.attack.epsilon = to_double(key, value);
    } else if (key == "attack.max_rounds") {
      cfg.attack.max_rounds = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.t_ft") {
      cfg.attack.t_ft = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.ft_lr") {
      cfg.attack.ft_lr = to_double(key, value);
    } else if (key == "attack.est_kind") {
      if (value == "kde")
        cfg.attack.est_kind = detect::DetectorKind::kde;
      else if (value == "deepae")
        cfg.attack.est_kind = detect::DetectorKind::deepae;
      else
        bad_value(key, value);
    } else if (key == "attack.est_percentile") {
      cfg.attack.est_percentile = to_double(key, value);
    } else if (key == "attack.est_ae_hidden") {
      cfg.attack.est_ae_hidden = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.est_ae_bottleneck") {
      cfg.attack.est_ae_bottleneck =
          static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.est_ae_epochs") {
      cfg.attack.est_ae_epochs = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.est_ae_lr") {
      cfg.attack.est_ae_lr = to_double(key, value);
    } else if (key == "attack.cluster_space") {
      if (value == "embedding")
        cfg.attack.cluster_on_embeddings = true;
      else if (value == "raw")
        cfg.attack.cluster_on_embeddings = false;
      else
        bad_value(key, value);
    } else if (key == "attack.cluster_max_iter") {
      cfg.attack.cluster_max_iter = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "attack.selection") {
      if (value == "sequential")
        cfg.attack.sequential_selection = true;
      else if (value == "batch")
        cfg.attack.sequential_selection = false;
      else
        bad_value(key, value);
    } else if (key == "attack.random_prep_size") {
      cfg.attack.random_prep_size = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "defense.kind") {
      if (value == "none")
        cfg.defense.kind = defense::Kind::none;
      else if (value == "noisy")
        cfg.defense.kind = defense::Kind::noisy;
      else if (value == "discrete")
        cfg.defense.kind = defense::Kind::discrete;
      else if (value == "compressed")
        cfg.defense.kind = defense::Kind::compressed;
      else
        bad_value(key, value);
    } else if (key == "defense.sigma") {
      cfg.defense.sigma = to_double(key, value);
    } else if (key == "defense.bins") {
      cfg.defense.bins = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "defense.preserved_ratio") {
      cfg.defense.preserved_ratio = to_double(key, value);
    } else if (key == "defense.calibration") {
      if (value == "per_dim")
        cfg.defense.per_dimension_calibration = true;
      else if (value == "global")
        cfg.defense.per_dimension_calibration = false;
      else
        bad_value(key, value);
    } else if (key == "transport.kind") {
      if (value == "inproc")
        cfg.transport.kind = TransportKind::inproc;
      else if (value == "tcp")
        cfg.transport.kind = TransportKind::tcp;
      else
        bad_value(key, value);
    } else if (key == "transport.host") {
      cfg.transport.host = value;
    } else if (key == "transport.port") {
      cfg.transport.port = static_cast<std::uint16_t>(to_int(key, value));
    } else if (key == "output.path") {
      cfg.output.path = value;
    } else if (key == "output.report_dir") {
      cfg.output.report_dir = value;
    } else if (key == "variant") {
      const auto v = variant_from_name(value);
      if (!v) bad_value(key, value);
      cfg.variant = *v;
    } else if (key == "seeds") {
      cfg.seeds = to_list<std::uint64_t>(
          key, value, [](const std::string& k, const std::string& v) {
            return static_cast<std::uint64_t>(to_int(k, v));
          });
    } else {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    }
  }
  if (!saw_dataset)
    throw std::runtime_error("config: dataset.kind or dataset.path required");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::runtime_error("config: seeds list is empty");
  if (split_fractions.empty())
    throw std::runtime_error("config: split.fractions is empty");
  if (attack.party < 0 ||
      static_cast<std::size_t>(attack.party) >= split_fractions.size())
    throw std::runtime_error("config: attack.party out of range");
  if (dataset.kind == DatasetConfig::Kind::synthetic) {
    if (dataset.classes < 2)
      throw std::runtime_error("config: synthetic dataset needs >= 2 classes");
    if (attack.targeted_label < 0 ||
        attack.targeted_label >= dataset.classes)
      throw std::runtime_error("config: targeted label out of range");
  } else if (dataset.path.empty()) {
    throw std::runtime_error("config: tabular dataset needs dataset.path");
  }
  if (detector.percentile <= 0.0 || detector.percentile >= 100.0)
    throw std::runtime_error("config: detector.percentile must be in (0,100)");
  if (attack.beta <= 0.0 || attack.beta > 1.0)
    throw std::runtime_error("config: attack.beta must be in (0,1]");
  if (attack.eta == 0) throw std::runtime_error("config: attack.eta must be >= 1");
  if (defense.kind == defense::Kind::compressed &&
      (defense.preserved_ratio <= 0.0 || defense.preserved_ratio > 1.0))
    throw std::runtime_error("config: defense.preserved_ratio in (0,1]");
  if (defense.kind == defense::Kind::discrete && defense.bins == 0)
    throw std::runtime_error("config: defense.bins must be >= 1");
}

namespace {

class Fnv1a {
 public:
  void feed(const std::string& s) {
    for (unsigned char c : s) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i)
      out[15 - i] = digits[(hash_ >> (4 * i)) & 0xF];
    return out;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string ExperimentConfig::digest() const {
  Fnv1a h;
  std::ostringstream s;
  s << static_cast<int>(dataset.kind) << '|' << dataset.classes << '|'
    << dataset.dim << '|' << dataset.train_per_class << '|'
    << dataset.test_per_class << '|' << dataset.stdev << '|'
    << dataset.grid_spacing << '|' << dataset.path << '|'
    << dataset.delimiter << '|' << dataset.label_column << '|'
    << dataset.has_header << '|' << dataset.train_fraction << '|';
  for (const auto& c : dataset.centers) {
    for (double v : c) s << v << ',';
    s << ';';
  }
  for (double f : split_fractions) s << f << ',';
  s << '|' << static_cast<int>(split_mode) << '|';
  for (std::size_t v : model.bottom_hidden) s << v << ',';
  s << '|' << model.embedding_dim << '|';
  for (std::size_t v : model.top_hidden) s << v << ',';
  s << '|' << static_cast<int>(model.aggregation) << '|' << train.epochs << '|'
    << train.lr << '|' << train.batch_size << '|'
    << static_cast<int>(detector.kind) << '|' << detector.percentile << '|'
    << detector.global_tau << '|' << detector.kde_bandwidth << '|'
    << detector.ae_hidden << '|' << detector.ae_bottleneck << '|'
    << detector.ae_epochs << '|' << detector.ae_batch << '|' << detector.ae_lr
    << '|' << static_cast<int>(detector.monitor) << '|' << attack.party << '|'
    << attack.targeted_label << '|' << attack.lambda << '|' << attack.t_opt
    << '|' << attack.alpha << '|' << attack.beta << '|' << attack.eta << '|'
    << attack.epsilon << '|' << attack.max_rounds << '|' << attack.t_ft << '|'
    << attack.ft_lr << '|' << static_cast<int>(attack.est_kind) << '|'
    << attack.est_percentile << '|' << attack.est_ae_hidden << '|'
    << attack.est_ae_bottleneck << '|' << attack.est_ae_epochs << '|'
    << attack.est_ae_lr << '|' << attack.cluster_on_embeddings << '|'
    << attack.cluster_max_iter << '|' << attack.sequential_selection << '|'
    << attack.random_prep_size << '|' << static_cast<int>(defense.kind) << '|'
    << defense.sigma << '|' << defense.bins << '|' << defense.preserved_ratio
    << '|' << defense.per_dimension_calibration << '|'
    << variant_name(variant) << '|';
  for (std::uint64_t v : seeds) s << v << ',';
  h.feed(s.str());
  return h.hex();
}

}  // namespace vtlab::harness
