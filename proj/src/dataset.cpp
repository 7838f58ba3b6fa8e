#include "vtlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vtlab/rng.hpp"

namespace vtlab::data {

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

std::vector<Bounds> compute_bounds(const Matrix& features) {
  std::vector<Bounds> b(features.cols);
  for (std::size_t j = 0; j < features.cols; ++j) {
    double lo = features.at(0, j), hi = lo;
    for (std::size_t i = 1; i < features.rows; ++i) {
      lo = std::min(lo, features.at(i, j));
      hi = std::max(hi, features.at(i, j));
    }
    b[j] = {lo, hi};
  }
  return b;
}

}  // namespace

Dataset parse_tabular(const std::string& text, const TabularSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !schema.has_header;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, schema.delimiter)) cells.push_back(cell);
    if (ncols == 0) {
      ncols = cells.size();
      if (schema.label_column >= ncols)
        parse_error(line_no, "label column out of range");
    } else if (cells.size() != ncols) {
      parse_error(line_no, "ragged row: expected " + std::to_string(ncols) +
                               " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> feat;
    feat.reserve(ncols - 1);
    int label = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        parse_error(line_no, "non-numeric cell '" + cells[j] + "'");
      }
      if (used != cells[j].size())
        parse_error(line_no, "non-numeric cell '" + cells[j] + "'");
      if (j == schema.label_column) {
        const double r = std::round(v);
        if (!std::isfinite(v) || std::abs(v - r) > 1e-9 || r < 0)
          parse_error(line_no, "unknown label value '" + cells[j] + "'");
        label = static_cast<int>(r);
      } else {
        if (!std::isfinite(v))
          parse_error(line_no, "non-finite feature cell '" + cells[j] + "'");
        feat.push_back(v);
      }
    }
    rows.push_back(std::move(feat));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("no rows");
  Dataset ds;
  ds.features = Matrix::from_rows(rows);
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.bounds = compute_bounds(ds.features);
  return ds;
}

Dataset load_tabular(const std::string& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_tabular(buf.str(), schema);
}

Dataset generate_synthetic(const BlobSpec& spec, std::uint64_t seed) {
  const std::size_t c = spec.centers.size();
  if (c < 2) throw std::invalid_argument("generate_synthetic: need >= 2 classes");
  if (spec.stdev.size() != c || spec.count.size() != c)
    throw std::invalid_argument("generate_synthetic: per-class arrays mismatch");
  const std::size_t d = spec.centers.front().size();
  std::size_t n = 0;
  for (std::size_t k = 0; k < c; ++k) {
    if (spec.centers[k].size() != d)
      throw std::invalid_argument("generate_synthetic: ragged centers");
    if (spec.count[k] == 0)
      throw std::invalid_argument("generate_synthetic: zero count class");
    n += spec.count[k];
  }
  Dataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.num_classes = static_cast<int>(c);
  Rng rng(seed);
  std::size_t row = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < spec.count[k]; ++i, ++row) {
      ds.labels[row] = static_cast<int>(k);
      for (std::size_t j = 0; j < d; ++j)
        ds.features.at(row, j) = rng.normal(spec.centers[k][j], spec.stdev[k]);
    }
  }
  ds.bounds = compute_bounds(ds.features);
  return ds;
}

std::vector<PartyView> vertical_split(const Dataset& dataset,
                                      const std::vector<double>& fractions,
                                      std::uint64_t seed, SplitMode mode) {
  const std::size_t d = dataset.dim();
  const std::size_t k = fractions.size();
  if (k == 0) throw std::invalid_argument("vertical_split: no parties");
  if (k > d) throw std::invalid_argument("vertical_split: more parties than features");
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("vertical_split: non-positive fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("vertical_split: fractions must sum to 1");

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  if (mode == SplitMode::random) {
    Rng rng(seed);
    shuffle(order, rng);
  }

  std::vector<PartyView> views(k);
  std::size_t consumed = 0;
  for (std::size_t p = 0; p < k; ++p) {
    std::size_t take =
        p + 1 == k
            ? d - consumed  // last party absorbs the rounding remainder
            : static_cast<std::size_t>(
                  std::llround(fractions[p] * static_cast<double>(d)));
    take = std::min(take, d - consumed);
    if (p + 1 < k) {
      // keep at least one column for each remaining party
      const std::size_t remaining_parties = k - p - 1;
      take = std::max<std::size_t>(take, 1);
      take = std::min(take, d - consumed - remaining_parties);
    }
    views[p].party_id = static_cast<int>(p);
    views[p].columns.assign(order.begin() + static_cast<std::ptrdiff_t>(consumed),
                            order.begin() +
                                static_cast<std::ptrdiff_t>(consumed + take));
    std::sort(views[p].columns.begin(), views[p].columns.end());
    consumed += take;
  }

  for (PartyView& v : views) {
    v.features = Matrix(dataset.size(), v.columns.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      for (std::size_t j = 0; j < v.columns.size(); ++j)
        v.features.at(i, j) = dataset.features.at(i, v.columns[j]);
  }
  return views;
}

Matrix reassemble(const std::vector<PartyView>& views, std::size_t dim) {
  if (views.empty()) return {};
  Matrix out(views.front().features.rows, dim);
  for (const PartyView& v : views)
    for (std::size_t i = 0; i < v.features.rows; ++i)
      for (std::size_t j = 0; j < v.columns.size(); ++j)
        out.at(i, v.columns[j]) = v.features.at(i, j);
  return out;
}

std::vector<Bounds> view_bounds(const Dataset& dataset,
                                const PartyView& view) {
  std::vector<Bounds> b;
  b.reserve(view.columns.size());
  for (std::size_t col : view.columns) b.push_back(dataset.bounds[col]);
  return b;
}

}  // namespace vtlab::data
