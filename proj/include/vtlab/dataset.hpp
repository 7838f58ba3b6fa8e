#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtlab/matrix.hpp"

namespace vtlab::data {

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct Dataset {
  Matrix features;             // [N x d]
  std::vector<int> labels;     // values in [0, C)
  int num_classes = 0;
  std::vector<Bounds> bounds;  // per-dimension valid range, data-derived

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

// One participant's vertical slice: which columns it owns plus the
// materialized feature block, rows aligned with the parent dataset.
struct PartyView {
  int party_id = 0;
  std::vector<std::size_t> columns;
  Matrix features;  // [N x |columns|]
};

struct TabularSchema {
  char delimiter = ',';
  std::size_t label_column = 0;  // index among the raw columns
  bool has_header = false;
};

// Parses delimited text. Errors carry the 1-based line number.
Dataset load_tabular(const std::string& path, const TabularSchema& schema);
Dataset parse_tabular(const std::string& text, const TabularSchema& schema);

struct BlobSpec {
  std::vector<std::vector<double>> centers;  // C rows, each of length d
  std::vector<double> stdev;                 // per class
  std::vector<std::size_t> count;            // per class
};

// Gaussian blobs around the given centers; labels follow the generating
// center. Deterministic under seed.
Dataset generate_synthetic(const BlobSpec& spec, std::uint64_t seed);

enum class SplitMode { contiguous, random };

// Partition feature columns across parties. Party k receives
// round(fraction_k * d) columns; the last party absorbs the rounding
// remainder. Column order inside a view follows the parent order.
std::vector<PartyView> vertical_split(const Dataset& dataset,
                                      const std::vector<double>& fractions,
                                      std::uint64_t seed, SplitMode mode);

// Rebuild the parent feature matrix from views (test/debug aid).
Matrix reassemble(const std::vector<PartyView>& views, std::size_t dim);

// Restrict per-dimension bounds to a view's columns.
std::vector<Bounds> view_bounds(const Dataset& dataset, const PartyView& view);

}  // namespace vtlab::data
