#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace vtlab {

// Dense row-major matrix of doubles. Deliberately minimal: the heavy inner
// loops live in vtlab::kern, everything else is plain indexing.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::span<double> row_span(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row_span(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in) {
    if (rows_in.empty()) return {};
    Matrix m(rows_in.size(), rows_in.front().size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
      if (rows_in[i].size() != m.cols)
        throw std::invalid_argument("Matrix::from_rows: ragged input");
      for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows_in[i][j];
    }
    return m;
  }

  bool operator==(const Matrix&) const = default;
};

inline std::vector<double> to_vector(std::span<const double> s) {
  return {s.begin(), s.end()};
}

}  // namespace vtlab
