#include <doctest.h>

#include <cmath>

#include "vtlab/dataset.hpp"
#include "vtlab/rng.hpp"

using namespace vtlab;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("parse_tabular: three rows, label last") {
  const data::TabularSchema schema{',', 2, false};
  const data::Dataset ds = data::parse_tabular("1,2,0\n3,4,1\n5,6,0\n", schema);
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.features.at(1, 0) == 3.0);
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.bounds[0].lo == 1.0);
  CHECK(ds.bounds[0].hi == 5.0);
}

TEST_CASE("parse_tabular: empty file") {
  CHECK_THROWS_WITH(data::parse_tabular("", {',', 0, false}),
                    doctest::Contains("no rows"));
}

TEST_CASE("parse_tabular: header flag skips first line") {
  const data::TabularSchema with_header{',', 1, true};
  const data::Dataset ds =
      data::parse_tabular("f,label\n1,0\n2,1\n", with_header);
  CHECK(ds.size() == 2);
}

TEST_CASE("parse_tabular errors carry the line number") {
  SUBCASE("ragged row") {
    CHECK_THROWS_WITH(data::parse_tabular("1,2,0\n3,4\n", {',', 2, false}),
                      doctest::Contains("line 2"));
  }
  SUBCASE("non-numeric feature") {
    CHECK_THROWS_WITH(data::parse_tabular("1,2,0\nx,4,1\n", {',', 2, false}),
                      doctest::Contains("line 2"));
  }
  SUBCASE("bad label") {
    CHECK_THROWS_WITH(data::parse_tabular("1,2,0.5\n", {',', 2, false}),
                      doctest::Contains("label"));
  }
}

TEST_CASE("generate_synthetic") {
  SUBCASE("zero stdev puts samples exactly on the centers") {
    data::BlobSpec spec;
    spec.centers = {{-5.0}, {5.0}};
    spec.stdev = {0.0, 0.0};
    spec.count = {3, 3};
    const data::Dataset ds = data::generate_synthetic(spec, 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(ds.features.at(i, 0) == (ds.labels[i] == 0 ? -5.0 : 5.0));
  }
  SUBCASE("same seed reproduces the dataset") {
    data::BlobSpec spec;
    spec.centers = {{0.0, 0.0}, {4.0, 4.0}};
    spec.stdev = {1.0, 1.0};
    spec.count = {50, 50};
    const data::Dataset a = data::generate_synthetic(spec, 9);
    const data::Dataset b = data::generate_synthetic(spec, 9);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels == b.labels);
  }
  SUBCASE("midpoint threshold separates distant blobs") {
    data::BlobSpec spec;
    spec.centers = {{0.0}, {10.0}};
    spec.stdev = {1.0, 1.0};
    spec.count = {1000, 1000};
    const data::Dataset ds = data::generate_synthetic(spec, 4);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int predicted = ds.features.at(i, 0) > 5.0 ? 1 : 0;
      if (predicted == ds.labels[i]) ++correct;
    }
    CHECK(static_cast<double>(correct) / 2000.0 > 0.99);
  }
  SUBCASE("degenerate spec rejected") {
    data::BlobSpec spec;
    spec.centers = {{0.0}};
    spec.stdev = {1.0};
    spec.count = {5};
    CHECK_THROWS(data::generate_synthetic(spec, 1));
  }
}

namespace {

data::Dataset grid_dataset(std::size_t n, std::size_t d) {
  data::Dataset ds;
  ds.features = Matrix(n, d);
  Rng rng(17);
  for (double& v : ds.features.data) v = rng.uniform(0.0, 1.0);
  ds.labels.assign(n, 0);
  ds.labels[0] = 1;
  ds.num_classes = 2;
  ds.bounds.assign(d, {0.0, 1.0});
  return ds;
}

}  // namespace

TEST_CASE("vertical_split column allocation") {
  SUBCASE("even split of 784") {
    const data::Dataset ds = grid_dataset(3, 784);
    const auto views =
        data::vertical_split(ds, {0.5, 0.5}, 1, data::SplitMode::contiguous);
    CHECK(views[0].columns.size() == 392);
    CHECK(views[1].columns.size() == 392);
  }
  SUBCASE("single party holds everything") {
    const data::Dataset ds = grid_dataset(3, 10);
    const auto views =
        data::vertical_split(ds, {1.0}, 1, data::SplitMode::contiguous);
    CHECK(views[0].columns.size() == 10);
  }
  SUBCASE("9/1 split of 10") {
    const data::Dataset ds = grid_dataset(3, 10);
    const auto views =
        data::vertical_split(ds, {0.9, 0.1}, 1, data::SplitMode::contiguous);
    CHECK(views[0].columns.size() == 9);
    CHECK(views[1].columns.size() == 1);
  }
  SUBCASE("more parties than features rejected") {
    const data::Dataset ds = grid_dataset(3, 1);
    CHECK_THROWS(
        data::vertical_split(ds, {0.5, 0.5}, 1, data::SplitMode::contiguous));
  }
  SUBCASE("fractions must sum to one") {
    const data::Dataset ds = grid_dataset(3, 10);
    CHECK_THROWS(
        data::vertical_split(ds, {0.5, 0.4}, 1, data::SplitMode::contiguous));
  }
}

TEST_CASE("vertical_split: reassembly reproduces the parent exactly") {
  const data::Dataset ds = grid_dataset(7, 23);
  for (const data::SplitMode mode :
       {data::SplitMode::contiguous, data::SplitMode::random}) {
    const auto views = data::vertical_split(ds, {0.3, 0.45, 0.25}, 5, mode);
    // disjoint cover
    std::vector<int> seen(23, 0);
    for (const auto& v : views)
      for (std::size_t c : v.columns) ++seen[c];
    for (int s : seen) CHECK(s == 1);
    const Matrix back = data::reassemble(views, 23);
    CHECK(back.data == ds.features.data);
  }
}

TEST_CASE("vertical_split: random mode is a pure function of the seed") {
  const data::Dataset ds = grid_dataset(4, 31);
  const auto a = data::vertical_split(ds, {0.5, 0.5}, 77, data::SplitMode::random);
  const auto b = data::vertical_split(ds, {0.5, 0.5}, 77, data::SplitMode::random);
  const auto c = data::vertical_split(ds, {0.5, 0.5}, 78, data::SplitMode::random);
  CHECK(a[0].columns == b[0].columns);
  CHECK(a[0].columns != c[0].columns);
}

TEST_SUITE_END();
