#include <doctest.h>

#include <cmath>

#include "vtlab/defenses.hpp"

using namespace vtlab;

TEST_SUITE_BEGIN("defenses");

TEST_CASE("noisy") {
  SUBCASE("sigma=0 is the identity") {
    Rng rng(1);
    const std::vector<double> e{1.0, -2.0, 3.0};
    CHECK(defense::apply_noisy(e, 0.0, rng) == e);
  }
  SUBCASE("fixed seed reproduces the output") {
    const std::vector<double> e{1.0, -2.0, 3.0};
    Rng a(42), b(42);
    CHECK(defense::apply_noisy(e, 0.5, a) == defense::apply_noisy(e, 0.5, b));
  }
  SUBCASE("empirical stdev matches sigma within 1%") {
    Rng rng(7);
    const double sigma = 0.8;
    const std::size_t n = 100000;
    std::vector<double> zeros(1, 0.0);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = defense::apply_noisy(zeros, sigma, rng)[0];
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / n;
    const double stdev = std::sqrt(sum2 / n - mean * mean);
    CHECK(stdev > sigma * 0.99);
    CHECK(stdev < sigma * 1.01);
  }
  SUBCASE("negative sigma rejected") {
    Rng rng(1);
    CHECK_THROWS(defense::apply_noisy({1.0}, -0.1, rng));
  }
}

TEST_CASE("discrete") {
  const std::vector<data::Bounds> unit{{0.0, 1.0}};
  SUBCASE("snaps to the nearer endpoint") {
    CHECK(defense::apply_discrete({0.3}, 2, unit) == std::vector<double>{0.5});
  }
  SUBCASE("endpoint values are unchanged") {
    CHECK(defense::apply_discrete({0.5}, 2, unit) == std::vector<double>{0.5});
    CHECK(defense::apply_discrete({0.0}, 2, unit) == std::vector<double>{0.0});
    CHECK(defense::apply_discrete({1.0}, 2, unit) == std::vector<double>{1.0});
  }
  SUBCASE("out-of-range values clamp first") {
    CHECK(defense::apply_discrete({2.0}, 2, unit) == std::vector<double>{1.0});
    CHECK(defense::apply_discrete({-3.0}, 2, unit) == std::vector<double>{0.0});
  }
  SUBCASE("ties snap to the lower endpoint") {
    CHECK(defense::apply_discrete({0.25}, 2, unit) == std::vector<double>{0.0});
  }
  SUBCASE("degenerate min==max maps everything to min") {
    const std::vector<data::Bounds> flat{{2.0, 2.0}};
    CHECK(defense::apply_discrete({7.0}, 4, flat) == std::vector<double>{2.0});
  }
  SUBCASE("idempotent") {
    Rng rng(3);
    const std::vector<data::Bounds> cal{{-1.0, 1.0}, {0.0, 4.0}};
    for (int t = 0; t < 50; ++t) {
      const std::vector<double> e{rng.uniform(-2, 2), rng.uniform(-1, 5)};
      const auto once = defense::apply_discrete(e, 5, cal);
      CHECK(defense::apply_discrete(once, 5, cal) == once);
    }
  }
  SUBCASE("bins=0 rejected") {
    CHECK_THROWS(defense::apply_discrete({0.5}, 0, unit));
  }
}

TEST_CASE("compressed") {
  SUBCASE("ratio=1 is the identity") {
    const std::vector<double> e{3.0, -1.0, 0.5, -4.0};
    CHECK(defense::apply_compressed(e, 1.0) == e);
  }
  SUBCASE("keeps the top magnitudes") {
    CHECK(defense::apply_compressed({3.0, -1.0, 0.5, -4.0}, 0.5) ==
          std::vector<double>{3.0, 0.0, 0.0, -4.0});
  }
  SUBCASE("all-zero input is unchanged") {
    const std::vector<double> z(4, 0.0);
    CHECK(defense::apply_compressed(z, 0.25) == z);
  }
  SUBCASE("ties keep the lower index") {
    CHECK(defense::apply_compressed({2.0, -2.0, 1.0, 2.0}, 0.5) ==
          std::vector<double>{2.0, -2.0, 0.0, 0.0});
  }
  SUBCASE("nonzero count bounded by ceil(ratio*dim)") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
      std::vector<double> e(7);
      for (double& v : e) v = rng.uniform(-1, 1);
      const double ratio = 0.1 + 0.8 * rng.uniform();
      const auto out = defense::apply_compressed(e, ratio);
      std::size_t nz = 0;
      for (double v : out)
        if (v != 0.0) ++nz;
      CHECK(nz <= static_cast<std::size_t>(std::ceil(ratio * 7)));
      CHECK(out.size() == e.size());
    }
  }
  SUBCASE("ratio out of range rejected") {
    CHECK_THROWS(defense::apply_compressed({1.0}, 0.0));
    CHECK_THROWS(defense::apply_compressed({1.0}, 1.5));
  }
}

TEST_CASE("all defenses preserve dimension") {
  Rng rng(6);
  std::vector<double> e(9);
  for (double& v : e) v = rng.uniform(-2, 2);
  const std::vector<data::Bounds> cal(9, data::Bounds{-2.0, 2.0});
  CHECK(defense::apply_noisy(e, 0.3, rng).size() == 9);
  CHECK(defense::apply_discrete(e, 3, cal).size() == 9);
  CHECK(defense::apply_compressed(e, 0.4).size() == 9);
}

TEST_SUITE_END();
