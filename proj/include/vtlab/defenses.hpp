#pragma once

#include <cstdint>
#include <vector>

#include "vtlab/dataset.hpp"
#include "vtlab/rng.hpp"

namespace vtlab::defense {

enum class Kind { none, noisy, discrete, compressed };

struct DefenseSpec {
  Kind kind = Kind::none;
  double sigma = 0.0;                       // noisy
  std::size_t bins = 1;                     // discrete
  std::vector<data::Bounds> calibration;    // discrete: per-dimension range
  double preserved_ratio = 1.0;             // compressed
  std::uint64_t seed = 0;                   // noisy
};

// e + N(0, sigma^2) i.i.d. per coordinate.
std::vector<double> apply_noisy(std::vector<double> e, double sigma, Rng& rng);

// Clamp each value into its dimension's range, then snap to the nearer
// endpoint of the containing bin (ties toward the lower endpoint). The
// endpoint grid is min + i*(max-min)/bins for i = 0..bins.
std::vector<double> apply_discrete(std::vector<double> e, std::size_t bins,
                                   const std::vector<data::Bounds>& calibration);

// Keep the ceil(ratio*dim) coordinates of largest magnitude (ties toward
// the lower index), zero the rest.
std::vector<double> apply_compressed(std::vector<double> e,
                                     double preserved_ratio);

std::vector<double> apply(const DefenseSpec& spec, std::vector<double> e,
                          Rng& rng);

}  // namespace vtlab::defense
