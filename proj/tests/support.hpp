#ifndef MDLAB_TESTS_SUPPORT_HPP
#define MDLAB_TESTS_SUPPORT_HPP

// Fixture instances shared by the test binaries. The pinned values that go
// with them come from tests/oracles/enumerate.py.

#include <random>
#include <vector>

#include "mdlab/davis.hpp"
#include "mdlab/estimator.hpp"
#include "mdlab/martingale.hpp"
#include "mdlab/random.hpp"

namespace fixtures {

using namespace mdlab;

/// Three coordinates with outcomes {0, 1} and probabilities (0.25, 0.75).
inline CoordinateSpace asym_space() {
  return CoordinateSpace(std::vector<Coordinate>(3, Coordinate{{0.0, 1.0}, {0.25, 0.75}}));
}

/// Scalar kernel on asym_space; every block (a, b) has 0.25 a + 0.75 b = 0.
inline GeneratorKernel asym_kernel() {
  return GeneratorKernel(asym_space(), SpaceDescriptor::lp(1, 1.0),
                         {{3.0, -1.0},
                          {1.5, -0.5, -3.0, 1.0},
                          {0.6, -0.2, 2.4, -0.8, -0.9, 0.3, 3.0, -1.0}});
}

/// Paley-Walsh generators in l^1_2 with N = 3.
inline PaleyWalshGenerators pw_l1() {
  return PaleyWalshGenerators{2,
                              {{1.0, 1.0},
                               {-1.0, 0.7, -1.0, 0.7},
                               {0.3, 2.0, 2.0, 1.0, 1.2, 0.4, 0.3, 2.0}}};
}

/// Scalar Rademacher kernel with N = 2 for the sigma table.
inline GeneratorKernel sigma_kernel() {
  return GeneratorKernel(CoordinateSpace::rademacher(2), SpaceDescriptor::lp(1, 2.0),
                         {{-2.0, 2.0}, {-0.25, 0.25, -2.5, 2.5}});
}

/// Random base space: arity 2 or 3, depth 1..max_depth.
inline CoordinateSpace random_base(Rng& rng, std::size_t max_depth, std::size_t min_arity = 2,
                                   std::size_t max_arity = 3) {
  const std::size_t N = std::uniform_int_distribution<std::size_t>(1, max_depth)(rng);
  const std::size_t a = std::uniform_int_distribution<std::size_t>(min_arity, max_arity)(rng);
  if (a == 2 && std::uniform_int_distribution<int>(0, 1)(rng)) {
    // Biased coordinates exercise non-uniform laws.
    std::vector<Coordinate> levels;
    for (std::size_t i = 0; i < N; ++i) {
      const double q = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
      levels.push_back(Coordinate{{-1.0, 1.0}, {q, 1.0 - q}});
    }
    return CoordinateSpace(std::move(levels));
  }
  return CoordinateSpace::uniform(N, a);
}

inline SpaceDescriptor random_banach(Rng& rng) {
  switch (std::uniform_int_distribution<int>(0, 5)(rng)) {
    case 0: return SpaceDescriptor::lp(1, 2.0);
    case 1: return SpaceDescriptor::hilbert(2);
    case 2: return SpaceDescriptor::lp(3, 1.0);
    case 3: return SpaceDescriptor::linf(3);
    case 4: return SpaceDescriptor::lp(2, 3.0);
    default: return SpaceDescriptor::trace(2);
  }
}

inline RandomKernelOptions random_options(Rng& rng) {
  RandomKernelOptions o;
  if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) o.zero_block = 0.3;
  if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) o.grid = 0.5;
  return o;
}

}  // namespace fixtures

#endif  // MDLAB_TESTS_SUPPORT_HPP
