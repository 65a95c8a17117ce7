#ifndef MDLAB_RANDOM_HPP
#define MDLAB_RANDOM_HPP

// Random instances for property tests, searches and the CLI.

#include <random>

#include "mdlab/martingale.hpp"

namespace mdlab {

using Rng = std::mt19937_64;

struct RandomKernelOptions {
  /// Probability that a whole prefix block of h_n is zero; exercises ties and
  /// degenerate conditional laws.
  double zero_block = 0.0;
  /// Round entries to this grid before recentering (0 disables); produces
  /// repeated values across atoms.
  double grid = 0.0;
};

inline GeneratorKernel random_kernel(const CoordinateSpace& space, const SpaceDescriptor& banach, Rng& rng,
                                     RandomKernelOptions opt = {}) {
  GeneratorKernel k(space, banach);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t n = 1; n <= k.depth(); ++n) {
    const std::size_t a = space.arity(n - 1);
    for (std::size_t pre = 0; pre < k.prefix_count(n - 1); ++pre) {
      const bool zero = opt.zero_block > 0.0 && unif(rng) < opt.zero_block;
      for (std::size_t j = 0; j < a; ++j) {
        auto v = k.value(n, pre * a + j);
        for (double& x : v) {
          x = zero ? 0.0 : gauss(rng);
          if (opt.grid > 0.0) x = std::round(x / opt.grid) * opt.grid;
        }
      }
      k.recenter_cylinder(n, pre);
    }
  }
  return k;
}

inline PaleyWalshGenerators random_paley_walsh(std::size_t depth, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  PaleyWalshGenerators g{dim, {}};
  for (std::size_t n = 1; n <= depth; ++n) {
    std::vector<double> t((std::size_t{1} << (n - 1)) * dim);
    for (double& x : t) x = gauss(rng);
    g.f.push_back(std::move(t));
  }
  return g;
}

}  // namespace mdlab

#endif  // MDLAB_RANDOM_HPP
