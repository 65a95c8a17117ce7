#include <gtest/gtest.h>

#include <random>

#include "mdlab/probspace.hpp"

using namespace mdlab;

TEST(Atoms, TwoRademacherLevels) {
  const auto as = atoms(CoordinateSpace::rademacher(2));
  ASSERT_EQ(as.size(), 4u);
  for (const auto& a : as) EXPECT_DOUBLE_EQ(a.prob, 0.25);
}

TEST(Atoms, BiasedCoordinate) {
  const auto as = atoms(CoordinateSpace({Coordinate{{0.0, 1.0}, {0.3, 0.7}}}));
  ASSERT_EQ(as.size(), 2u);
  EXPECT_DOUBLE_EQ(as[0].prob, 0.3);
  EXPECT_DOUBLE_EQ(as[1].prob, 0.7);
}

TEST(Atoms, LexicographicOrder) {
  const auto as = atoms(CoordinateSpace::rademacher(3));
  ASSERT_EQ(as.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(as[i].path, (std::vector<int>{static_cast<int>(i >> 2 & 1), static_cast<int>(i >> 1 & 1),
                                             static_cast<int>(i & 1)}));
  }
  const CoordinateSpace mixed({Coordinate::uniform(3), Coordinate::rademacher()});
  const auto ms = atoms(mixed);
  EXPECT_EQ(ms[3].path, (std::vector<int>{1, 1}));
  EXPECT_EQ(mixed.index_of(ms[5].path), 5u);
}

TEST(Atoms, CapExceededNamesRequiredCount) {
  const CoordinateSpace s = CoordinateSpace::rademacher(10, 512);
  try {
    s.atom_count();
    FAIL() << "expected ResourceError";
  } catch (const ResourceError& e) {
    EXPECT_EQ(e.required(), 1024u);
  }
  EXPECT_THROW(atoms(s), ResourceError);
}

TEST(Space, RejectsInvalidLevels) {
  EXPECT_THROW(CoordinateSpace({Coordinate{{0.0, 1.0}, {0.3, 0.6}}}), ParameterError);
  EXPECT_THROW(CoordinateSpace({Coordinate{{1.0, 1.0}, {0.5, 0.5}}}), ParameterError);
  EXPECT_THROW(CoordinateSpace({Coordinate{{0.0, 1.0}, {0.0, 1.0}}}), ParameterError);
  EXPECT_THROW(CoordinateSpace(std::vector<Coordinate>{}), ParameterError);
}

TEST(Space, UniformLabels) {
  EXPECT_EQ(Coordinate::uniform(2).outcomes, (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(Coordinate::uniform(3).outcomes, (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_TRUE(CoordinateSpace::uniform(3, 2).is_rademacher());
  EXPECT_FALSE(CoordinateSpace::uniform(3, 3).is_rademacher());
}

namespace {

double label(const CoordinateSpace& s, std::span<const int> path, std::size_t i) {
  return s.level(i).outcomes[static_cast<std::size_t>(path[i])];
}

}  // namespace

TEST(Expect, Examples) {
  const auto one = CoordinateSpace::rademacher(1);
  EXPECT_DOUBLE_EQ(expect(LeafFn::scalar_fn(one, 1, Filtration::natural,
                                            [&](std::span<const int> p) { return label(one, p, 0); }),
                          one),
                   0.0);
  const auto two = CoordinateSpace::rademacher(2);
  EXPECT_DOUBLE_EQ(expect(LeafFn::scalar_fn(two, 0, Filtration::natural, [](auto) { return 2.5; }), two), 2.5);
  EXPECT_DOUBLE_EQ(expect(LeafFn::scalar_fn(two, 2, Filtration::natural,
                                            [&](std::span<const int> p) { return label(two, p, 0) * label(two, p, 1); }),
                          two),
                   0.0);
}

TEST(CondExpect, Examples) {
  const auto s = CoordinateSpace::rademacher(3);
  const auto r2 = LeafFn::scalar_fn(s, 2, Filtration::natural, [&](std::span<const int> p) { return label(s, p, 1); });
  const auto c = cond_expect(r2, s, 1);
  for (double v : c.values) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_EQ(c.level, 1u);

  const auto r1 = LeafFn::scalar_fn(s, 1, Filtration::natural, [&](std::span<const int> p) { return label(s, p, 0); });
  EXPECT_EQ(cond_expect(r1, s, 2).values, r1.values);

  const auto two = CoordinateSpace::rademacher(2);
  const auto sq = LeafFn::scalar_fn(two, 2, Filtration::natural, [&](std::span<const int> p) {
    const double v = 1.0 + label(two, p, 1);
    return v * v;
  });
  for (double v : cond_expect(sq, two, 1).values) EXPECT_DOUBLE_EQ(v, 2.0);
  EXPECT_THROW(cond_expect(sq, two, 3), ParameterError);
}

namespace {

LeafFn random_fn(const CoordinateSpace& s, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  LeafFn f = LeafFn::zeros(s, dim, s.size());
  for (double& v : f.values) v = g(rng);
  return f;
}

CoordinateSpace random_space(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 5), a(2, 3);
  std::uniform_real_distribution<double> q(0.05, 0.95);
  std::vector<Coordinate> levels;
  const int N = n(rng);
  for (int i = 0; i < N; ++i) {
    if (a(rng) == 2) {
      const double x = q(rng);
      levels.push_back(Coordinate{{-1.0, 1.0}, {x, 1.0 - x}});
    } else {
      levels.push_back(Coordinate::uniform(3));
    }
  }
  return CoordinateSpace(std::move(levels));
}

}  // namespace

TEST(CondExpectProperty, TowerAndMean) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto s = random_space(rng);
    const auto f = random_fn(s, 2, rng);
    for (std::size_t n = 0; n <= s.size(); ++n) {
      const auto fn = cond_expect(f, s, n);
      const auto ef = expect_vec(f, s), efn = expect_vec(fn, s);
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(efn[k], ef[k], 1e-12);
      EXPECT_TRUE(is_measurable(fn, s, Filtration::natural, n));
      for (std::size_t m = 0; m <= n; ++m) {
        const auto a = cond_expect(fn, s, m), b = cond_expect(f, s, m);
        for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
      }
    }
  }
}

TEST(CondExpectProperty, LinearAndPositive) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const auto s = random_space(rng);
    const auto f = random_fn(s, 1, rng), h = random_fn(s, 1, rng);
    const double a = g(rng), b = g(rng);
    LeafFn lin = f, pos = f;
    for (std::size_t i = 0; i < lin.values.size(); ++i) {
      lin.values[i] = a * f.values[i] + b * h.values[i];
      pos.values[i] = std::abs(f.values[i]);
    }
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, s.size())(rng);
    const auto cl = cond_expect(lin, s, n), cf = cond_expect(f, s, n), ch = cond_expect(h, s, n);
    for (std::size_t i = 0; i < cl.values.size(); ++i)
      EXPECT_NEAR(cl.values[i], a * cf.values[i] + b * ch.values[i], 1e-12);
    for (double v : cond_expect(pos, s, n).values) EXPECT_GE(v, 0.0);
  }
}

TEST(Doubled, Examples) {
  const auto d1 = doubled_space(CoordinateSpace::rademacher(1));
  EXPECT_EQ(d1.size(), 2u);
  EXPECT_EQ(d1.atom_count(), 4u);
  const auto d3 = doubled_space(CoordinateSpace::rademacher(3));
  EXPECT_EQ(d3.size(), 6u);
  EXPECT_EQ(d3.atom_count(), 64u);
  KahanSum total;
  for (double p : d3.atom_probs()) total += p;
  EXPECT_NEAR(total.value(), 1.0, 1e-15);
  EXPECT_THROW(doubled_space(CoordinateSpace::rademacher(13)), ResourceError);
}

TEST(Filtrations, InterleavedRevealsBothBlocks) {
  const auto d = doubled_space(CoordinateSpace::rademacher(3));
  EXPECT_EQ(revealed(d, Filtration::interleaved, 2), (Mask{1, 1, 0, 1, 1, 0}));
  EXPECT_EQ(revealed(d, Filtration::natural, 2), (Mask{1, 1, 0, 0, 0, 0}));
  EXPECT_EQ(x_block(d), (Mask{1, 1, 1, 0, 0, 0}));
  // y_1 alone is interleaved-measurable at level 1 but not naturally.
  const auto y1 = LeafFn::scalar_fn(d, 1, Filtration::interleaved, [&](std::span<const int> p) { return label(d, p, 3); });
  EXPECT_TRUE(is_measurable(y1, d, Filtration::interleaved, 1));
  EXPECT_FALSE(is_measurable(y1, d, Filtration::natural, 1));
  EXPECT_FALSE(is_measurable(y1, d, Filtration::interleaved, 0));
}

TEST(LeafFn, ConformanceChecked) {
  const auto s = CoordinateSpace::rademacher(2);
  LeafFn bad{1, 0, Filtration::natural, {1.0, 2.0, 3.0}};
  EXPECT_THROW(expect(bad, s), StructuralError);
  EXPECT_THROW(cond_expect(bad, s, 1), StructuralError);
}

TEST(LeafFn, LiftToDoubledReadsTheChosenBlock) {
  const auto base = CoordinateSpace::rademacher(2);
  const auto d = doubled_space(base);
  const auto f = LeafFn::scalar_fn(base, 2, Filtration::natural,
                                   [&](std::span<const int> p) { return 10 * p[0] + p[1]; });
  const auto lx = lift_to_doubled(f, base, d, false), ly = lift_to_doubled(f, base, d, true);
  for_each_atom(d, [&](std::size_t idx, std::span<const int> p, double) {
    EXPECT_EQ(lx.values[idx], 10 * p[0] + p[1]);
    EXPECT_EQ(ly.values[idx], 10 * p[2] + p[3]);
  });
}
