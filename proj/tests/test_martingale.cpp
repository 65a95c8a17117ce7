#include <gtest/gtest.h>

#include <random>

#include "mdlab/kernel_io.hpp"
#include "mdlab/martingale.hpp"
#include "mdlab/random.hpp"
#include "support.hpp"

using namespace mdlab;

namespace {

double label(const CoordinateSpace& s, std::span<const int> path, std::size_t i) {
  return s.level(i).outcomes[static_cast<std::size_t>(path[i])];
}

LeafFn constant(const CoordinateSpace& s, std::size_t dim, double c, std::size_t level = 0) {
  LeafFn f = LeafFn::zeros(s, dim, level);
  std::fill(f.values.begin(), f.values.end(), c);
  return f;
}

}  // namespace

TEST(PaleyWalsh, ConstantFirstGenerator) {
  const auto m = paley_walsh(PaleyWalshGenerators{1, {{2.5}}}, SpaceDescriptor::lp(1, 2.0));
  EXPECT_DOUBLE_EQ(expect(m.diffs[0], m.space), 0.0);
  for_each_atom(m.space, [&](std::size_t i, std::span<const int> p, double) {
    EXPECT_EQ(m.diffs[0].values[i], 2.5 * label(m.space, p, 0));
  });
}

TEST(PaleyWalsh, ZeroGeneratorsGiveZeroMds) {
  const auto m = paley_walsh(PaleyWalshGenerators{2, {{0, 0}, {0, 0, 0, 0}}}, SpaceDescriptor::hilbert(2));
  for (const auto& d : m.diffs)
    for (double v : d.values) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(check_mds(m).ok);
}

TEST(PaleyWalsh, SecondDifferenceOfOnePlusR1) {
  // f_1 = 1, f_2(r_1) = 1 + r_1.
  const auto m = paley_walsh(PaleyWalshGenerators{1, {{1.0}, {0.0, 2.0}}}, SpaceDescriptor::lp(1, 2.0));
  for_each_atom(m.space, [&](std::size_t i, std::span<const int> p, double) {
    const double r1 = label(m.space, p, 0), r2 = label(m.space, p, 1);
    EXPECT_EQ(m.diffs[1].values[i], r1 > 0 ? 2.0 * r2 : 0.0);
  });
  EXPECT_THROW(paley_walsh(PaleyWalshGenerators{1, {{1.0}, {2.0}}}, SpaceDescriptor::lp(1, 2.0)), StructuralError);
}

TEST(PaleyWalsh, KernelRoundTripAndNonRademacherError) {
  const auto g = fixtures::pw_l1();
  const auto k = kernel_from_paley_walsh(g, SpaceDescriptor::lp(2, 1.0));
  EXPECT_EQ(paley_walsh_from_kernel(k).f, g.f);
  const auto m = paley_walsh(g, SpaceDescriptor::lp(2, 1.0));
  for (std::size_t n = 1; n <= 3; ++n) EXPECT_EQ(k.as_leaf(n).values, m.diffs[n - 1].values);
  EXPECT_THROW(paley_walsh_from_kernel(fixtures::asym_kernel()), ContractError);
}

TEST(MultiplierMds, RademacherWalkWithUnitMultipliers) {
  const auto s = CoordinateSpace::rademacher(3);
  std::vector<LeafFn> xi, w;
  for (std::size_t n = 1; n <= 3; ++n) {
    xi.push_back(LeafFn::scalar_fn(s, n, Filtration::natural, [&](auto p) { return label(s, p, n - 1); }));
    w.push_back(constant(s, 1, 1.0, n - 1));
  }
  const auto pair = multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), xi, w);
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) {
    for (std::size_t n = 0; n < 3; ++n) {
      EXPECT_EQ(pair.d.diffs[n].values[i], label(pair.doubled, p, n));
      EXPECT_EQ(pair.e.diffs[n].values[i], label(pair.doubled, p, 3 + n));
    }
  });
}

TEST(MultiplierMds, ZeroMultiplierAndSubstitution) {
  const auto s = CoordinateSpace::rademacher(2);
  std::vector<LeafFn> xi, w0, w;
  for (std::size_t n = 1; n <= 2; ++n) {
    xi.push_back(LeafFn::scalar_fn(s, n, Filtration::natural, [&](auto p) { return label(s, p, n - 1); }));
    w0.push_back(constant(s, 1, 0.0, n - 1));
  }
  const auto zero = multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), xi, w0);
  for (const auto* m : {&zero.d, &zero.e})
    for (const auto& d : m->diffs)
      for (double v : d.values) EXPECT_EQ(v, 0.0);

  w.push_back(constant(s, 1, 1.0, 0));
  w.push_back(LeafFn::scalar_fn(s, 1, Filtration::natural, [&](auto p) { return 1.0 + label(s, p, 0); }));
  const auto pair = multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), xi, w);
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) {
    EXPECT_EQ(pair.e.diffs[1].values[i], label(pair.doubled, p, 3) * (1.0 + label(pair.doubled, p, 0)));
  });
}

TEST(MultiplierMds, Errors) {
  const auto s = CoordinateSpace::rademacher(2);
  std::vector<LeafFn> xi, w;
  for (std::size_t n = 1; n <= 2; ++n) {
    xi.push_back(LeafFn::scalar_fn(s, n, Filtration::natural, [&](auto p) { return label(s, p, n - 1); }));
    w.push_back(constant(s, 1, 1.0, n - 1));
  }
  auto bad_w = w;
  bad_w[0] = LeafFn::scalar_fn(s, 1, Filtration::natural, [&](auto p) { return label(s, p, 0); });
  EXPECT_THROW(multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), xi, bad_w), ContractError);
  auto bad_xi = xi;
  bad_xi[1] = constant(s, 1, 1.0, 2);
  EXPECT_THROW(multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), bad_xi, w), ContractError);
  auto late_xi = xi;
  late_xi[0] = LeafFn::scalar_fn(s, 2, Filtration::natural, [&](auto p) { return label(s, p, 1); });
  EXPECT_THROW(multiplier_mds(s, SpaceDescriptor::lp(1, 2.0), late_xi, w), ContractError);
}

TEST(Decouple, DepthOneHasEqualLaws) {
  Rng rng(5);
  const auto k = random_kernel(CoordinateSpace::uniform(1, 3), SpaceDescriptor::hilbert(2), rng);
  const auto pair = decouple(k);
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) {
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_EQ(pair.d.diffs[0].at(i)[c], k.value(1, static_cast<std::size_t>(p[0]))[c]);
      EXPECT_EQ(pair.e.diffs[0].at(i)[c], k.value(1, static_cast<std::size_t>(p[1]))[c]);
    }
  });
  EXPECT_TRUE(laws_equal(law_of(pair.d.diffs[0], pair.doubled), law_of(pair.e.diffs[0], pair.doubled)));
}

TEST(Decouple, PaleyWalshGivesFreshSignTimesGenerator) {
  const auto g = fixtures::pw_l1();
  const auto pair = decouple(kernel_from_paley_walsh(g, SpaceDescriptor::lp(2, 1.0)));
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) {
    for (std::size_t n = 1; n <= 3; ++n) {
      std::size_t pre = 0;
      for (std::size_t j = 0; j + 1 < n; ++j) pre = 2 * pre + static_cast<std::size_t>(p[j]);
      const double ytilde = label(pair.doubled, p, 3 + n - 1);
      for (std::size_t c = 0; c < 2; ++c)
        EXPECT_EQ(pair.e.diffs[n - 1].at(i)[c], ytilde * g.f[n - 1][pre * 2 + c]);
    }
  });
}

TEST(Decouple, TermwiseLawsOfDAndEAgree) {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    const std::size_t N = 1 + static_cast<std::size_t>(t % 3);
    RandomKernelOptions opt;
    opt.grid = t % 2 ? 0.5 : 0.0;
    const auto k = random_kernel(CoordinateSpace::rademacher(N), SpaceDescriptor::lp(1, 2.0), rng, opt);
    const auto pair = decouple(k);
    for (std::size_t n = 0; n < N; ++n)
      EXPECT_TRUE(laws_equal(law_of(pair.d.diffs[n], pair.doubled), law_of(pair.e.diffs[n], pair.doubled)));
  }
}

TEST(Decouple, RejectsUncenteredKernel) {
  GeneratorKernel k(CoordinateSpace::rademacher(1), SpaceDescriptor::lp(1, 2.0), {{1.0, 2.0}});
  EXPECT_THROW(decouple(k), ContractError);
}

TEST(CheckTangent, IdenticalAndDecoupled) {
  const auto pair = decouple(fixtures::asym_kernel());
  EXPECT_TRUE(check_tangent(pair.d, pair.d).ok);
  EXPECT_TRUE(check_tangent(pair.d, pair.e).ok);
}

TEST(CheckTangent, NegatedAtomOnAsymmetricCylinderIsCaught) {
  const auto pair = decouple(fixtures::asym_kernel());
  // Conditional law of e_2 on any cylinder is {1.5: 1/4, -0.5: 3/4} or
  // {-3: 1/4, 1: 3/4}; negating one atom moves mass to a new support point.
  auto e = pair.e;
  e.diffs[1].values[0] = -e.diffs[1].values[0];
  const auto r = check_tangent(pair.d, e);
  ASSERT_FALSE(r.ok);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(r.witness->n, 2u);
  EXPECT_FALSE(laws_equal(r.witness->first, r.witness->second));
  // Interleaved level-1 cylinder: x_1 and y_1 revealed, the rest unrevealed.
  EXPECT_EQ(r.witness->cylinder, (std::vector<int>{0, -1, -1, 0, -1, -1}));
}

TEST(CheckCi, DecoupledAndZeroPairsPass) {
  EXPECT_TRUE(check_ci(decouple(fixtures::asym_kernel())).ok);
  EXPECT_TRUE(check_ci(decouple(GeneratorKernel(CoordinateSpace::rademacher(3), SpaceDescriptor::hilbert(2)))).ok);
}

TEST(CheckCi, PathDependentSelfPairFails) {
  // (d, d) with d_2 depending on x_1: e_n = d_n is G-measurable, so its
  // conditional law given G is a point mass, unlike its law given F_1.
  const auto k = kernel_from_paley_walsh(PaleyWalshGenerators{1, {{1.0}, {1.0, 2.0}}}, SpaceDescriptor::lp(1, 2.0));
  auto pair = decouple(k);
  pair.e = pair.d;
  const auto r = check_ci(pair);
  ASSERT_FALSE(r.ok);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(r.witness->n, 1u);
}

TEST(CheckCi, NonFactorizingJointLawFails) {
  // e_1 = y_1, e_2 = y_1 x_2: each term is a fair sign given the past and
  // given G, but given G the pair is determined by y_1.
  const auto k = kernel_from_paley_walsh(PaleyWalshGenerators{1, {{1.0}, {1.0, 1.0}}}, SpaceDescriptor::lp(1, 2.0));
  auto pair = decouple(k);
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) {
    pair.e.diffs[0].values[i] = label(pair.doubled, p, 2);
    pair.e.diffs[1].values[i] = label(pair.doubled, p, 2) * label(pair.doubled, p, 1);
  });
  const auto r = check_ci(pair);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.witness->n, 0u);
}

TEST(PartialSums, Examples) {
  const auto zero = decouple(GeneratorKernel(CoordinateSpace::rademacher(2), SpaceDescriptor::lp(1, 2.0)));
  for (const auto& f : partial_sums(zero.d))
    for (double v : f.values) EXPECT_EQ(v, 0.0);
  const auto walk = paley_walsh(PaleyWalshGenerators{1, {{1.0}, {1.0, 1.0}}}, SpaceDescriptor::lp(1, 2.0));
  const auto fs = partial_sums(walk);
  EXPECT_EQ(fs[0].values, walk.diffs[0].values);
  const std::size_t plus_minus = walk.space.index_of(std::vector<int>{1, 0});
  EXPECT_EQ(fs[1].values[plus_minus], 0.0);
  const auto mx = maximal(fs, walk.space, walk.banach);
  EXPECT_EQ(mx.star.values[plus_minus], 1.0);
  EXPECT_EQ(maximal({fs[0]}, walk.space, walk.banach).star.values, norms(fs[0], walk.space, walk.banach).values);
  for (double v : maximal({}, walk.space, walk.banach).star.values) EXPECT_EQ(v, 0.0);
}

TEST(MdsProperty, RandomDecoupledPairsAreTangentWithCi) {
  Rng rng(31);
  for (int t = 0; t < 150; ++t) {
    const auto base = fixtures::random_base(rng, 4);
    const auto banach = t % 2 ? SpaceDescriptor::lp(1, 2.0) : SpaceDescriptor::hilbert(2);
    const auto k = random_kernel(base, banach, rng, fixtures::random_options(rng));
    const auto pair = decouple(k);
    EXPECT_TRUE(check_mds(pair.d).ok);
    EXPECT_TRUE(check_mds(pair.e).ok);
    EXPECT_TRUE(check_tangent(pair.d, pair.e).ok);
    EXPECT_TRUE(check_ci(pair).ok);
  }
}

TEST(MdsProperty, SecondMomentsAgreeInHilbertSpace) {
  Rng rng(32);
  for (int t = 0; t < 60; ++t) {
    const auto k = random_kernel(fixtures::random_base(rng, 4), SpaceDescriptor::hilbert(3), rng);
    const auto pair = decouple(k);
    const auto f = partial_sums(pair.d).back(), g = partial_sums(pair.e).back();
    auto second = [&](const LeafFn& x) {
      KahanSum s;
      const auto& probs = pair.doubled.atom_probs();
      for (std::size_t i = 0; i < probs.size(); ++i) {
        double n2 = 0.0;
        for (double c : x.at(i)) n2 += c * c;
        s += probs[i] * n2;
      }
      return s.value();
    };
    EXPECT_NEAR(second(f), second(g), 1e-10 * std::max(1.0, second(f)));
  }
}

TEST(MdsProperty, PaleyWalshSumLawEqualsRandomizedSignLaw) {
  // Law of sum e_n versus law of sum rt_n r_n f_n(r) on an independent space
  // of 2N Rademacher signs (r, rt).
  Rng rng(33);
  for (int t = 0; t < 40; ++t) {
    const std::size_t N = 1 + static_cast<std::size_t>(t % 4);
    const auto g = random_paley_walsh(N, 2, rng);
    const auto banach = SpaceDescriptor::linf(2);
    const auto pair = decouple(kernel_from_paley_walsh(g, banach));
    const auto lhs = law_of(partial_sums(pair.e).back(), pair.doubled);

    const auto signs = CoordinateSpace::rademacher(2 * N);
    const auto rhs_fn = LeafFn::tabulate(signs, 2, 2 * N, Filtration::natural, [&](auto p, std::span<double> out) {
      for (std::size_t n = 1; n <= N; ++n) {
        std::size_t pre = 0;
        for (std::size_t j = 0; j + 1 < n; ++j) pre = 2 * pre + static_cast<std::size_t>(p[j]);
        const double r = label(signs, p, n - 1), rt = label(signs, p, N + n - 1);
        for (std::size_t c = 0; c < 2; ++c) out[c] += rt * r * g.f[n - 1][pre * 2 + c];
      }
    });
    EXPECT_TRUE(laws_equal(lhs, law_of(rhs_fn, signs)));
  }
}

TEST(StoppedTransform, IdentityAndZero) {
  const auto pair = decouple(fixtures::asym_kernel());
  const std::size_t atoms = pair.doubled.atom_count();
  StoppingTriple id{StoppingTime::constant(atoms, 0), StoppingTime::constant(atoms, 4), StoppingTime::constant(atoms, 4),
                    {}};
  const auto same = stopped_transform(pair, id);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(same.d.diffs[n].values, pair.d.diffs[n].values);
    EXPECT_EQ(same.e.diffs[n].values, pair.e.diffs[n].values);
  }
  ASSERT_TRUE(same.kernel.has_value());
  EXPECT_EQ(serialize(*same.kernel), serialize(*pair.kernel));

  StoppingTriple never{StoppingTime::constant(atoms, 4), StoppingTime::constant(atoms, 4),
                       StoppingTime::constant(atoms, 4), {}};
  const auto zero = stopped_transform(pair, never);
  for (const auto* m : {&zero.d, &zero.e})
    for (const auto& d : m->diffs)
      for (double v : d.values) EXPECT_EQ(v, 0.0);
}

TEST(StoppedTransform, FirstPassageTelescopes) {
  const auto pair = decouple(fixtures::asym_kernel());
  const auto& space = pair.doubled;
  const auto fs = partial_sums(pair.d);
  const std::size_t atoms = space.atom_count();
  StoppingTriple st;
  st.mu = first_passage(fs, space, pair.banach(), 1.0);
  st.nu = first_passage(fs, space, pair.banach(), 3.0);
  st.sigma = StoppingTime::constant(atoms, 4);
  const auto out = stopped_transform(pair, st);
  const auto Fs = partial_sums(out.d);
  for (std::size_t i = 0; i < atoms; ++i) {
    const int mu = st.mu.values[i], stop = std::min(st.nu.values[i], 3);
    double expected = 0.0;
    if (mu <= 3) expected = fs[static_cast<std::size_t>(stop) - 1].values[i] - (mu > 0 ? fs[mu - 1].values[i] : 0.0);
    EXPECT_NEAR(Fs.back().values[i], expected, 1e-12);
  }
  EXPECT_TRUE(check_tangent(out.d, out.e).ok);
  EXPECT_TRUE(check_ci(out).ok);
}

TEST(StoppedTransform, NonStoppingTimeIsRejected) {
  const auto pair = decouple(fixtures::asym_kernel());
  const std::size_t atoms = pair.doubled.atom_count();
  // nu = 1 on {x_2 = 1}: {nu <= 1} is not level-1 measurable.
  StoppingTriple st{StoppingTime::constant(atoms, 0), StoppingTime::constant(atoms, 4),
                    StoppingTime::constant(atoms, 4), {}};
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) { st.nu.values[i] = p[1] ? 1 : 4; });
  EXPECT_THROW(stopped_transform(pair, st), ContractError);
  // A nu that stops at 1 on {x_1 = 1} is fine.
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) { st.nu.values[i] = p[0] ? 1 : 4; });
  EXPECT_NO_THROW(stopped_transform(pair, st));
}

TEST(StoppedTransform, MuAfterNuIsRejected) {
  const auto pair = decouple(fixtures::asym_kernel());
  const std::size_t atoms = pair.doubled.atom_count();
  StoppingTriple st{StoppingTime::constant(atoms, 2), StoppingTime::constant(atoms, 1),
                    StoppingTime::constant(atoms, 4), {}};
  try {
    stopped_transform(pair, st);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("mu > nu"), std::string::npos);
  }
}

TEST(BuildSigma, Extremes) {
  const auto pair = decouple(fixtures::asym_kernel());
  GoodLambdaParams huge{0.5, 2.0, 1e6, 1.0};
  for (int v : build_sigma(pair, huge).sigma.values) EXPECT_EQ(v, 4);
  GoodLambdaParams zero{0.0, 2.0, 1.0, 1.0};
  for (int v : build_sigma(pair, zero).sigma.values) EXPECT_EQ(v, 1);
}

TEST(BuildSigma, FixtureTable) {
  // Oracle: tests/oracles/enumerate.py sigma_table. sigma depends on x only:
  // 3 (infinity) on {x_1 = -1}, 2 on {x_1 = +1} for delta*lambda = 9.
  const auto pair = decouple(fixtures::sigma_kernel());
  for (double p : {1.0, 2.0}) {
    const auto r = build_sigma(pair, GoodLambdaParams{0.5, 2.0, 18.0, p});
    EXPECT_TRUE(r.moments_predictable);
    for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> path, double) {
      EXPECT_EQ(r.sigma.values[i], path[0] ? 2 : 3);
    });
  }
  for (int v : build_sigma(pair, GoodLambdaParams{0.25, 2.0, 20.0, 1.0}).sigma.values) EXPECT_EQ(v, 1);
}

TEST(StoppingTimes, ValidityChecks) {
  const auto pair = decouple(fixtures::asym_kernel());
  const auto fs = partial_sums(pair.d);
  const auto mu = first_passage(fs, pair.doubled, pair.banach(), 1.0);
  EXPECT_TRUE(is_stopping_time(mu, pair.doubled, Filtration::interleaved, 3));
  StoppingTime peek = StoppingTime::constant(pair.doubled.atom_count(), 4);
  for_each_atom(pair.doubled, [&](std::size_t i, std::span<const int> p, double) { peek.values[i] = p[2] ? 1 : 4; });
  EXPECT_FALSE(is_stopping_time(peek, pair.doubled, Filtration::interleaved, 3));
  EXPECT_THROW(GoodLambdaParams({0.5, 1.4, 1.0, 1.0}).validate(), ParameterError);
  EXPECT_THROW(GoodLambdaParams({0.5, 2.0, 1.0, 0.5}).validate(), ParameterError);
}

TEST(KernelIo, RoundTripAndFingerprint) {
  Rng rng(41);
  for (int t = 0; t < 20; ++t) {
    const auto k = random_kernel(fixtures::random_base(rng, 3), fixtures::random_banach(rng), rng);
    const auto text = serialize(k);
    const auto back = parse_kernel(text);
    EXPECT_EQ(serialize(back), text);
    EXPECT_EQ(fingerprint(back), fingerprint(k));
    EXPECT_EQ(back.tables(), k.tables());
  }
  EXPECT_EQ(fingerprint_hex(fixtures::asym_kernel()).size(), 16u);
}

TEST(KernelIo, MalformedInputIsRejected) {
  const auto good = serialize(fixtures::asym_kernel());
  EXPECT_THROW(parse_kernel(""), ParseError);
  EXPECT_THROW(parse_kernel("format other 1\n"), ParseError);
  auto truncated = good.substr(0, good.size() / 2);
  EXPECT_ANY_THROW(parse_kernel(truncated));
  auto bad_number = good;
  bad_number.replace(bad_number.find("0.6"), 3, "0.x");
  EXPECT_ANY_THROW(parse_kernel(bad_number));
  auto uncentered = good;
  uncentered.replace(uncentered.find("0.6"), 3, "0.7");
  EXPECT_THROW(decouple(parse_kernel(uncentered)), ContractError);
}

TEST(GeneratorKernel, ShapeAndCentering) {
  EXPECT_THROW(GeneratorKernel(CoordinateSpace::rademacher(2), SpaceDescriptor::lp(1, 2.0), {{1.0, -1.0}}),
               StructuralError);
  EXPECT_THROW(GeneratorKernel(CoordinateSpace::rademacher(1), SpaceDescriptor::lp(1, 2.0), {{1.0, -1.0, 0.0}}),
               StructuralError);
  EXPECT_THROW(GeneratorKernel(CoordinateSpace::rademacher(20, 1024), SpaceDescriptor::lp(1, 2.0)), ResourceError);
  GeneratorKernel k(CoordinateSpace::rademacher(2), SpaceDescriptor::lp(1, 2.0), {{3.0, 1.0}, {1.0, 1.0, 0.0, 2.0}});
  EXPECT_GT(k.max_conditional_mean(), 0.5);
  k.recenter();
  EXPECT_LT(k.max_conditional_mean(), 1e-15);
  EXPECT_EQ(k.table(1), (std::vector<double>{1.0, -1.0}));
}
