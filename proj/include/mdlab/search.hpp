#ifndef MDLAB_SEARCH_HPP
#define MDLAB_SEARCH_HPP

// Adversarial search for worst-case instances. Every reported constant is a
// lower bound for the corresponding space constant at the given depth.

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mdlab/estimator.hpp"
#include "mdlab/kernel_io.hpp"
#include "mdlab/random.hpp"

namespace mdlab {

enum class SearchMode { decoupling, umd_exact, garling_forward, garling_reverse };

inline std::string to_string(SearchMode m) {
  switch (m) {
    case SearchMode::decoupling: return "decoupling";
    case SearchMode::umd_exact: return "umd_exact";
    case SearchMode::garling_forward: return "garling_forward";
    case SearchMode::garling_reverse: return "garling_reverse";
  }
  return "?";
}

inline SearchMode parse_search_mode(std::string_view s) {
  for (auto m : {SearchMode::decoupling, SearchMode::umd_exact, SearchMode::garling_forward,
                 SearchMode::garling_reverse})
    if (s == to_string(m)) return m;
  throw ParseError("unknown search mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Sign-transform moments

/// M(eps) = E || sum_n eps_n h_n ||^p for every sign vector eps in {-1,1}^N
/// (bit n-1 of the index set means eps_n = -1). Kernel route.
inline std::vector<double> sign_moments(const GeneratorKernel& k, double p) {
  require_finite_p(p);
  const std::size_t N = k.depth();
  if (N > 16) throw ParameterError("sign enumeration needs N <= 16, got " + std::to_string(N));
  const std::size_t dim = k.dim();
  // Per x-path: the N difference vectors and the path probability.
  std::vector<double> diffs;
  std::vector<double> probs;
  {
    std::vector<std::size_t> pre(N + 1, 0);
    const auto& space = k.space();
    for_each_atom(space, [&](std::size_t idx, std::span<const int>, double prob) {
      for (std::size_t n = 1; n <= N; ++n) {
        auto v = k.value(n, idx / space.strides()[n - 1]);
        diffs.insert(diffs.end(), v.begin(), v.end());
      }
      probs.push_back(prob);
    });
  }
  const std::size_t signs = std::size_t{1} << N;
  std::vector<double> out(signs);
  Vec sum(dim);
  for (std::size_t s = 0; s < signs; ++s) {
    KahanSum acc;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t n = 0; n < N; ++n) {
        const double eps = (s >> n) & 1 ? -1.0 : 1.0;
        for (std::size_t t = 0; t < dim; ++t) sum[t] += eps * diffs[(a * N + n) * dim + t];
      }
      acc += probs[a] * pow_p(norm(sum, k.banach()), p);
    }
    out[s] = acc.value();
  }
  return out;
}

struct UmdResult {
  Status status = Status::ok;
  ConstantEstimate constant;
  std::vector<int> signs;  // maximizing sign vector
};

/// max over eps of (E||sum eps_n d_n||^p)^{1/p} / (E||sum d_n||^p)^{1/p}.
inline UmdResult umd_constant_exact(const GeneratorKernel& k, double p) {
  const auto m = sign_moments(k, p);
  UmdResult r;
  r.constant.fingerprint = fingerprint_hex(k);
  if (!(m[0] > 0.0)) {
    r.status = Status::degenerate;
    r.constant.value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < m.size(); ++s)
    if (m[s] > m[best]) best = s;
  r.constant.value = std::pow(m[best] / m[0], 1.0 / p);
  for (std::size_t n = 0; n < k.depth(); ++n) r.signs.push_back((best >> n) & 1 ? -1 : 1);
  return r;
}

inline UmdResult umd_constant_exact(const PaleyWalshGenerators& gens, const SpaceDescriptor& banach, double p) {
  return umd_constant_exact(kernel_from_paley_walsh(gens, banach), p);
}

struct GarlingResult {
  Status status = Status::ok;
  double forward = 0.0;  // (E||sum d_n||^p)^{1/p} / (E||sum r_n d_n||^p)^{1/p}
  double reverse = 0.0;  // reciprocal
};

/// Garling one-sided constants with an independent Rademacher sequence; the
/// randomized moment is the average of the sign moments.
inline GarlingResult garling_constants(const GeneratorKernel& k, double p) {
  const auto m = sign_moments(k, p);
  KahanSum avg;
  for (double x : m) avg += x;
  const double rand = avg.value() / static_cast<double>(m.size());
  GarlingResult r;
  if (!(m[0] > 0.0) || !(rand > 0.0)) {
    r.status = Status::degenerate;
    r.forward = r.reverse = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.forward = std::pow(m[0] / rand, 1.0 / p);
  r.reverse = 1.0 / r.forward;
  return r;
}

/// Garling constants on tables: builds base x {-1,1}^N explicitly and sums
/// r_n d_n atom by atom. Independent of sign_moments.
inline GarlingResult garling_constants(const MDS& m, double p) {
  if (m.filtration() != Filtration::natural) throw ContractError("garling_constants needs a natural filtration MDS");
  auto levels = m.space.levels();
  for (std::size_t n = 0; n < m.depth(); ++n) levels.push_back(Coordinate::rademacher());
  CoordinateSpace prod(std::move(levels), m.space.atom_cap());
  const std::size_t N = m.depth();
  const std::size_t dim = m.banach.dimension();
  LeafFn plain = LeafFn::zeros(prod, dim), rand = LeafFn::zeros(prod, dim);
  const std::size_t tail = prod.atom_count() / m.space.atom_count();
  for_each_atom(prod, [&](std::size_t idx, std::span<const int> path, double) {
    const std::size_t base = idx / tail;
    for (std::size_t n = 0; n < N; ++n) {
      const double r = path[m.space.size() + n] ? 1.0 : -1.0;
      for (std::size_t t = 0; t < dim; ++t) {
        plain.at(idx)[t] += m.diffs[n].at(base)[t];
        rand.at(idx)[t] += r * m.diffs[n].at(base)[t];
      }
    }
  });
  const double a = lp_norm_exact(plain, p, prod, m.banach);
  const double b = lp_norm_exact(rand, p, prod, m.banach);
  GarlingResult r;
  if (!(a > 0.0) || !(b > 0.0)) {
    r.status = Status::degenerate;
    r.forward = r.reverse = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.forward = a / b;
  r.reverse = b / a;
  return r;
}

/// Objective of a search mode on a kernel, NaN when degenerate.
inline double search_objective(const GeneratorKernel& k, SearchMode mode, double p) {
  switch (mode) {
    case SearchMode::decoupling: {
      const auto r = decoupling_ratio(k, p, k.depth());
      return r.status == Status::ok ? r.forward.value : std::numeric_limits<double>::quiet_NaN();
    }
    case SearchMode::umd_exact: return umd_constant_exact(k, p).constant.value;
    case SearchMode::garling_forward: return garling_constants(k, p).forward;
    case SearchMode::garling_reverse: return garling_constants(k, p).reverse;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Re-evaluation of a serialized instance through the table routes (decouple
/// for the ratio, MDS tables for sign and Garling modes).
inline double recheck_objective(const std::string& serialized, SearchMode mode, double p) {
  const auto k = parse_kernel(serialized);
  switch (mode) {
    case SearchMode::decoupling: {
      const auto r = decoupling_ratio(decouple(k), p, k.depth());
      return r.status == Status::ok ? r.forward.value : std::numeric_limits<double>::quiet_NaN();
    }
    case SearchMode::umd_exact: {
      MDS m{k.space(), {}, k.banach()};
      for (std::size_t n = 1; n <= k.depth(); ++n) m.diffs.push_back(k.as_leaf(n));
      LeafFn base = LeafFn::zeros(k.space(), k.dim());
      for (const auto& d : m.diffs)
        for (std::size_t i = 0; i < base.values.size(); ++i) base.values[i] += d.values[i];
      const double denom = lp_norm_exact(base, p, k.space(), k.banach());
      double best = 0.0;
      for (std::size_t s = 0; s < (std::size_t{1} << k.depth()); ++s) {
        LeafFn t = LeafFn::zeros(k.space(), k.dim());
        for (std::size_t n = 0; n < k.depth(); ++n) {
          const double eps = (s >> n) & 1 ? -1.0 : 1.0;
          for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] += eps * m.diffs[n].values[i];
        }
        best = std::max(best, lp_norm_exact(t, p, k.space(), k.banach()) / denom);
      }
      return best;
    }
    case SearchMode::garling_forward:
    case SearchMode::garling_reverse: {
      MDS m{k.space(), {}, k.banach()};
      for (std::size_t n = 1; n <= k.depth(); ++n) m.diffs.push_back(k.as_leaf(n));
      const auto g = garling_constants(m, p);
      return mode == SearchMode::garling_forward ? g.forward : g.reverse;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Hill climbing

struct SearchConfig {
  SpaceDescriptor space = SpaceDescriptor::hilbert(1);
  double p = 1.0;
  std::size_t N = 4;
  std::size_t arity = 2;
  SearchMode mode = SearchMode::decoupling;
  std::uint64_t budget = 10000;  // objective evaluations per restart
  std::uint64_t seed = 0;
  unsigned restarts = 1;
  unsigned threads = 1;
  std::uint64_t atom_cap = kDefaultAtomCap;

  void validate() const {
    require_finite_p(p);
    if (budget < 1) throw ParameterError("search budget must be >= 1");
    if (restarts < 1) throw ParameterError("search needs at least one restart");
    if (N < 1) throw ParameterError("search depth N must be >= 1");
    if (arity < 2) throw ParameterError("search arity must be >= 2");
    if (mode != SearchMode::decoupling && arity != 2)
      throw ParameterError("sign and Garling modes search Paley-Walsh instances (arity 2)");
    if (mode != SearchMode::decoupling && N > 16) throw ParameterError("sign enumeration needs N <= 16");
    // Exact evaluation touches arity^(2N) atoms on the doubled space.
    std::uint64_t atoms = 1;
    for (std::size_t i = 0; i < 2 * N; ++i) {
      if (atoms > atom_cap / arity) throw ResourceError("search instance exceeds the atom cap", atoms * arity);
      atoms *= arity;
    }
  }

  CoordinateSpace base_space() const {
    return arity == 2 ? CoordinateSpace::rademacher(N, atom_cap) : CoordinateSpace::uniform(N, arity, atom_cap);
  }
};

struct TracePoint {
  unsigned restart = 0;
  std::uint64_t evaluation = 0;
  double value = 0.0;
};

struct SearchResult {
  GeneratorKernel best;
  ConstantEstimate estimate;
  double recheck = 0.0;
  unsigned best_restart = 0;
  std::vector<TracePoint> trace;  // improvements, restart-major order

  std::string serialized() const { return serialize(best); }
};

namespace detail {

struct RestartOutcome {
  std::optional<GeneratorKernel> kernel;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<TracePoint> trace;
};

inline double kernel_rms(const GeneratorKernel& k) {
  KahanSum s;
  std::size_t count = 0;
  for (const auto& t : k.tables())
    for (double x : t) {
      s += x * x;
      ++count;
    }
  return count ? std::sqrt(s.value() / static_cast<double>(count)) : 0.0;
}

inline RestartOutcome run_restart(const SearchConfig& cfg, unsigned r, const GeneratorKernel* start) {
  Rng rng(mix_seed(cfg.seed, r));
  auto kernel = start ? *start : random_kernel(cfg.base_space(), cfg.space, rng);
  RestartOutcome out;
  double value = search_objective(kernel, cfg.mode, cfg.p);
  out.trace.push_back({r, 1, value});
  static constexpr std::array<double, 3> steps{1.0, 0.3, 0.1};
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t dim = kernel.dim();
  std::vector<double> saved;
  for (std::uint64_t e = 2; e <= cfg.budget; ++e) {
    const double step = steps[e % steps.size()];
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, cfg.N)(rng);
    const std::size_t pre = std::uniform_int_distribution<std::size_t>(0, kernel.prefix_count(n - 1) - 1)(rng);
    const std::size_t a = kernel.space().arity(n - 1);
    auto& table = kernel.table(n);
    const auto first = table.begin() + static_cast<std::ptrdiff_t>(pre * a * dim);
    saved.assign(first, first + static_cast<std::ptrdiff_t>(a * dim));
    if (e % 2 == 0) {
      const double scale = std::max(kernel_rms(kernel), 1e-3);
      for (std::size_t i = 0; i < a * dim; ++i) first[static_cast<std::ptrdiff_t>(i)] += step * scale * gauss(rng);
    } else {
      for (std::size_t i = 0; i < a * dim; ++i) first[static_cast<std::ptrdiff_t>(i)] *= 1.0 + step * gauss(rng);
    }
    kernel.recenter_cylinder(n, pre);
    const double cand = search_objective(kernel, cfg.mode, cfg.p);
    if (std::isfinite(cand) && (!std::isfinite(value) || cand > value)) {
      value = cand;
      out.trace.push_back({r, e, value});
    } else {
      std::copy(saved.begin(), saved.end(), first);
    }
  }
  out.kernel = std::move(kernel);
  out.value = value;
  return out;
}

}  // namespace detail

/// Coordinate ascent on the kernel tables with restarts. Restart r draws from
/// the stream (seed, r); restart 0 starts from `start` when given. The best
/// instance is the argmax over restarts, ties going to the lowest index.
inline SearchResult hill_climb(const SearchConfig& cfg, const GeneratorKernel* start = nullptr) {
  cfg.validate();
  if (start && (start->depth() != cfg.N || !(start->banach() == cfg.space)))
    throw StructuralError("hill_climb: start instance does not match the configuration");
  std::vector<detail::RestartOutcome> outcomes(cfg.restarts);
  parallel_for(cfg.restarts, cfg.threads, [&](std::size_t r) {
    outcomes[r] = detail::run_restart(cfg, static_cast<unsigned>(r), r == 0 ? start : nullptr);
  });
  unsigned best = 0;
  for (unsigned r = 1; r < cfg.restarts; ++r) {
    const double v = outcomes[r].value, b = outcomes[best].value;
    if (std::isfinite(v) && (!std::isfinite(b) || v > b)) best = r;
  }
  SearchResult res{*outcomes[best].kernel, {}, 0.0, best, {}};
  for (const auto& o : outcomes) res.trace.insert(res.trace.end(), o.trace.begin(), o.trace.end());
  res.estimate.value = outcomes[best].value;
  res.estimate.engine = Engine::exact;
  res.estimate.fingerprint = fingerprint_hex(res.best);
  res.recheck = recheck_objective(res.serialized(), cfg.mode, cfg.p);
  return res;
}

/// Zero-pads every kernel value into a larger space of the same kind.
inline GeneratorKernel embed_kernel(const GeneratorKernel& k, const SpaceDescriptor& target) {
  GeneratorKernel out(k.space(), target);
  for (std::size_t n = 1; n <= k.depth(); ++n)
    for (std::size_t pre = 0; pre < k.prefix_count(n); ++pre) {
      const auto v = embed(k.value(n, pre), k.banach(), target);
      std::copy(v.begin(), v.end(), out.value(n, pre).begin());
    }
  return out;
}

struct SweepRow {
  std::size_t dim = 0;
  SpaceDescriptor space;
  double best = 0.0;
  double recheck = 0.0;
  std::string fingerprint;
  std::string kernel;  // serialized best instance
};

struct SweepTable {
  SearchConfig config;
  std::vector<SweepRow> rows;

  static std::string csv_header() { return "dim,p,N,mode,best_constant,seed,budget,fingerprint"; }
  std::string to_csv() const {
    std::string out = csv_header() + "\n";
    for (const auto& r : rows)
      out += std::to_string(r.dim) + "," + format_double(config.p) + "," + std::to_string(config.N) + "," +
             to_string(config.mode) + "," + format_double(r.best) + "," + std::to_string(config.seed) + "," +
             std::to_string(config.budget) + "," + r.fingerprint + "\n";
    return out;
  }
};

/// Runs hill_climb per size; each size after the first is seeded with the
/// zero-padded optimum of the previous one, which makes the column
/// nondecreasing for ascending sizes.
inline SweepTable dimension_sweep(const SearchConfig& tmpl, const std::vector<std::size_t>& dims) {
  SweepTable table{tmpl, {}};
  std::optional<GeneratorKernel> prev;
  for (std::size_t d : dims) {
    auto cfg = tmpl;
    cfg.space = with_size(tmpl.space, d);
    std::optional<GeneratorKernel> start;
    if (prev && prev->banach().dimension() <= cfg.space.dimension()) {
      try {
        start = embed_kernel(*prev, cfg.space);
      } catch (const StructuralError&) {
        start.reset();
      }
    }
    auto res = hill_climb(cfg, start ? &*start : nullptr);
    table.rows.push_back(SweepRow{d, cfg.space, res.estimate.value, res.recheck, res.estimate.fingerprint,
                                  res.serialized()});
    prev = res.best;
  }
  return table;
}

}  // namespace mdlab

#endif  // MDLAB_SEARCH_HPP
