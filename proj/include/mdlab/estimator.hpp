#ifndef MDLAB_ESTIMATOR_HPP
#define MDLAB_ESTIMATOR_HPP

// Exact and Monte Carlo evaluation of the functionals in the decoupling
// inequalities: L^p norms of martingale sums, maximal functions, decoupling
// ratios, weak-type constants and the good-lambda probe.
//
// Two exact routes exist. The pair route works on the tables of a
// DecoupledPair over the doubled space. The kernel route walks the generator
// kernel directly (depth-first over x and y prefixes) and never materializes
// the doubled space; searches use it. Tests hold the two routes against each
// other.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdlab/davis.hpp"
#include "mdlab/kernel_io.hpp"
#include "mdlab/martingale.hpp"

namespace mdlab {

enum class Engine { exact, mc };

inline std::string to_string(Engine e) { return e == Engine::exact ? "exact" : "mc"; }
inline Engine parse_engine(std::string_view s) {
  if (s == "exact") return Engine::exact;
  if (s == "mc") return Engine::mc;
  throw ParseError("unknown engine '" + std::string(s) + "' (expected exact or mc)");
}

struct ConstantEstimate {
  double value = 0.0;
  Engine engine = Engine::exact;
  std::uint64_t samples = 0;            // mc only
  std::optional<double> std_error;      // mc only
  std::optional<std::uint64_t> seed;    // mc only
  std::string fingerprint;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["value"] = value;
    j["engine"] = to_string(engine);
    if (engine == Engine::mc) {
      j["samples"] = samples;
      j["std_error"] = std_error.value_or(0.0);
      j["seed"] = seed.value_or(0);
    }
    j["fingerprint"] = fingerprint;
    return j;
  }
};

struct McOptions {
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Fingerprint of a pair: its kernel's when known, otherwise a hash of the tables.
inline std::string pair_fingerprint(const DecoupledPair& pair) {
  if (pair.kernel) return fingerprint_hex(*pair.kernel);
  std::string buf = pair.banach().to_string();
  for (const auto* m : {&pair.d, &pair.e})
    for (const auto& f : m->diffs)
      for (double x : f.values) buf += format_double(x) + ",";
  return hex64(fnv1a(buf));
}

inline void require_finite_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ParameterError("exponent p must be finite and >= 1");
}

inline double pow_p(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  return std::pow(x, p);
}

/// sum_i probs[i] * norms[i]^p with compensated summation.
inline double weighted_power_sum(std::span<const double> probs, std::span<const double> norms, double p) {
  KahanSum s;
  for (std::size_t i = 0; i < probs.size(); ++i) s += probs[i] * pow_p(norms[i], p);
  return s.value();
}

/// E ||f||^p.
inline double moment_exact(const LeafFn& f, double p, const CoordinateSpace& space, const SpaceDescriptor& banach) {
  require_finite_p(p);
  const auto n = norms(f, space, banach);
  return weighted_power_sum(space.atom_probs(), n.values, p);
}

/// (E ||f||^p)^{1/p}.
inline double lp_norm_exact(const LeafFn& f, double p, const CoordinateSpace& space, const SpaceDescriptor& banach) {
  return std::pow(moment_exact(f, p, space, banach), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Kernel route

namespace detail {

/// Visits every x-path of the base space with f_N(x) = sum_{n<=N} h_n(x_<=n).
template <class Visit>
void walk_f(const GeneratorKernel& k, std::size_t N, Visit&& visit) {
  const std::size_t dim = k.dim();
  std::vector<Vec> acc(N + 1, Vec(dim, 0.0));
  auto rec = [&](auto&& self, std::size_t n, std::size_t pre, double prob) -> void {
    if (n > N) {
      visit(std::span<const double>(acc[N]), prob);
      return;
    }
    const auto& c = k.space().level(n - 1);
    for (std::size_t j = 0; j < c.arity(); ++j) {
      const std::size_t idx = pre * c.arity() + j;
      auto h = k.value(n, idx);
      for (std::size_t t = 0; t < dim; ++t) acc[n][t] = acc[n - 1][t] + h[t];
      self(self, n + 1, idx, prob * c.probs[j]);
    }
  };
  rec(rec, 1, 0, 1.0);
}

/// Visits every (x_<N, y_<=N) with g_N = sum_{n<=N} h_n(x_<n, y_n).
template <class Visit>
void walk_g(const GeneratorKernel& k, std::size_t N, Visit&& visit) {
  const std::size_t dim = k.dim();
  std::vector<Vec> acc(N + 1, Vec(dim, 0.0));
  auto rec = [&](auto&& self, std::size_t n, std::size_t pre, double prob) -> void {
    if (n > N) {
      visit(std::span<const double>(acc[N]), prob);
      return;
    }
    const auto& c = k.space().level(n - 1);
    for (std::size_t y = 0; y < c.arity(); ++y) {
      auto h = k.value(n, pre * c.arity() + y);
      for (std::size_t t = 0; t < dim; ++t) acc[n][t] = acc[n - 1][t] + h[t];
      const double py = prob * c.probs[y];
      if (n == N) {
        self(self, n + 1, 0, py);
      } else {
        for (std::size_t x = 0; x < c.arity(); ++x) self(self, n + 1, pre * c.arity() + x, py * c.probs[x]);
      }
    }
  };
  rec(rec, 1, 0, 1.0);
}

}  // namespace detail

struct KernelMoments {
  double f = 0.0;  // E ||f_N||^p
  double g = 0.0;  // E ||g_N||^p
};

inline KernelMoments kernel_moments(const GeneratorKernel& k, double p, std::size_t N) {
  require_finite_p(p);
  if (N < 1 || N > k.depth()) throw ParameterError("N out of range");
  // The g walk visits every (x, y) prefix pair, i.e. the doubled space.
  std::uint64_t paths = 1;
  bool over = false;
  for (std::size_t i = 0; i < N; ++i)
    for (int twice = 0; twice < 2; ++twice) {
      const std::uint64_t a = k.space().arity(i);
      if (paths > std::numeric_limits<std::uint64_t>::max() / a) over = true;
      paths = over ? std::numeric_limits<std::uint64_t>::max() : paths * a;
    }
  if (over || paths > k.space().atom_cap())
    throw ResourceError("exact evaluation needs " + std::to_string(paths) + " doubled-space atoms, cap " +
                            std::to_string(k.space().atom_cap()),
                        paths);
  KahanSum f, g;
  detail::walk_f(k, N, [&](std::span<const double> v, double prob) { f += prob * pow_p(norm(v, k.banach()), p); });
  detail::walk_g(k, N, [&](std::span<const double> v, double prob) { g += prob * pow_p(norm(v, k.banach()), p); });
  return {f.value(), g.value()};
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace detail {

inline std::size_t sample_index(const Coordinate& c, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < c.arity(); ++j) {
    acc += c.probs[j];
    if (u < acc) return j;
  }
  return c.arity() - 1;
}

struct Welford {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const Welford& o) {
    if (o.n == 0) return;
    const double tot = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / tot;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / tot;
    n += o.n;
  }
};

/// Joint accumulator for (||f_N||^p, ||g_N||^p) on the same sampled paths.
struct McAccum {
  Welford f, g;
  double cross = 0.0;  // sum of (f - mean_f)(g - mean_g), merged Chan-style

  void add(double a, double b) {
    const double dfa = a - f.mean;
    f.add(a);
    g.add(b);
    cross += dfa * (b - g.mean);
  }
  void merge(const McAccum& o) {
    if (o.f.n == 0) return;
    const double tot = static_cast<double>(f.n + o.f.n);
    const double dfa = o.f.mean - f.mean;
    const double dgb = o.g.mean - g.mean;
    cross += o.cross + dfa * dgb * static_cast<double>(f.n) * static_cast<double>(o.f.n) / tot;
    f.merge(o.f);
    g.merge(o.g);
  }
};

inline constexpr std::uint64_t kMcChunk = 1024;

/// Samples paths in fixed chunks; chunk c draws from a stream seeded by
/// (seed, c), so the result is independent of the worker count.
inline McAccum mc_sample(const GeneratorKernel& k, double p, std::size_t N, const McOptions& opt) {
  const std::uint64_t chunks = (opt.samples + kMcChunk - 1) / kMcChunk;
  std::vector<McAccum> parts(chunks);
  parallel_for(chunks, opt.threads, [&](std::size_t c) {
    std::mt19937_64 rng(mix_seed(opt.seed, c));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::uint64_t begin = c * kMcChunk;
    const std::uint64_t end = std::min(opt.samples, begin + kMcChunk);
    const std::size_t dim = k.dim();
    Vec f(dim), g(dim);
    std::vector<std::size_t> x(N), y(N);
    for (std::uint64_t s = begin; s < end; ++s) {
      for (std::size_t n = 0; n < N; ++n) x[n] = sample_index(k.space().level(n), unif(rng));
      for (std::size_t n = 0; n < N; ++n) y[n] = sample_index(k.space().level(n), unif(rng));
      std::fill(f.begin(), f.end(), 0.0);
      std::fill(g.begin(), g.end(), 0.0);
      std::size_t pre = 0;
      for (std::size_t n = 1; n <= N; ++n) {
        const std::size_t a = k.space().arity(n - 1);
        auto hd = k.value(n, pre * a + x[n - 1]);
        auto he = k.value(n, pre * a + y[n - 1]);
        for (std::size_t t = 0; t < dim; ++t) {
          f[t] += hd[t];
          g[t] += he[t];
        }
        pre = pre * a + x[n - 1];
      }
      parts[c].add(pow_p(norm(f, k.banach()), p), pow_p(norm(g, k.banach()), p));
    }
  });
  McAccum total;
  for (const auto& part : parts) total.merge(part);
  return total;
}

}  // namespace detail

enum class SumKind { f, g };

/// Unbiased Monte Carlo estimate of E ||f_N||^p (or E ||g_N||^p).
inline ConstantEstimate lp_norm_mc(const GeneratorKernel& k, SumKind which, double p, std::size_t N,
                                   const McOptions& opt) {
  require_finite_p(p);
  if (opt.samples < 2) throw ParameterError("Monte Carlo needs at least 2 samples");
  if (N < 1 || N > k.depth()) throw ParameterError("N out of range");
  const auto acc = detail::mc_sample(k, p, N, opt);
  const auto& w = which == SumKind::f ? acc.f : acc.g;
  const double var = w.m2 / static_cast<double>(w.n - 1);
  ConstantEstimate est;
  est.value = w.mean;
  est.engine = Engine::mc;
  est.samples = w.n;
  est.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(w.n));
  est.seed = opt.seed;
  est.fingerprint = fingerprint_hex(k);
  return est;
}

// ---------------------------------------------------------------------------
// Decoupling ratio

enum class Status { ok, degenerate };
inline std::string to_string(Status s) { return s == Status::ok ? "ok" : "degenerate"; }

struct RatioResult {
  Status status = Status::ok;
  ConstantEstimate forward;  // (E||f_N||^p)^{1/p} / (E||g_N||^p)^{1/p}
  ConstantEstimate reverse;  // reciprocal direction
  double f_norm = 0.0;       // (E||f_N||^p)^{1/p}
  double g_norm = 0.0;       // (E||g_N||^p)^{1/p}

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["status"] = to_string(status);
    j["forward"] = forward.to_json();
    j["reverse"] = reverse.to_json();
    j["f_norm"] = f_norm;
    j["g_norm"] = g_norm;
    return j;
  }
};

namespace detail {

inline RatioResult ratio_from_norms(double fn, double gn, const std::string& fp) {
  RatioResult r;
  r.f_norm = fn;
  r.g_norm = gn;
  r.forward.fingerprint = r.reverse.fingerprint = fp;
  if (!(fn > 0.0) || !(gn > 0.0)) {
    r.status = Status::degenerate;
    r.forward.value = r.reverse.value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.forward.value = fn / gn;
  r.reverse.value = gn / fn;
  return r;
}

}  // namespace detail

/// Exact ratio on a pair (pair route).
inline RatioResult decoupling_ratio(const DecoupledPair& pair, double p, std::size_t N) {
  require_finite_p(p);
  if (N < 1 || N > pair.depth()) throw ParameterError("N out of range");
  const auto fs = partial_sums(pair.d);
  const auto gs = partial_sums(pair.e);
  const double fm = moment_exact(fs[N - 1], p, pair.doubled, pair.banach());
  const double gm = moment_exact(gs[N - 1], p, pair.doubled, pair.banach());
  return detail::ratio_from_norms(std::pow(fm, 1.0 / p), std::pow(gm, 1.0 / p), pair_fingerprint(pair));
}

/// Ratio from a kernel (kernel route for exact, path sampling for mc).
inline RatioResult decoupling_ratio(const GeneratorKernel& k, double p, std::size_t N, Engine engine = Engine::exact,
                                    const McOptions& mc = {}) {
  require_finite_p(p);
  if (engine == Engine::exact) {
    const auto m = kernel_moments(k, p, N);
    return detail::ratio_from_norms(std::pow(m.f, 1.0 / p), std::pow(m.g, 1.0 / p), fingerprint_hex(k));
  }
  if (mc.samples < 2) throw ParameterError("Monte Carlo needs at least 2 samples");
  if (N < 1 || N > k.depth()) throw ParameterError("N out of range");
  const auto acc = detail::mc_sample(k, p, N, mc);
  auto r = detail::ratio_from_norms(std::pow(acc.f.mean, 1.0 / p), std::pow(acc.g.mean, 1.0 / p), fingerprint_hex(k));
  for (auto* e : {&r.forward, &r.reverse}) {
    e->engine = Engine::mc;
    e->samples = acc.f.n;
    e->seed = mc.seed;
  }
  if (r.status == Status::ok) {
    // Delta method for (mf/mg)^{1/p} with the sample covariance of the paired draws.
    const double n = static_cast<double>(acc.f.n);
    const double vf = acc.f.m2 / (n - 1) / n, vg = acc.g.m2 / (n - 1) / n, cfg = acc.cross / (n - 1) / n;
    const double mf = acc.f.mean, mg = acc.g.mean;
    const double rel = vf / (mf * mf) + vg / (mg * mg) - 2.0 * cfg / (mf * mg);
    const double rel_se = std::sqrt(std::max(0.0, rel)) / p;
    r.forward.std_error = r.forward.value * rel_se;
    r.reverse.std_error = r.reverse.value * rel_se;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Weak type

struct WeakTypeResult {
  Status status = Status::ok;
  ConstantEstimate constant;  // sup_lambda lambda P(||f_N|| > lambda) / E||g_N||
  double level = 0.0;         // support point achieving the supremum
  double g_mean = 0.0;        // E ||g_N||

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["status"] = to_string(status);
    j["constant"] = constant.to_json();
    j["level"] = level;
    j["g_mean"] = g_mean;
    return j;
  }
};

namespace detail {

/// max over support points a of a * P(X >= a), from (value, prob) pairs.
inline std::pair<double, double> tail_scan(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  KahanSum tail;
  double best = 0.0, arg = 0.0;
  for (std::size_t i = 0; i < pts.size();) {
    const double a = pts[i].first;
    while (i < pts.size() && pts[i].first == a) tail += pts[i++].second;
    const double cand = a * tail.value();
    if (cand > best) {
      best = cand;
      arg = a;
    }
  }
  return {best, arg};
}

inline WeakTypeResult weak_from(std::vector<std::pair<double, double>> pts, double g_mean, const std::string& fp) {
  WeakTypeResult r;
  r.g_mean = g_mean;
  r.constant.fingerprint = fp;
  if (!(g_mean > 0.0)) {
    r.status = Status::degenerate;
    r.constant.value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const auto [best, arg] = tail_scan(std::move(pts));
  r.constant.value = best / g_mean;
  r.level = arg;
  return r;
}

}  // namespace detail

inline WeakTypeResult weak_type_constant(const DecoupledPair& pair, std::size_t N) {
  if (N < 1 || N > pair.depth()) throw ParameterError("N out of range");
  const auto fs = partial_sums(pair.d);
  const auto gs = partial_sums(pair.e);
  const auto& probs = pair.doubled.atom_probs();
  const auto fn = norms(fs[N - 1], pair.doubled, pair.banach());
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < probs.size(); ++i) pts.emplace_back(fn.values[i], probs[i]);
  const double gm = moment_exact(gs[N - 1], 1.0, pair.doubled, pair.banach());
  return detail::weak_from(std::move(pts), gm, pair_fingerprint(pair));
}

inline WeakTypeResult weak_type_constant(const GeneratorKernel& k, std::size_t N) {
  std::vector<std::pair<double, double>> pts;
  detail::walk_f(k, N, [&](std::span<const double> v, double prob) { pts.emplace_back(norm(v, k.banach()), prob); });
  return detail::weak_from(std::move(pts), kernel_moments(k, 1.0, N).g, fingerprint_hex(k));
}

// ---------------------------------------------------------------------------
// Maximal function against the supremum of L^p norms

struct SupComparison {
  double maximal_norm = 0.0;  // L = (E max_{n<=N} ||g_n||^p)^{1/p}
  double sup_of_norms = 0.0;  // R = max_{n<=N} (E ||g_n||^p)^{1/p}
  double factor = 0.0;        // 2^{1+1/p}

  bool holds(double tol = 1e-9) const {
    return sup_of_norms <= maximal_norm + tol && maximal_norm <= factor * sup_of_norms + tol;
  }
};

inline SupComparison sup_comparison(const DecoupledPair& pair, double p, std::size_t N) {
  require_finite_p(p);
  if (N < 1 || N > pair.depth()) throw ParameterError("N out of range");
  auto gs = partial_sums(pair.e);
  gs.resize(N);
  const auto mx = maximal(gs, pair.doubled, pair.banach());
  SupComparison s;
  s.factor = std::pow(2.0, 1.0 + 1.0 / p);
  s.maximal_norm = std::pow(weighted_power_sum(pair.doubled.atom_probs(), mx.star.values, p), 1.0 / p);
  for (const auto& g : gs) s.sup_of_norms = std::max(s.sup_of_norms, lp_norm_exact(g, p, pair.doubled, pair.banach()));
  return s;
}

// ---------------------------------------------------------------------------
// Good-lambda probe

struct GoodLambdaReport {
  GoodLambdaParams params;
  double g_moment = 0.0;            // E ||G_N||^p of the stopped small-part transform
  double prob_f1_star = 0.0;        // P(f1* > lambda)
  double bound_corrected = 0.0;     // 3^p delta^p lambda^p P(f1* > lambda)
  double bound_displayed = 0.0;     // 3^p delta^p P(f1* > lambda)
  double slack_corrected = 0.0;     // bound_corrected - g_moment
  double slack_displayed = 0.0;     // bound_displayed - g_moment (may be negative)
  double pointwise_slack = 0.0;     // min over atoms of 3 delta lambda 1{mu<inf} - E(||G_N||^p | G)^{1/p}
  double prob_event = 0.0;          // P(f1* > beta lambda, control < delta lambda)
  double prob_stopped = 0.0;        // P(mu < nu <= N, sigma = inf)
  double prob_transform = 0.0;      // P(||F_N|| > (beta - delta - 1) lambda)
  double slack_event = 0.0;         // prob_stopped - prob_event
  double slack_transform = 0.0;     // prob_transform - prob_stopped
  std::optional<double> implied_constant;  // weak-type constant C the transform pair needs
  bool tangent = false;             // stopped pair passes check_tangent
  bool ci = false;                  // stopped pair passes check_ci

  bool holds(double tol = 1e-10) const {
    return slack_corrected >= -tol && pointwise_slack >= -tol && slack_event >= -tol && slack_transform >= -tol;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["delta"] = params.delta;
    j["beta"] = params.beta;
    j["lambda"] = params.lambda;
    j["p"] = params.p;
    j["g_moment"] = g_moment;
    j["prob_f1_star"] = prob_f1_star;
    j["bound_corrected"] = bound_corrected;
    j["bound_displayed"] = bound_displayed;
    j["slack_corrected"] = slack_corrected;
    j["slack_displayed"] = slack_displayed;
    j["pointwise_slack"] = pointwise_slack;
    j["prob_event"] = prob_event;
    j["prob_stopped"] = prob_stopped;
    j["prob_transform"] = prob_transform;
    j["slack_event"] = slack_event;
    j["slack_transform"] = slack_transform;
    j["implied_constant"] = implied_constant ? nlohmann::ordered_json(*implied_constant) : nlohmann::ordered_json();
    j["tangent"] = tangent;
    j["ci"] = ci;
    j["holds"] = holds();
    return j;
  }
};

struct GoodLambdaRun {
  GoodLambdaReport report;
  DecoupledPair small;    // decouple(h1)
  StoppingTriple triple;
  DecoupledPair stopped;  // (F, G)
};

/// Runs the stopping-time construction on the small Davis part of `kernel`
/// and measures both sides of the conditional moment bound and of the
/// distribution-function chain.
inline GoodLambdaRun good_lambda_run(const GeneratorKernel& kernel, const GoodLambdaParams& params) {
  params.validate();
  const double p = params.p;
  const double dl = params.delta * params.lambda;
  const auto split = davis_split(kernel);
  const auto full = decouple(kernel);
  auto small = decouple(split.h1);
  const auto& space = small.doubled;
  const auto& banach = small.banach();
  const std::size_t N = small.depth();
  const int inf = static_cast<int>(N) + 1;

  const auto f1 = partial_sums(small.d);
  StoppingTriple st;
  st.params = params;
  st.mu = first_passage(f1, space, banach, params.lambda);
  st.nu = first_passage(f1, space, banach, params.beta * params.lambda);
  auto sig = build_sigma(small, params, &full);
  st.sigma = sig.sigma;
  auto stopped = stopped_transform(small, st);

  GoodLambdaReport r;
  r.params = params;
  const auto& probs = space.atom_probs();
  const auto Gs = partial_sums(stopped.e);
  const auto Fs = partial_sums(stopped.d);
  const auto Gn = norms(Gs.back(), space, banach);
  const auto Fn = norms(Fs.back(), space, banach);
  r.g_moment = weighted_power_sum(probs, Gn.values, p);

  const auto f1star = maximal(f1, space, banach).star;
  const auto dstar = maximal(full.d.diffs, space, banach).star;
  // control = max_n E(||g1_n||^p | G)^{1/p} v 4 d*
  std::vector<double> control(probs.size(), 0.0);
  for (const auto& m : sig.g_moment)
    for (std::size_t i = 0; i < probs.size(); ++i) control[i] = std::max(control[i], std::pow(m.values[i], 1.0 / p));
  for (std::size_t i = 0; i < probs.size(); ++i) control[i] = std::max(control[i], 4.0 * dstar.values[i]);

  LeafFn gpow = Gn;
  for (double& v : gpow.values) v = pow_p(v, p);
  const auto cond = cond_expect_on(gpow, space, small.g_field());

  KahanSum pf, pe, ps, pt;
  r.pointwise_slack = std::numeric_limits<double>::infinity();
  const double gap = (params.beta - params.delta - 1.0) * params.lambda;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool passed = f1star.values[i] > params.lambda;
    if (passed) pf += probs[i];
    if (f1star.values[i] > params.beta * params.lambda && control[i] < dl) pe += probs[i];
    if (st.mu.values[i] < st.nu.values[i] && st.nu.values[i] < inf && st.sigma.values[i] == inf) ps += probs[i];
    if (Fn.values[i] > gap) pt += probs[i];
    const double cap = passed ? 3.0 * dl : 0.0;
    r.pointwise_slack = std::min(r.pointwise_slack, cap - std::pow(cond.values[i], 1.0 / p));
  }
  r.prob_f1_star = pf.value();
  r.prob_event = pe.value();
  r.prob_stopped = ps.value();
  r.prob_transform = pt.value();
  r.bound_corrected = std::pow(3.0 * dl, p) * r.prob_f1_star;
  r.bound_displayed = std::pow(3.0 * params.delta, p) * r.prob_f1_star;
  r.slack_corrected = r.bound_corrected - r.g_moment;
  r.slack_displayed = r.bound_displayed - r.g_moment;
  r.slack_event = r.prob_stopped - r.prob_event;
  r.slack_transform = r.prob_transform - r.prob_stopped;
  if (r.g_moment > 0.0 && gap > 0.0)
    r.implied_constant = std::pow(r.prob_transform * std::pow(gap, p) / r.g_moment, 1.0 / p);
  r.tangent = check_tangent(stopped.d, stopped.e).ok;
  r.ci = check_ci(stopped).ok;
  return GoodLambdaRun{r, std::move(small), std::move(st), std::move(stopped)};
}

inline GoodLambdaReport good_lambda_probe(const GeneratorKernel& kernel, const GoodLambdaParams& params) {
  return good_lambda_run(kernel, params).report;
}

inline GoodLambdaReport good_lambda_probe(const DecoupledPair& pair, const GoodLambdaParams& params) {
  if (!pair.kernel) throw ContractError("good_lambda_probe needs a pair built from a generator kernel");
  return good_lambda_probe(*pair.kernel, params);
}

}  // namespace mdlab

#endif  // MDLAB_ESTIMATOR_HPP
