#ifndef MDLAB_MARTINGALE_HPP
#define MDLAB_MARTINGALE_HPP

// Martingale difference sequences on finite product spaces and their decoupled
// tangent sequences.
//
// A generator kernel h_1..h_N (h_n a function of the first n coordinates with
// zero mean in the last one) determines both sequences on the doubled space:
//   d_n(x, y) = h_n(x_1, ..., x_{n-1}, x_n)
//   e_n(x, y) = h_n(x_1, ..., x_{n-1}, y_n)
// adapted to the interleaved filtration (x_1..x_n, y_1..y_n), with
// G = sigma(x-block).

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdlab/banach.hpp"
#include "mdlab/probspace.hpp"

namespace mdlab {

inline constexpr double kLawTolerance = 1e-12;
inline constexpr double kMartingaleTolerance = 1e-10;

/// h_1..h_N stored compactly: table n holds h_n over the level-n prefixes
/// (x_1..x_n) in lexicographic order, dim values each.
class GeneratorKernel {
public:
  GeneratorKernel(CoordinateSpace space, SpaceDescriptor banach, std::vector<std::vector<double>> tables)
      : space_(std::move(space)), banach_(std::move(banach)), tables_(std::move(tables)) {
    if (tables_.size() != space_.size())
      throw StructuralError("kernel needs one table per level: " + std::to_string(tables_.size()) + " vs " +
                            std::to_string(space_.size()));
    for (std::size_t n = 1; n <= depth(); ++n)
      if (tables_[n - 1].size() != prefix_count(n) * dim())
        throw StructuralError("kernel table h_" + std::to_string(n) + " has " +
                              std::to_string(tables_[n - 1].size()) + " values, expected " +
                              std::to_string(prefix_count(n) * dim()));
  }

  /// Zero kernel.
  GeneratorKernel(CoordinateSpace space, SpaceDescriptor banach)
      : GeneratorKernel(space, banach, zero_tables(space, banach.dimension())) {}

  const CoordinateSpace& space() const { return space_; }
  const SpaceDescriptor& banach() const { return banach_; }
  std::size_t depth() const { return space_.size(); }
  std::size_t dim() const { return banach_.dimension(); }

  std::size_t prefix_count(std::size_t n) const {
    std::size_t c = 1;
    for (std::size_t i = 0; i < n; ++i) c *= space_.arity(i);
    return c;
  }

  const std::vector<double>& table(std::size_t n) const { return tables_[n - 1]; }
  std::vector<double>& table(std::size_t n) { return tables_[n - 1]; }
  const std::vector<std::vector<double>>& tables() const { return tables_; }

  std::span<const double> value(std::size_t n, std::size_t prefix) const {
    return std::span<const double>(tables_[n - 1]).subspan(prefix * dim(), dim());
  }
  std::span<double> value(std::size_t n, std::size_t prefix) {
    return std::span<double>(tables_[n - 1]).subspan(prefix * dim(), dim());
  }

  /// h_n as a natural-filtration table on the base space.
  LeafFn as_leaf(std::size_t n) const {
    const std::size_t stride = space_.strides()[n - 1];
    LeafFn out = LeafFn::zeros(space_, dim(), n, Filtration::natural);
    for (std::size_t a = 0; a < out.atoms(); ++a) {
      auto v = value(n, a / stride);
      std::copy(v.begin(), v.end(), out.at(a).begin());
    }
    return out;
  }

  /// Largest |E(h_n | x_1..x_{n-1})| coordinate over all n and prefixes.
  double max_conditional_mean() const {
    double worst = 0.0;
    for (std::size_t n = 1; n <= depth(); ++n) {
      const auto& c = space_.level(n - 1);
      for (std::size_t pre = 0; pre < prefix_count(n - 1); ++pre)
        for (std::size_t k = 0; k < dim(); ++k) {
          KahanSum s;
          for (std::size_t j = 0; j < c.arity(); ++j) s += c.probs[j] * value(n, pre * c.arity() + j)[k];
          worst = std::max(worst, std::abs(s.value()));
        }
    }
    return worst;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& t : tables_)
      for (double x : t) m = std::max(m, std::abs(x));
    return m;
  }

  /// Throws ContractError if some h_n has nonzero conditional mean.
  void require_centered() const {
    const double dev = max_conditional_mean();
    if (dev > kMartingaleTolerance * std::max(1.0, max_abs()))
      throw ContractError("kernel has nonzero conditional mean (max deviation " + format_double(dev) + ")");
  }

  /// Subtracts from every h_n its conditional mean given x_1..x_{n-1}.
  void recenter() {
    for (std::size_t n = 1; n <= depth(); ++n) recenter_cylinder_all(n);
  }

  /// Recenters only the block of h_n sitting over one prefix x_1..x_{n-1}.
  void recenter_cylinder(std::size_t n, std::size_t prefix) {
    const auto& c = space_.level(n - 1);
    for (std::size_t k = 0; k < dim(); ++k) {
      KahanSum s;
      for (std::size_t j = 0; j < c.arity(); ++j) s += c.probs[j] * value(n, prefix * c.arity() + j)[k];
      const double mean = s.value();
      for (std::size_t j = 0; j < c.arity(); ++j) value(n, prefix * c.arity() + j)[k] -= mean;
    }
  }

  /// Builds a kernel from level-n tables on the base space (measurability is verified).
  static GeneratorKernel from_leaves(const CoordinateSpace& space, const SpaceDescriptor& banach,
                                     const std::vector<LeafFn>& h) {
    if (h.size() != space.size()) throw StructuralError("kernel needs one function per level");
    std::vector<std::vector<double>> tables(space.size());
    std::size_t prefixes = 1;
    for (std::size_t n = 1; n <= space.size(); ++n) {
      const auto& f = h[n - 1];
      check_conforms(f, space);
      if (f.dim != banach.dimension()) throw StructuralError("kernel value dimension mismatch");
      if (!is_measurable(f, space, Filtration::natural, n))
        throw ContractError("h_" + std::to_string(n) + " is not measurable at level " + std::to_string(n));
      prefixes *= space.arity(n - 1);
      const std::size_t stride = space.strides()[n - 1];
      tables[n - 1].resize(prefixes * f.dim);
      for (std::size_t pre = 0; pre < prefixes; ++pre) {
        auto v = f.at(pre * stride);
        std::copy(v.begin(), v.end(), tables[n - 1].begin() + static_cast<std::ptrdiff_t>(pre * f.dim));
      }
    }
    return GeneratorKernel(space, banach, std::move(tables));
  }

private:
  void recenter_cylinder_all(std::size_t n) {
    for (std::size_t pre = 0; pre < prefix_count(n - 1); ++pre) recenter_cylinder(n, pre);
  }

  static std::vector<std::vector<double>> zero_tables(const CoordinateSpace& s, std::size_t dim) {
    s.atom_count();  // enforces the atom cap before allocating
    std::vector<std::vector<double>> t;
    std::size_t c = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
      c *= s.arity(i);
      t.emplace_back(c * dim, 0.0);
    }
    return t;
  }

  CoordinateSpace space_;
  SpaceDescriptor banach_;
  std::vector<std::vector<double>> tables_;
};

/// Martingale difference sequence d_1..d_N; d_n is measurable at level n of
/// the filtration recorded in its tables.
struct MDS {
  CoordinateSpace space;
  std::vector<LeafFn> diffs;
  SpaceDescriptor banach;

  std::size_t depth() const { return diffs.size(); }
  Filtration filtration() const { return diffs.empty() ? Filtration::natural : diffs.front().filtration; }
};

struct DecoupledPair {
  CoordinateSpace base;
  CoordinateSpace doubled;
  std::optional<GeneratorKernel> kernel;  // absent after a y-dependent transform
  MDS d;
  MDS e;

  std::size_t depth() const { return d.depth(); }
  const SpaceDescriptor& banach() const { return d.banach; }
  Mask g_field() const { return x_block(doubled); }
};

/// Largest coordinate of |E(d_n | F_{n-1})| over n and atoms, with the first offender.
struct MdsCheck {
  bool ok = true;
  double max_deviation = 0.0;
  std::size_t n = 0;
  std::size_t atom = 0;
};

inline MdsCheck check_mds(const MDS& m, double tol = kMartingaleTolerance) {
  MdsCheck r;
  for (std::size_t n = 1; n <= m.depth(); ++n) {
    const auto ce = cond_expect_on(m.diffs[n - 1], m.space, revealed(m.space, m.filtration(), n - 1));
    for (std::size_t i = 0; i < ce.values.size(); ++i) {
      const double dev = std::abs(ce.values[i]);
      if (dev > r.max_deviation) {
        r.max_deviation = dev;
        if (dev > tol && r.ok) {
          r.ok = false;
          r.n = n;
          r.atom = i / ce.dim;
        }
      }
    }
  }
  return r;
}

/// Paley-Walsh generators f_n : {-1,1}^{n-1} -> X. Table n holds 2^{n-1}
/// vectors indexed lexicographically by (r_1..r_{n-1}), index 0 meaning -1.
struct PaleyWalshGenerators {
  std::size_t dim = 1;
  std::vector<std::vector<double>> f;

  std::size_t depth() const { return f.size(); }
};

/// d_n = r_n f_n(r_1, ..., r_{n-1}) on the Rademacher space.
inline MDS paley_walsh(const PaleyWalshGenerators& gens, const SpaceDescriptor& banach,
                       std::uint64_t atom_cap = kDefaultAtomCap) {
  if (gens.dim != banach.dimension()) throw StructuralError("generator dimension does not match space");
  const std::size_t n_levels = gens.depth();
  for (std::size_t n = 1; n <= n_levels; ++n)
    if (gens.f[n - 1].size() != (std::size_t{1} << (n - 1)) * gens.dim)
      throw StructuralError("generator f_" + std::to_string(n) + " has the wrong table size");
  auto space = CoordinateSpace::rademacher(n_levels, atom_cap);
  MDS m{space, {}, banach};
  for (std::size_t n = 1; n <= n_levels; ++n) {
    m.diffs.push_back(LeafFn::tabulate(space, gens.dim, n, Filtration::natural,
                                       [&](std::span<const int> path, std::span<double> out) {
                                         std::size_t pre = 0;
                                         for (std::size_t i = 0; i + 1 < n; ++i)
                                           pre = pre * 2 + static_cast<std::size_t>(path[i]);
                                         const double r = path[n - 1] ? 1.0 : -1.0;
                                         for (std::size_t k = 0; k < gens.dim; ++k)
                                           out[k] = r * gens.f[n - 1][pre * gens.dim + k];
                                       }));
  }
  return m;
}

/// Kernel h_n(x_1..x_n) = x_n f_n(x_1..x_{n-1}) on the Rademacher space.
inline GeneratorKernel kernel_from_paley_walsh(const PaleyWalshGenerators& gens, const SpaceDescriptor& banach,
                                               std::uint64_t atom_cap = kDefaultAtomCap) {
  if (gens.dim != banach.dimension()) throw StructuralError("generator dimension does not match space");
  std::vector<std::vector<double>> tables;
  for (std::size_t n = 1; n <= gens.depth(); ++n) {
    const std::size_t pre = std::size_t{1} << (n - 1);
    if (gens.f[n - 1].size() != pre * gens.dim)
      throw StructuralError("generator f_" + std::to_string(n) + " has the wrong table size");
    std::vector<double> t(2 * pre * gens.dim);
    for (std::size_t p = 0; p < pre; ++p)
      for (std::size_t k = 0; k < gens.dim; ++k) {
        const double v = gens.f[n - 1][p * gens.dim + k];
        t[(2 * p) * gens.dim + k] = -v;
        t[(2 * p + 1) * gens.dim + k] = v;
      }
    tables.push_back(std::move(t));
  }
  return GeneratorKernel(CoordinateSpace::rademacher(gens.depth(), atom_cap), banach, std::move(tables));
}

/// Inverse of kernel_from_paley_walsh for kernels on the Rademacher space.
inline PaleyWalshGenerators paley_walsh_from_kernel(const GeneratorKernel& k) {
  if (!k.space().is_rademacher()) throw ContractError("Paley-Walsh generators need a Rademacher space");
  PaleyWalshGenerators g{k.dim(), {}};
  for (std::size_t n = 1; n <= k.depth(); ++n) {
    std::vector<double> t(k.prefix_count(n - 1) * k.dim());
    for (std::size_t p = 0; p < k.prefix_count(n - 1); ++p)
      for (std::size_t c = 0; c < k.dim(); ++c) t[p * k.dim() + c] = k.value(n, 2 * p + 1)[c];
    g.f.push_back(std::move(t));
  }
  return g;
}

/// Kernel of a natural-filtration MDS on its own space (h_n = d_n).
inline GeneratorKernel kernel_from_mds(const MDS& m) {
  if (m.filtration() != Filtration::natural) throw ContractError("kernel_from_mds needs a natural filtration");
  return GeneratorKernel::from_leaves(m.space, m.banach, m.diffs);
}

/// The decoupled tangent sequence on the doubled space.
inline DecoupledPair decouple(const GeneratorKernel& kernel) {
  kernel.require_centered();
  const auto& base = kernel.space();
  auto doubled = doubled_space(base);
  const std::size_t N = base.size();
  const std::size_t dim = kernel.dim();
  DecoupledPair pair{base, doubled, kernel, MDS{doubled, {}, kernel.banach()}, MDS{doubled, {}, kernel.banach()}};
  for (std::size_t n = 1; n <= N; ++n) {
    LeafFn d = LeafFn::zeros(doubled, dim, n, Filtration::interleaved);
    LeafFn e = d;
    const std::size_t a_n = base.arity(n - 1);
    for_each_atom(doubled, [&](std::size_t idx, std::span<const int> path, double) {
      std::size_t pre = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) pre = pre * base.arity(i) + static_cast<std::size_t>(path[i]);
      auto dv = kernel.value(n, pre * a_n + static_cast<std::size_t>(path[n - 1]));
      auto ev = kernel.value(n, pre * a_n + static_cast<std::size_t>(path[N + n - 1]));
      std::copy(dv.begin(), dv.end(), d.at(idx).begin());
      std::copy(ev.begin(), ev.end(), e.at(idx).begin());
    });
    pair.d.diffs.push_back(std::move(d));
    pair.e.diffs.push_back(std::move(e));
  }
  return pair;
}

/// d_n = xi_n w_n and e_n = xi_n(x_1..x_{n-1}, y_n) w_n(x) for an adapted scalar
/// sequence xi and a predictable vector sequence w, both on the base space.
inline DecoupledPair multiplier_mds(const CoordinateSpace& space, const SpaceDescriptor& banach,
                                    const std::vector<LeafFn>& xi, const std::vector<LeafFn>& w) {
  if (xi.size() != space.size() || w.size() != space.size())
    throw StructuralError("multiplier_mds: need one xi_n and one w_n per level");
  std::vector<LeafFn> h;
  for (std::size_t n = 1; n <= space.size(); ++n) {
    const auto& x = xi[n - 1];
    const auto& v = w[n - 1];
    check_conforms(x, space);
    check_conforms(v, space);
    if (x.dim != 1) throw StructuralError("xi_" + std::to_string(n) + " must be scalar");
    if (v.dim != banach.dimension()) throw StructuralError("w_" + std::to_string(n) + " dimension mismatch");
    if (!is_measurable(x, space, Filtration::natural, n))
      throw ContractError("xi_" + std::to_string(n) + " is not measurable at level " + std::to_string(n));
    if (!is_measurable(v, space, Filtration::natural, n - 1))
      throw ContractError("w_" + std::to_string(n) + " is not predictable (level " + std::to_string(n - 1) + ")");
    LeafFn prod = LeafFn::zeros(space, v.dim, n);
    for (std::size_t a = 0; a < prod.atoms(); ++a)
      for (std::size_t k = 0; k < v.dim; ++k) prod.at(a)[k] = x.scalar(a) * v.at(a)[k];
    h.push_back(std::move(prod));
  }
  auto kernel = GeneratorKernel::from_leaves(space, banach, h);
  if (kernel.max_conditional_mean() > kMartingaleTolerance * std::max(1.0, kernel.max_abs()))
    throw ContractError("multiplier_mds: xi_n w_n has nonzero conditional mean");
  return decouple(kernel);
}

// ---------------------------------------------------------------------------
// Conditional laws

struct LawPoint {
  Vec value;
  double prob = 0.0;
};

/// Finite law with support points sorted lexicographically and merged within
/// kLawTolerance.
using Law = std::vector<LawPoint>;

inline bool laws_equal(const Law& a, const Law& b, double tol = kLawTolerance) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].prob - b[i].prob) > tol) return false;
    for (std::size_t k = 0; k < a[i].value.size(); ++k)
      if (std::abs(a[i].value[k] - b[i].value[k]) > tol) return false;
  }
  return true;
}

/// Law of a single table (unconditional).
inline Law law_of(const LeafFn& f, const CoordinateSpace& space);

/// Conditional law of f on every cylinder of the mask, indexed by cylinder key.
inline std::vector<Law> conditional_laws(const LeafFn& f, const CoordinateSpace& space, const Mask& mask) {
  check_conforms(f, space);
  const auto cyl = cylinders(space, mask);
  const auto& probs = space.atom_probs();
  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t dim = f.dim;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cyl.key[a] != cyl.key[b]) return cyl.key[a] < cyl.key[b];
    return std::lexicographical_compare(f.values.begin() + static_cast<std::ptrdiff_t>(a * dim),
                                        f.values.begin() + static_cast<std::ptrdiff_t>((a + 1) * dim),
                                        f.values.begin() + static_cast<std::ptrdiff_t>(b * dim),
                                        f.values.begin() + static_cast<std::ptrdiff_t>((b + 1) * dim));
  });
  std::vector<Law> laws(cyl.count);
  std::vector<KahanSum> mass(cyl.count);
  std::vector<std::vector<KahanSum>> point_mass(cyl.count);
  for (std::size_t i : order) {
    const std::size_t k = cyl.key[i];
    auto v = f.at(i);
    auto& law = laws[k];
    bool merged = false;
    if (!law.empty()) {
      const auto& last = law.back().value;
      merged = true;
      for (std::size_t c = 0; c < dim; ++c)
        if (std::abs(last[c] - v[c]) > kLawTolerance) {
          merged = false;
          break;
        }
    }
    if (!merged) {
      law.push_back(LawPoint{Vec(v.begin(), v.end()), 0.0});
      point_mass[k].emplace_back();
    }
    point_mass[k].back() += probs[i];
    mass[k] += probs[i];
  }
  for (std::size_t k = 0; k < cyl.count; ++k) {
    const double m = mass[k].value();
    for (std::size_t j = 0; j < laws[k].size(); ++j) laws[k][j].prob = point_mass[k][j].value() / m;
  }
  return laws;
}

inline Law law_of(const LeafFn& f, const CoordinateSpace& space) {
  return conditional_laws(f, space, Mask(space.size(), 0)).front();
}

/// Witness for a failed law comparison. `cylinder` is a path with -1 at the
/// coordinates the conditioning sigma-field does not reveal; n == 0 denotes
/// the joint (factorization) requirement of the (CI) condition.
struct LawWitness {
  std::size_t n = 0;
  std::vector<int> cylinder;
  Law first;
  Law second;
  std::string what;
};

struct LawCheck {
  bool ok = true;
  std::optional<LawWitness> witness;
  explicit operator bool() const { return ok; }
};

namespace detail {

inline std::vector<int> cylinder_path(const CoordinateSpace& space, const Mask& mask, std::size_t atom) {
  std::vector<int> path(space.size(), 0);
  std::size_t rem = atom;
  for (std::size_t i = 0; i < space.size(); ++i) {
    path[i] = static_cast<int>(rem / space.strides()[i]);
    rem %= space.strides()[i];
    if (!mask[i]) path[i] = -1;
  }
  return path;
}

inline std::vector<std::size_t> first_atom_per_key(const Cylinders& cyl) {
  std::vector<std::size_t> first(cyl.count, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < cyl.key.size(); ++i)
    if (first[cyl.key[i]] == static_cast<std::size_t>(-1)) first[cyl.key[i]] = i;
  return first;
}

inline double prob_of(const Law& law, std::span<const double> v) {
  for (const auto& pt : law) {
    bool eq = true;
    for (std::size_t c = 0; c < v.size(); ++c)
      if (std::abs(pt.value[c] - v[c]) > kLawTolerance) {
        eq = false;
        break;
      }
    if (eq) return pt.prob;
  }
  return 0.0;
}

}  // namespace detail

/// Tangency: for every n and every level-(n-1) cylinder, a_n and b_n have the
/// same conditional law. The witness is the first failure in (n, cylinder) order.
inline LawCheck check_tangent(const MDS& a, const MDS& b) {
  if (!(a.space == b.space) || a.depth() != b.depth())
    throw StructuralError("check_tangent: sequences live on different spaces");
  const auto filt = a.filtration();
  for (std::size_t n = 1; n <= a.depth(); ++n) {
    const auto mask = revealed(a.space, filt, n - 1);
    const auto la = conditional_laws(a.diffs[n - 1], a.space, mask);
    const auto lb = conditional_laws(b.diffs[n - 1], b.space, mask);
    for (std::size_t k = 0; k < la.size(); ++k) {
      if (!laws_equal(la[k], lb[k])) {
        const auto cyl = cylinders(a.space, mask);
        const auto first = detail::first_atom_per_key(cyl);
        return LawCheck{false, LawWitness{n, detail::cylinder_path(a.space, mask, first[k]), la[k], lb[k],
                                          "conditional laws of term " + std::to_string(n) + " differ"}};
      }
    }
  }
  return {};
}

/// (CI) condition for e with G = sigma(x-block): each e_n has the same law
/// given F_{n-1} as given G, and given G the e_n are independent. Singleton
/// events suffice on finite spaces.
inline LawCheck check_ci(const DecoupledPair& pair) {
  const auto& e = pair.e;
  const auto& space = e.space;
  const auto g_mask = pair.g_field();
  const auto g_cyl = cylinders(space, g_mask);
  std::vector<std::vector<Law>> given_g;
  for (std::size_t n = 1; n <= e.depth(); ++n) {
    const auto f_mask = revealed(space, e.filtration(), n - 1);
    const auto f_cyl = cylinders(space, f_mask);
    const auto given_past = conditional_laws(e.diffs[n - 1], space, f_mask);
    given_g.push_back(conditional_laws(e.diffs[n - 1], space, g_mask));
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < f_cyl.key.size(); ++i) {
      const auto key = std::make_pair(f_cyl.key[i], g_cyl.key[i]);
      if (!seen.insert(key).second) continue;
      if (!laws_equal(given_past[key.first], given_g.back()[key.second])) {
        return LawCheck{false, LawWitness{n, detail::cylinder_path(space, Mask(space.size(), 1), i),
                                          given_past[key.first], given_g.back()[key.second],
                                          "law of term " + std::to_string(n) +
                                              " given the past differs from its law given G"}};
      }
    }
  }
  // Joint law given G against the product of the G-marginals. Checking the
  // joint support is enough: if every joint atom carries product mass, the
  // product measure has no mass left outside the joint support.
  const std::size_t dim = e.banach.dimension();
  const std::size_t N = e.depth();
  LeafFn joint = LeafFn::zeros(space, N * dim);
  for (std::size_t i = 0; i < joint.atoms(); ++i)
    for (std::size_t n = 0; n < N; ++n) {
      auto v = e.diffs[n].at(i);
      std::copy(v.begin(), v.end(), joint.at(i).begin() + static_cast<std::ptrdiff_t>(n * dim));
    }
  const auto joint_laws = conditional_laws(joint, space, g_mask);
  const auto first = detail::first_atom_per_key(g_cyl);
  for (std::size_t k = 0; k < joint_laws.size(); ++k) {
    for (const auto& pt : joint_laws[k]) {
      double prod = 1.0;
      for (std::size_t n = 0; n < N; ++n)
        prod *= detail::prob_of(given_g[n][k], std::span<const double>(pt.value).subspan(n * dim, dim));
      if (std::abs(prod - pt.prob) > kLawTolerance) {
        Law product;
        product.push_back(LawPoint{pt.value, prod});
        return LawCheck{false, LawWitness{0, detail::cylinder_path(space, g_mask, first[k]), Law{pt}, product,
                                          "joint law given G does not factorize"}};
      }
    }
  }
  return {};
}

/// f_n = d_1 + ... + d_n.
inline std::vector<LeafFn> partial_sums(const MDS& m) {
  std::vector<LeafFn> out;
  for (std::size_t n = 1; n <= m.depth(); ++n) {
    LeafFn f = n == 1 ? m.diffs[0] : out.back();
    if (n > 1)
      for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] += m.diffs[n - 1].values[i];
    f.level = n;
    f.filtration = m.diffs[n - 1].filtration;
    out.push_back(std::move(f));
  }
  return out;
}

struct MaximalFn {
  LeafFn star;                  // sup_n ||f_n||
  std::vector<LeafFn> running;  // f_n^* = max_{m <= n} ||f_m||
};

inline MaximalFn maximal(const std::vector<LeafFn>& fs, const CoordinateSpace& space, const SpaceDescriptor& banach) {
  MaximalFn out;
  if (fs.empty()) {
    out.star = LeafFn::zeros(space, 1);
    return out;
  }
  for (std::size_t n = 0; n < fs.size(); ++n) {
    LeafFn nf = norms(fs[n], space, banach);
    if (n > 0)
      for (std::size_t i = 0; i < nf.values.size(); ++i)
        nf.values[i] = std::max(nf.values[i], out.running.back().values[i]);
    out.running.push_back(std::move(nf));
  }
  out.star = out.running.back();
  return out;
}

// ---------------------------------------------------------------------------
// Stopping times and stopped transforms

/// Values in [0, N+1]; N+1 encodes +infinity.
struct StoppingTime {
  std::vector<int> values;  // per atom

  static StoppingTime constant(std::size_t atoms, int v) { return {std::vector<int>(atoms, v)}; }
};

struct GoodLambdaParams {
  double delta = 0.5;
  double beta = 2.0;
  double lambda = 1.0;
  double p = 1.0;

  void validate() const {
    if (!(delta >= 0.0) || !(lambda >= 0.0)) throw ParameterError("good-lambda: need delta >= 0 and lambda >= 0");
    if (!(beta > 1.0 + delta)) throw ParameterError("good-lambda: need beta > 1 + delta");
    if (!(p >= 1.0) || !std::isfinite(p)) throw ParameterError("good-lambda: need finite p >= 1");
  }
};

struct StoppingTriple {
  StoppingTime mu, nu, sigma;
  GoodLambdaParams params;
};

/// {tau <= n} is measurable at level n for every n.
inline bool is_stopping_time(const StoppingTime& tau, const CoordinateSpace& space, Filtration filt,
                             std::size_t depth) {
  if (tau.values.size() != space.atom_count()) throw StructuralError("stopping time table size mismatch");
  for (int v : tau.values)
    if (v < 0 || v > static_cast<int>(depth) + 1) return false;
  for (std::size_t n = 0; n <= depth; ++n) {
    LeafFn ind = LeafFn::zeros(space, 1, n, filt);
    for (std::size_t i = 0; i < tau.values.size(); ++i) ind.values[i] = tau.values[i] <= static_cast<int>(n) ? 1 : 0;
    if (!is_measurable(ind, space, filt, n)) return false;
  }
  return true;
}

/// inf{n >= 1 : ||f_n|| > threshold}, N+1 if never.
inline StoppingTime first_passage(const std::vector<LeafFn>& fs, const CoordinateSpace& space,
                                  const SpaceDescriptor& banach, double threshold) {
  const int inf = static_cast<int>(fs.size()) + 1;
  StoppingTime t = StoppingTime::constant(space.atom_count(), inf);
  for (std::size_t n = fs.size(); n-- > 0;) {
    for (std::size_t i = 0; i < t.values.size(); ++i)
      if (norm(fs[n].at(i), banach) > threshold) t.values[i] = static_cast<int>(n) + 1;
  }
  return t;
}

/// F_n = sum_{k<=n} 1{mu < k <= nu ^ sigma} d_k and likewise for e.
inline DecoupledPair stopped_transform(const DecoupledPair& pair, const StoppingTriple& st) {
  const auto& space = pair.doubled;
  const std::size_t N = pair.depth();
  const auto filt = pair.d.filtration();
  for (const auto* tau : {&st.mu, &st.nu, &st.sigma})
    if (!is_stopping_time(*tau, space, filt, N)) throw ContractError("stopped_transform: invalid stopping time");
  for (std::size_t i = 0; i < st.mu.values.size(); ++i)
    if (st.mu.values[i] > st.nu.values[i]) throw ContractError("stopped_transform: mu > nu on some atom");

  DecoupledPair out{pair.base, pair.doubled, std::nullopt, MDS{space, {}, pair.banach()}, MDS{space, {}, pair.banach()}};
  bool g_measurable = pair.kernel.has_value();
  const auto g_mask = pair.g_field();
  std::vector<LeafFn> indicators;
  for (std::size_t k = 1; k <= N; ++k) {
    LeafFn ind = LeafFn::zeros(space, 1, k - 1, filt);
    for (std::size_t i = 0; i < ind.values.size(); ++i) {
      const int kk = static_cast<int>(k);
      const int upper = std::min(st.nu.values[i], st.sigma.values[i]);
      ind.values[i] = (st.mu.values[i] < kk && kk <= upper) ? 1.0 : 0.0;
    }
    if (!is_measurable(ind, space, filt, k - 1))
      throw ContractError("stopped_transform: indicator for k=" + std::to_string(k) + " is not predictable");
    g_measurable = g_measurable && is_measurable(ind, space, g_mask);
    LeafFn dk = pair.d.diffs[k - 1];
    LeafFn ek = pair.e.diffs[k - 1];
    for (std::size_t i = 0; i < ind.values.size(); ++i)
      if (ind.values[i] == 0.0) {
        std::fill_n(dk.at(i).begin(), dk.dim, 0.0);
        std::fill_n(ek.at(i).begin(), ek.dim, 0.0);
      }
    out.d.diffs.push_back(std::move(dk));
    out.e.diffs.push_back(std::move(ek));
    indicators.push_back(std::move(ind));
  }
  if (g_measurable) {
    // Indicators depend on x_1..x_{k-1} only: the result is decouple() of the
    // kernel 1_k(x_<k) h_k.
    auto kernel = *pair.kernel;
    const std::size_t ystride = pair.base.atom_count();
    for (std::size_t k = 1; k <= N; ++k) {
      const std::size_t stride = pair.base.strides()[k - 1];
      for (std::size_t pre = 0; pre < kernel.prefix_count(k); ++pre) {
        // Doubled atom with x-block prefix `pre` and zeros elsewhere.
        const std::size_t atom = pre * stride * ystride;
        if (indicators[k - 1].values[atom] == 0.0) {
          auto v = kernel.value(k, pre);
          std::fill(v.begin(), v.end(), 0.0);
        }
      }
    }
    out.kernel = std::move(kernel);
  }
  return out;
}

struct SigmaResult {
  StoppingTime sigma;
  std::vector<LeafFn> g_moment;  // E(||g_n||^p | G), n = 1..N
  bool moments_predictable = true;  // each moment depends on x_1..x_{n-1} only
};

/// sigma = inf{n : E(||g_n||^p | G)^{1/p} > delta*lambda or 4 d_n^* > delta*lambda}
/// where g comes from `pair` and d^* from `control` (the undecomposed pair).
inline SigmaResult build_sigma(const DecoupledPair& pair, const GoodLambdaParams& params,
                               const DecoupledPair* control = nullptr) {
  if (!(params.p >= 1.0)) throw ParameterError("build_sigma: p must be >= 1");
  const auto& ctl = control ? *control : pair;
  const auto& space = pair.doubled;
  const std::size_t N = pair.depth();
  const double level = params.delta * params.lambda;
  const auto gs = partial_sums(pair.e);
  const auto dstar = maximal(ctl.d.diffs, space, ctl.banach());
  const auto g_mask = pair.g_field();

  SigmaResult r{StoppingTime::constant(space.atom_count(), static_cast<int>(N) + 1), {}, true};
  for (std::size_t n = 1; n <= N; ++n) {
    LeafFn pw = norms(gs[n - 1], space, pair.banach());
    for (double& v : pw.values) v = std::pow(v, params.p);
    pw.level = 2 * N;
    LeafFn m = cond_expect_on(pw, space, g_mask);
    m.level = n - 1;
    Mask pred = Mask(space.size(), 0);
    for (std::size_t i = 0; i + 1 < n; ++i) pred[i] = 1;
    r.moments_predictable = r.moments_predictable && is_measurable(m, space, pred);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (r.sigma.values[i] != static_cast<int>(N) + 1) continue;
      const double root = std::pow(m.values[i], 1.0 / params.p);
      if (root > level || 4.0 * dstar.running[n - 1].values[i] > level) r.sigma.values[i] = static_cast<int>(n);
    }
    r.g_moment.push_back(std::move(m));
  }
  if (!is_stopping_time(r.sigma, space, pair.d.filtration(), N))
    throw ContractError("build_sigma: sigma is not a stopping time (pair does not satisfy (CI)?)");
  return r;
}

}  // namespace mdlab

#endif  // MDLAB_MARTINGALE_HPP
