#ifndef MDLAB_PROBSPACE_HPP
#define MDLAB_PROBSPACE_HPP

// Finite product probability spaces with the coordinate filtration.
//
// Atoms are enumerated in lexicographic path order with the first coordinate
// most significant, so atom index = sum_i path[i] * stride[i]. Tables of
// random variables are stored in that order.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdlab/banach.hpp"
#include "mdlab/common.hpp"

namespace mdlab {

struct Coordinate {
  std::vector<double> outcomes;
  std::vector<double> probs;

  std::size_t arity() const { return outcomes.size(); }

  static Coordinate rademacher() { return {{-1.0, 1.0}, {0.5, 0.5}}; }

  /// Uniform coordinate with `arity` equally spaced labels in [-1, 1]; arity 2
  /// gives the Rademacher labels -1, +1.
  static Coordinate uniform(std::size_t arity) {
    if (arity < 1) throw ParameterError("coordinate arity must be >= 1");
    Coordinate c;
    const double a = static_cast<double>(arity);
    for (std::size_t i = 0; i < arity; ++i) {
      c.outcomes.push_back(arity == 1 ? 0.0 : (2.0 * static_cast<double>(i) + 1.0 - a) / (a - 1.0));
      c.probs.push_back(1.0 / a);
    }
    return c;
  }
};

/// Which coordinates a level-n event may depend on.
///  natural:     coordinates 1..n.
///  interleaved: on a doubled space (x-block then y-block, N each), the
///               coordinates x_1..x_n and y_1..y_n.
enum class Filtration { natural, interleaved };

struct Atom {
  std::vector<int> path;
  double prob = 0.0;
};

class CoordinateSpace {
public:
  CoordinateSpace() = default;
  explicit CoordinateSpace(std::vector<Coordinate> levels, std::uint64_t atom_cap = kDefaultAtomCap)
      : levels_(std::move(levels)), cap_(atom_cap) {
    if (levels_.empty()) throw ParameterError("coordinate space needs at least one level");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      const auto& c = levels_[i];
      if (c.outcomes.empty() || c.outcomes.size() != c.probs.size())
        throw ParameterError("level " + std::to_string(i + 1) + ": outcomes/probs mismatch");
      KahanSum total;
      for (double p : c.probs) {
        if (!(p > 0.0)) throw ParameterError("level " + std::to_string(i + 1) + ": probabilities must be > 0");
        total += p;
      }
      if (std::abs(total.value() - 1.0) > 1e-12)
        throw ParameterError("level " + std::to_string(i + 1) + ": probabilities sum to " +
                             format_double(total.value()));
      for (std::size_t a = 0; a < c.outcomes.size(); ++a)
        for (std::size_t b = a + 1; b < c.outcomes.size(); ++b)
          if (c.outcomes[a] == c.outcomes[b])
            throw ParameterError("level " + std::to_string(i + 1) + ": duplicate outcome label");
    }
    required_ = 1;
    for (const auto& c : levels_) {
      const auto a = static_cast<std::uint64_t>(c.arity());
      required_ = required_ > std::numeric_limits<std::uint64_t>::max() / a
                      ? std::numeric_limits<std::uint64_t>::max()
                      : required_ * a;
    }
    strides_.assign(levels_.size(), 1);
    for (std::size_t i = levels_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * levels_[i].arity();
    if (required_ <= cap_) {
      auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(required_));
      std::vector<int> path(levels_.size(), 0);
      for (std::size_t idx = 0; idx < probs->size(); ++idx) {
        double p = 1.0;
        for (std::size_t i = 0; i < levels_.size(); ++i) p *= levels_[i].probs[static_cast<std::size_t>(path[i])];
        (*probs)[idx] = p;
        advance(path);
      }
      probs_ = std::move(probs);
    }
  }

  static CoordinateSpace rademacher(std::size_t n, std::uint64_t cap = kDefaultAtomCap) {
    return CoordinateSpace(std::vector<Coordinate>(n, Coordinate::rademacher()), cap);
  }
  static CoordinateSpace uniform(std::size_t n, std::size_t arity, std::uint64_t cap = kDefaultAtomCap) {
    return CoordinateSpace(std::vector<Coordinate>(n, Coordinate::uniform(arity)), cap);
  }

  std::size_t size() const { return levels_.size(); }
  const Coordinate& level(std::size_t i) const { return levels_[i]; }
  const std::vector<Coordinate>& levels() const { return levels_; }
  std::size_t arity(std::size_t i) const { return levels_[i].arity(); }
  std::uint64_t atom_cap() const { return cap_; }
  std::uint64_t required_atoms() const { return required_; }
  const std::vector<std::size_t>& strides() const { return strides_; }

  bool is_rademacher() const {
    for (const auto& c : levels_)
      if (c.outcomes != std::vector<double>{-1.0, 1.0} || c.probs != std::vector<double>{0.5, 0.5})
        return false;
    return true;
  }

  /// Number of atoms; throws ResourceError naming the required count when the cap is exceeded.
  std::size_t atom_count() const {
    if (!probs_)
      throw ResourceError("atom count " + std::to_string(required_) + " exceeds cap " + std::to_string(cap_),
                          required_);
    return probs_->size();
  }
  const std::vector<double>& atom_probs() const {
    atom_count();
    return *probs_;
  }

  /// Increments a path in lexicographic order (last coordinate fastest).
  void advance(std::vector<int>& path) const {
    for (std::size_t i = levels_.size(); i-- > 0;) {
      if (static_cast<std::size_t>(++path[i]) < levels_[i].arity()) return;
      path[i] = 0;
    }
  }

  std::size_t index_of(std::span<const int> path) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < path.size(); ++i) idx += static_cast<std::size_t>(path[i]) * strides_[i];
    return idx;
  }

  friend bool operator==(const CoordinateSpace& a, const CoordinateSpace& b) {
    if (a.levels_.size() != b.levels_.size()) return false;
    for (std::size_t i = 0; i < a.levels_.size(); ++i)
      if (a.levels_[i].outcomes != b.levels_[i].outcomes || a.levels_[i].probs != b.levels_[i].probs)
        return false;
    return true;
  }

private:
  std::vector<Coordinate> levels_;
  std::uint64_t cap_ = kDefaultAtomCap;
  std::uint64_t required_ = 0;
  std::vector<std::size_t> strides_;
  std::shared_ptr<const std::vector<double>> probs_;
};

/// Calls fn(index, path, prob) for every atom in lexicographic order.
template <class Fn>
void for_each_atom(const CoordinateSpace& space, Fn&& fn) {
  const auto& probs = space.atom_probs();
  std::vector<int> path(space.size(), 0);
  for (std::size_t idx = 0; idx < probs.size(); ++idx) {
    fn(idx, std::span<const int>(path), probs[idx]);
    space.advance(path);
  }
}

inline std::vector<Atom> atoms(const CoordinateSpace& space) {
  std::vector<Atom> out;
  out.reserve(space.atom_count());
  for_each_atom(space, [&](std::size_t, std::span<const int> path, double p) {
    out.push_back(Atom{std::vector<int>(path.begin(), path.end()), p});
  });
  return out;
}

/// x-block followed by an independent copy (the y-block).
inline CoordinateSpace doubled_space(const CoordinateSpace& space) {
  auto levels = space.levels();
  levels.insert(levels.end(), space.levels().begin(), space.levels().end());
  CoordinateSpace out(std::move(levels), space.atom_cap());
  out.atom_count();
  return out;
}

/// Coordinates revealed at `level` of the given filtration.
using Mask = std::vector<char>;

inline Mask revealed(const CoordinateSpace& space, Filtration f, std::size_t level) {
  Mask m(space.size(), 0);
  if (f == Filtration::natural) {
    if (level > space.size()) throw ParameterError("level " + std::to_string(level) + " out of range");
    for (std::size_t i = 0; i < level; ++i) m[i] = 1;
  } else {
    if (space.size() % 2 != 0) throw StructuralError("interleaved filtration needs a doubled space");
    const std::size_t n = space.size() / 2;
    if (level > n) throw ParameterError("level " + std::to_string(level) + " out of range");
    for (std::size_t i = 0; i < level; ++i) m[i] = m[n + i] = 1;
  }
  return m;
}

/// sigma(x-block) on a doubled space.
inline Mask x_block(const CoordinateSpace& doubled) {
  if (doubled.size() % 2 != 0) throw StructuralError("x-block needs a doubled space");
  Mask m(doubled.size(), 0);
  for (std::size_t i = 0; i < doubled.size() / 2; ++i) m[i] = 1;
  return m;
}

/// Dense cylinder index per atom for the sigma-field generated by the revealed
/// coordinates. Keys are ordered lexicographically by the revealed sub-path.
struct Cylinders {
  std::vector<std::size_t> key;  // per atom
  std::size_t count = 0;
};

inline Cylinders cylinders(const CoordinateSpace& space, const Mask& mask) {
  std::vector<std::size_t> radix(space.size(), 0);
  std::size_t count = 1;
  for (std::size_t i = space.size(); i-- > 0;) {
    if (mask[i]) {
      radix[i] = count;
      count *= space.arity(i);
    }
  }
  Cylinders c;
  c.count = count;
  c.key.resize(space.atom_count());
  for_each_atom(space, [&](std::size_t idx, std::span<const int> path, double) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < path.size(); ++i)
      if (mask[i]) k += static_cast<std::size_t>(path[i]) * radix[i];
    c.key[idx] = k;
  });
  return c;
}

/// A random variable on a finite space: one Vec (or scalar, dim 1) per atom.
/// `level` declares measurability with respect to `filtration`.
struct LeafFn {
  std::size_t dim = 1;
  std::size_t level = 0;
  Filtration filtration = Filtration::natural;
  std::vector<double> values;

  std::size_t atoms() const { return dim ? values.size() / dim : 0; }
  std::span<const double> at(std::size_t atom) const {
    return std::span<const double>(values).subspan(atom * dim, dim);
  }
  std::span<double> at(std::size_t atom) { return std::span<double>(values).subspan(atom * dim, dim); }
  double scalar(std::size_t atom) const { return values[atom * dim]; }

  static LeafFn zeros(const CoordinateSpace& space, std::size_t dim, std::size_t level = 0,
                      Filtration f = Filtration::natural) {
    return LeafFn{dim, level, f, std::vector<double>(space.atom_count() * dim, 0.0)};
  }

  /// Fills a table from fn(path, out) where out has length dim.
  template <class Fn>
  static LeafFn tabulate(const CoordinateSpace& space, std::size_t dim, std::size_t level, Filtration f,
                         Fn&& fn) {
    LeafFn out = zeros(space, dim, level, f);
    for_each_atom(space, [&](std::size_t idx, std::span<const int> path, double) { fn(path, out.at(idx)); });
    return out;
  }

  template <class Fn>
  static LeafFn scalar_fn(const CoordinateSpace& space, std::size_t level, Filtration f, Fn&& fn) {
    return tabulate(space, 1, level, f,
                    [&](std::span<const int> path, std::span<double> out) { out[0] = fn(path); });
  }
};

inline void check_conforms(const LeafFn& f, const CoordinateSpace& space) {
  if (f.dim == 0 || f.values.size() != space.atom_count() * f.dim)
    throw StructuralError("table of " + std::to_string(f.values.size()) + " values does not conform to " +
                          std::to_string(space.atom_count()) + " atoms x dim " + std::to_string(f.dim));
}

/// E f for a scalar table.
inline double expect(const LeafFn& f, const CoordinateSpace& space) {
  check_conforms(f, space);
  if (f.dim != 1) throw StructuralError("expect: scalar table required");
  const auto& probs = space.atom_probs();
  KahanSum s;
  for (std::size_t i = 0; i < probs.size(); ++i) s += probs[i] * f.values[i];
  return s.value();
}

/// Coordinatewise E f.
inline Vec expect_vec(const LeafFn& f, const CoordinateSpace& space) {
  check_conforms(f, space);
  const auto& probs = space.atom_probs();
  std::vector<KahanSum> s(f.dim);
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (std::size_t c = 0; c < f.dim; ++c) s[c] += probs[i] * f.values[i * f.dim + c];
  Vec out(f.dim);
  for (std::size_t c = 0; c < f.dim; ++c) out[c] = s[c].value();
  return out;
}

/// Conditional expectation given the sigma-field of the revealed coordinates:
/// the probability-weighted average of f over each cylinder.
inline LeafFn cond_expect_on(const LeafFn& f, const CoordinateSpace& space, const Mask& mask) {
  check_conforms(f, space);
  const auto cyl = cylinders(space, mask);
  const auto& probs = space.atom_probs();
  std::vector<KahanSum> mass(cyl.count);
  std::vector<KahanSum> acc(cyl.count * f.dim);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::size_t k = cyl.key[i];
    mass[k] += probs[i];
    for (std::size_t c = 0; c < f.dim; ++c) acc[k * f.dim + c] += probs[i] * f.values[i * f.dim + c];
  }
  LeafFn out = f;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::size_t k = cyl.key[i];
    const double m = mass[k].value();
    for (std::size_t c = 0; c < f.dim; ++c) out.values[i * f.dim + c] = acc[k * f.dim + c].value() / m;
  }
  return out;
}

/// E(f | F_n) for f's own filtration. A function already measurable at a
/// level <= n is returned unchanged.
inline LeafFn cond_expect(const LeafFn& f, const CoordinateSpace& space, std::size_t n) {
  const std::size_t depth = f.filtration == Filtration::natural ? space.size() : space.size() / 2;
  if (n > depth) throw ParameterError("cond_expect: level " + std::to_string(n) + " out of range [0, " +
                                      std::to_string(depth) + "]");
  if (f.level <= n) {
    check_conforms(f, space);
    return f;
  }
  LeafFn out = cond_expect_on(f, space, revealed(space, f.filtration, n));
  out.level = n;
  return out;
}

/// True when f is constant (exactly) on every cylinder of the mask.
inline bool is_measurable(const LeafFn& f, const CoordinateSpace& space, const Mask& mask) {
  check_conforms(f, space);
  const auto cyl = cylinders(space, mask);
  std::vector<std::size_t> first(cyl.count, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < cyl.key.size(); ++i) {
    auto& r = first[cyl.key[i]];
    if (r == static_cast<std::size_t>(-1)) {
      r = i;
      continue;
    }
    for (std::size_t c = 0; c < f.dim; ++c)
      if (f.values[i * f.dim + c] != f.values[r * f.dim + c]) return false;
  }
  return true;
}

inline bool is_measurable(const LeafFn& f, const CoordinateSpace& space, Filtration filt, std::size_t level) {
  return is_measurable(f, space, revealed(space, filt, level));
}

/// Pointwise norms of a vector table.
inline LeafFn norms(const LeafFn& f, const CoordinateSpace& space, const SpaceDescriptor& banach) {
  check_conforms(f, space);
  LeafFn out{1, f.level, f.filtration, std::vector<double>(f.atoms())};
  for (std::size_t i = 0; i < f.atoms(); ++i) out.values[i] = norm(f.at(i), banach);
  return out;
}

/// Lifts a natural-filtration table on `base` to the x-block or the y-block of
/// its doubled space.
inline LeafFn lift_to_doubled(const LeafFn& f, const CoordinateSpace& base, const CoordinateSpace& doubled,
                              bool y_block = false) {
  check_conforms(f, base);
  const std::size_t n = base.size();
  LeafFn out = LeafFn::zeros(doubled, f.dim, f.level, Filtration::interleaved);
  for_each_atom(doubled, [&](std::size_t idx, std::span<const int> path, double) {
    const auto src = base.index_of(path.subspan(y_block ? n : 0, n));
    std::copy_n(f.values.begin() + static_cast<std::ptrdiff_t>(src * f.dim), f.dim,
                out.values.begin() + static_cast<std::ptrdiff_t>(idx * f.dim));
  });
  return out;
}

}  // namespace mdlab

#endif  // MDLAB_PROBSPACE_HPP
