#ifndef MDLAB_BANACH_HPP
#define MDLAB_BANACH_HPP

// Finite-dimensional Banach norms: l^p_d, weighted L^q(S; Y) over a finite
// measure space, and the trace (nuclear) norm on k x k real matrices.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mdlab/common.hpp"

namespace mdlab {

using Vec = std::vector<double>;

/// Exponent in [1, inf]; infinity is a distinguished state, never a large float.
class Exponent {
public:
  constexpr Exponent() = default;
  constexpr explicit Exponent(double p)
      : value_(p == std::numeric_limits<double>::infinity() ? 0.0 : p),
        infinite_(p == std::numeric_limits<double>::infinity()) {}
  static constexpr Exponent infinity() {
    Exponent e;
    e.infinite_ = true;
    e.value_ = 0.0;
    return e;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr double value() const { return value_; }
  bool valid() const { return infinite_ || (std::isfinite(value_) && value_ >= 1.0); }

  std::string to_string() const { return infinite_ ? "inf" : format_double(value_); }
  static Exponent parse(std::string_view s) {
    if (s == "inf" || s == "infinity") return infinity();
    return Exponent(parse_double(s));
  }

  friend bool operator==(const Exponent& a, const Exponent& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

private:
  double value_ = 2.0;
  bool infinite_ = false;
};

class SpaceDescriptor;

struct LpSpace {
  std::size_t dim = 1;
  Exponent p;
};

/// L^q(S; inner) with S a finite set carrying the given positive weights.
/// outer == 1 is the L^1(S; Y) case.
struct NestedSpace {
  std::vector<double> weights;
  Exponent outer{1.0};
  std::shared_ptr<const SpaceDescriptor> inner;
};

/// k x k real matrices (row-major, k*k coordinates) with the trace norm.
struct TraceSpace {
  std::size_t k = 1;
};

inline constexpr std::size_t kMaxTraceK = 8;

class SpaceDescriptor {
public:
  using Kind = std::variant<LpSpace, NestedSpace, TraceSpace>;

  SpaceDescriptor() : kind_(LpSpace{1, Exponent(2.0)}) {}
  explicit SpaceDescriptor(Kind k) : kind_(std::move(k)) { validate(); }

  static SpaceDescriptor lp(std::size_t dim, Exponent p) {
    return SpaceDescriptor(LpSpace{dim, p});
  }
  static SpaceDescriptor lp(std::size_t dim, double p) { return lp(dim, Exponent(p)); }
  static SpaceDescriptor linf(std::size_t dim) { return lp(dim, Exponent::infinity()); }
  static SpaceDescriptor hilbert(std::size_t dim) { return lp(dim, Exponent(2.0)); }
  static SpaceDescriptor l1_of(std::vector<double> weights, const SpaceDescriptor& inner) {
    return SpaceDescriptor(NestedSpace{std::move(weights), Exponent(1.0),
                                       std::make_shared<const SpaceDescriptor>(inner)});
  }
  static SpaceDescriptor lq_of(std::vector<double> weights, Exponent outer,
                               const SpaceDescriptor& inner) {
    return SpaceDescriptor(NestedSpace{std::move(weights), outer,
                                       std::make_shared<const SpaceDescriptor>(inner)});
  }
  static SpaceDescriptor trace(std::size_t k) { return SpaceDescriptor(TraceSpace{k}); }

  const Kind& kind() const { return kind_; }
  template <class T>
  const T* as() const {
    return std::get_if<T>(&kind_);
  }

  std::size_t dimension() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, LpSpace>)
            return s.dim;
          else if constexpr (std::is_same_v<S, NestedSpace>)
            return s.weights.size() * s.inner->dimension();
          else
            return s.k * s.k;
        },
        kind_);
  }

  /// True for l^2_d; the only spaces where the decoupling ratio at p = 2 is
  /// identically one.
  bool is_hilbert() const {
    const auto* l = as<LpSpace>();
    return l && !l->p.is_infinite() && l->p.value() == 2.0;
  }

  /// Canonical text form, e.g. `lp:dim=4,p=inf` or `l1of:weights=0.5,0.5;inner=lp:dim=2,p=2`.
  std::string to_string() const;
  static SpaceDescriptor parse(std::string_view text);

  friend bool operator==(const SpaceDescriptor& a, const SpaceDescriptor& b) {
    return a.to_string() == b.to_string();
  }

private:
  void validate() const;
  Kind kind_;
};

inline void SpaceDescriptor::validate() const {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LpSpace>) {
          if (s.dim < 1) throw InvalidDescriptor("lp: dim must be >= 1");
          if (!s.p.valid()) throw InvalidDescriptor("lp: p must be >= 1 or inf, got " + s.p.to_string());
        } else if constexpr (std::is_same_v<S, NestedSpace>) {
          if (s.weights.empty()) throw InvalidDescriptor("nested: at least one weight required");
          for (double w : s.weights)
            if (!(w > 0.0) || !std::isfinite(w))
              throw InvalidDescriptor("nested: weights must be positive and finite");
          if (!s.outer.valid()) throw InvalidDescriptor("nested: outer exponent must be >= 1 or inf");
          if (!s.inner) throw InvalidDescriptor("nested: missing inner space");
        } else {
          if (s.k < 1 || s.k > kMaxTraceK)
            throw InvalidDescriptor("trace: k must be in [1, " + std::to_string(kMaxTraceK) + "]");
        }
      },
      kind_);
}

inline std::string SpaceDescriptor::to_string() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LpSpace>) {
          return "lp:dim=" + std::to_string(s.dim) + ",p=" + s.p.to_string();
        } else if constexpr (std::is_same_v<S, NestedSpace>) {
          std::string w;
          for (std::size_t i = 0; i < s.weights.size(); ++i) {
            if (i) w += ',';
            w += format_double(s.weights[i]);
          }
          if (!s.outer.is_infinite() && s.outer.value() == 1.0)
            return "l1of:weights=" + w + ";inner=" + s.inner->to_string();
          return "lqof:q=" + s.outer.to_string() + ";weights=" + w + ";inner=" + s.inner->to_string();
        } else {
          return "trace:k=" + std::to_string(s.k);
        }
      },
      kind_);
}

namespace detail {

inline std::string_view take_key(std::string_view item, std::string_view key) {
  if (item.size() <= key.size() || item.substr(0, key.size()) != key || item[key.size()] != '=')
    return {};
  return item.substr(key.size() + 1);
}

inline std::vector<double> parse_weights(std::string_view list) {
  std::vector<double> w;
  for (const auto& t : split(list, ',')) w.push_back(parse_double(t));
  return w;
}

}  // namespace detail

inline SpaceDescriptor SpaceDescriptor::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ParseError("space descriptor needs a kind prefix: '" + std::string(text) + "'");
  const auto kind = text.substr(0, colon);
  const auto body = text.substr(colon + 1);
  try {
    if (kind == "lp") {
      std::size_t dim = 0;
      std::optional<Exponent> p;
      for (const auto& item : split(body, ',')) {
        if (auto v = detail::take_key(item, "dim"); !v.empty())
          dim = static_cast<std::size_t>(parse_int(v));
        else if (auto v2 = detail::take_key(item, "p"); !v2.empty())
          p = Exponent::parse(v2);
        else
          throw ParseError("lp: unknown field '" + item + "'");
      }
      if (!p) throw ParseError("lp: missing p");
      return lp(dim, *p);
    }
    if (kind == "trace") {
      auto v = detail::take_key(body, "k");
      if (v.empty()) throw ParseError("trace: expected k=<int>");
      return trace(static_cast<std::size_t>(parse_int(v)));
    }
    if (kind == "l1of" || kind == "lqof") {
      // inner= swallows the remainder so nested descriptors may contain ';'.
      const auto ipos = body.find("inner=");
      if (ipos == std::string_view::npos) throw ParseError(std::string(kind) + ": missing inner=");
      auto head = body.substr(0, ipos);
      if (!head.empty() && head.back() == ';') head.remove_suffix(1);
      const auto inner = parse(body.substr(ipos + 6));
      std::vector<double> weights;
      Exponent q(1.0);
      for (const auto& item : split(head, ';')) {
        if (item.empty()) continue;
        if (auto v = detail::take_key(item, "weights"); !v.empty())
          weights = detail::parse_weights(v);
        else if (auto v2 = detail::take_key(item, "q"); !v2.empty() && kind == "lqof")
          q = Exponent::parse(v2);
        else
          throw ParseError(std::string(kind) + ": unknown field '" + item + "'");
      }
      return lq_of(std::move(weights), q, inner);
    }
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()) + " in '" + std::string(text) + "'");
  }
  throw ParseError("unknown space kind '" + std::string(kind) + "'");
}

namespace detail {

inline double lp_norm(std::span<const double> v, const Exponent& p) {
  double mx = 0.0;
  for (double x : v) mx = std::max(mx, std::abs(x));
  if (p.is_infinite() || mx == 0.0) return mx;
  const double q = p.value();
  if (q == 1.0) {
    KahanSum s;
    for (double x : v) s += std::abs(x);
    return s.value();
  }
  KahanSum s;
  if (q == 2.0) {
    for (double x : v) s += (x / mx) * (x / mx);
    return mx * std::sqrt(s.value());
  }
  for (double x : v) s += std::pow(std::abs(x) / mx, q);
  return mx * std::pow(s.value(), 1.0 / q);
}

/// Singular values of a k x k row-major matrix by one-sided (Hestenes) Jacobi.
inline std::vector<double> singular_values(std::span<const double> a, std::size_t k) {
  // Work on columns: col j is a[i*k + j].
  std::vector<double> m(a.begin(), a.end());
  auto at = [&](std::size_t i, std::size_t j) -> double& { return m[i * k + j]; };
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double alpha = 0, beta = 0, gamma = 0;
        for (std::size_t r = 0; r < k; ++r) {
          alpha += at(r, i) * at(r, i);
          beta += at(r, j) * at(r, j);
          gamma += at(r, i) * at(r, j);
        }
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < k; ++r) {
          const double xi = at(r, i), xj = at(r, j);
          at(r, i) = c * xi - s * xj;
          at(r, j) = s * xi + c * xj;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0;
    for (std::size_t r = 0; r < k; ++r) s += at(r, j) * at(r, j);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

}  // namespace detail

/// Norm of v in s. Throws StructuralError when v does not conform.
inline double norm(std::span<const double> v, const SpaceDescriptor& s) {
  if (v.size() != s.dimension())
    throw StructuralError("vector of length " + std::to_string(v.size()) + " does not conform to " +
                          s.to_string() + " (dimension " + std::to_string(s.dimension()) + ")");
  return std::visit(
      [&](const auto& sp) -> double {
        using S = std::decay_t<decltype(sp)>;
        if constexpr (std::is_same_v<S, LpSpace>) {
          return detail::lp_norm(v, sp.p);
        } else if constexpr (std::is_same_v<S, NestedSpace>) {
          const std::size_t block = sp.inner->dimension();
          std::vector<double> sections(sp.weights.size());
          for (std::size_t j = 0; j < sp.weights.size(); ++j)
            sections[j] = norm(v.subspan(j * block, block), *sp.inner);
          if (sp.outer.is_infinite()) return *std::max_element(sections.begin(), sections.end());
          const double q = sp.outer.value();
          KahanSum acc;
          for (std::size_t j = 0; j < sections.size(); ++j)
            acc += sp.weights[j] * (q == 1.0 ? sections[j] : std::pow(sections[j], q));
          return q == 1.0 ? acc.value() : std::pow(acc.value(), 1.0 / q);
        } else {
          double total = 0.0;
          for (double x : detail::singular_values(v, sp.k)) total += x;
          return total;
        }
      },
      s.kind());
}

/// a*x + y.
inline Vec axpy(double a, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw StructuralError("axpy: length mismatch " + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
  Vec out(y.begin(), y.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

/// Embeds a vector of `from` into `to` by zero padding, when the pair admits the
/// isometric (up to a common scale) padding used by dimension sweeps: l^p_d into
/// l^p_D, k x k into the top-left block of K x K, and uniform L^q(S;Y) with more
/// sections.
inline Vec embed(std::span<const double> v, const SpaceDescriptor& from, const SpaceDescriptor& to) {
  if (v.size() != from.dimension()) throw StructuralError("embed: vector does not conform");
  Vec out(to.dimension(), 0.0);
  if (from.as<LpSpace>() && to.as<LpSpace>()) {
    if (to.dimension() < from.dimension()) throw StructuralError("embed: target smaller than source");
    if (!(from.as<LpSpace>()->p == to.as<LpSpace>()->p)) throw StructuralError("embed: exponents differ");
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  if (const auto* f = from.as<TraceSpace>()) {
    const auto* t = to.as<TraceSpace>();
    if (!t || t->k < f->k) throw StructuralError("embed: incompatible trace spaces");
    for (std::size_t i = 0; i < f->k; ++i)
      for (std::size_t j = 0; j < f->k; ++j) out[i * t->k + j] = v[i * f->k + j];
    return out;
  }
  const auto* f = from.as<NestedSpace>();
  const auto* t = to.as<NestedSpace>();
  // Uniform weights rescale the norm by a constant, which ratios ignore.
  if (f && t && t->weights.size() >= f->weights.size() && f->outer == t->outer && *f->inner == *t->inner) {
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  throw StructuralError("embed: no padding from " + from.to_string() + " to " + to.to_string());
}

/// Same kind as `tmpl` with its size parameter replaced: dim for l^p, k for
/// trace, number of (uniform) sections for nested spaces.
inline SpaceDescriptor with_size(const SpaceDescriptor& tmpl, std::size_t size) {
  if (const auto* l = tmpl.as<LpSpace>()) return SpaceDescriptor::lp(size, l->p);
  if (tmpl.as<TraceSpace>()) return SpaceDescriptor::trace(size);
  const auto* n = tmpl.as<NestedSpace>();
  return SpaceDescriptor::lq_of(std::vector<double>(size, 1.0 / static_cast<double>(size)), n->outer,
                                *n->inner);
}

}  // namespace mdlab

#endif  // MDLAB_BANACH_HPP
