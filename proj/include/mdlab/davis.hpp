#ifndef MDLAB_DAVIS_HPP
#define MDLAB_DAVIS_HPP

// Davis decomposition of a generator kernel and the threshold split of a
// decoupled pair, with pointwise certificates for the inequalities they obey.

#include <string>
#include <vector>

#include "json.hpp"
#include "mdlab/martingale.hpp"

namespace mdlab {

/// h_n = h1_n + h2_n with
///   u_n  = h_n 1{||h_n|| <= 2 h*_{n-1}},  v_n = h_n 1{||h_n|| > 2 h*_{n-1}},
///   h1_n = u_n - E(u_n | x_<n),           h2_n = v_n + E(u_n | x_<n).
/// All tables live on the base space; hstar[n] = max_{m<=n} ||h_m|| with hstar[0] = 0.
struct DavisSplit {
  GeneratorKernel h;
  GeneratorKernel h1;
  GeneratorKernel h2;
  std::vector<LeafFn> u, v;   // n = 1..N
  std::vector<LeafFn> hstar;  // n = 0..N
};

inline DavisSplit davis_split(const GeneratorKernel& kernel) {
  const auto& space = kernel.space();
  const auto& banach = kernel.banach();
  const std::size_t N = kernel.depth();
  const std::size_t dim = kernel.dim();

  GeneratorKernel u(space, banach), v(space, banach), h1(space, banach), h2(space, banach);
  // hs[n] is compact over prefixes of length n.
  std::vector<std::vector<double>> hs(N + 1);
  hs[0] = {0.0};
  for (std::size_t n = 1; n <= N; ++n) {
    const std::size_t a = space.arity(n - 1);
    const auto& probs = space.level(n - 1).probs;
    hs[n].resize(kernel.prefix_count(n));
    for (std::size_t pre = 0; pre < kernel.prefix_count(n - 1); ++pre) {
      const double prev = hs[n - 1][pre];
      std::vector<KahanSum> mean(dim);
      for (std::size_t j = 0; j < a; ++j) {
        const std::size_t idx = pre * a + j;
        const auto hv = kernel.value(n, idx);
        const double nh = norm(hv, banach);
        hs[n][idx] = std::max(prev, nh);
        // Ties go to the small part.
        auto& target = nh <= 2.0 * prev ? u : v;
        std::copy(hv.begin(), hv.end(), target.value(n, idx).begin());
        for (std::size_t c = 0; c < dim; ++c) mean[c] += probs[j] * u.value(n, idx)[c];
      }
      for (std::size_t j = 0; j < a; ++j) {
        const std::size_t idx = pre * a + j;
        for (std::size_t c = 0; c < dim; ++c) {
          const double m = mean[c].value();
          h1.value(n, idx)[c] = u.value(n, idx)[c] - m;
          h2.value(n, idx)[c] = v.value(n, idx)[c] + m;
        }
      }
    }
  }

  DavisSplit s{kernel, h1, h2, {}, {}, {}};
  for (std::size_t n = 1; n <= N; ++n) {
    s.u.push_back(u.as_leaf(n));
    s.v.push_back(v.as_leaf(n));
  }
  for (std::size_t n = 0; n <= N; ++n) {
    LeafFn t = LeafFn::zeros(space, 1, n);
    const std::size_t stride = n == 0 ? space.atom_count() : space.strides()[n - 1];
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = hs[n][i / stride];
    s.hstar.push_back(std::move(t));
  }
  return s;
}

struct CertificateItem {
  std::string name;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  std::vector<int> atom;
};

struct DavisCertificate {
  CertificateItem large_parts;     // 2 h* - sum_n ||v_n||
  CertificateItem small_majorant;  // 4 h*_{n-1} - ||h1_n||
  CertificateItem small_bound;     // 2 h*_{n-1} - ||u_n||
  double reconstruction_error = 0.0;  // max |h1 + h2 - h|
  double centering_error = 0.0;       // max |E(h1_n | .)|, |E(h2_n | .)|
  double tolerance = 1e-10;

  bool ok() const {
    const double rec_tol = 1e-12;
    return large_parts.worst_slack >= -tolerance && small_majorant.worst_slack >= -tolerance &&
           small_bound.worst_slack >= -tolerance && reconstruction_error <= rec_tol &&
           centering_error <= tolerance;
  }

  nlohmann::ordered_json to_json() const {
    auto item = [](const CertificateItem& c) {
      nlohmann::ordered_json j;
      j["inequality"] = c.name;
      j["worst_slack"] = c.worst_slack;
      j["n"] = c.n;
      j["atom"] = c.atom;
      return j;
    };
    nlohmann::ordered_json j;
    j["ok"] = ok();
    j["tolerance"] = tolerance;
    j["checks"] = {item(large_parts), item(small_majorant), item(small_bound)};
    j["reconstruction_error"] = reconstruction_error;
    j["centering_error"] = centering_error;
    return j;
  }
};

namespace detail {

inline std::vector<int> atom_path(const CoordinateSpace& space, std::size_t atom) {
  std::vector<int> p(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    p[i] = static_cast<int>(atom / space.strides()[i]);
    atom %= space.strides()[i];
  }
  return p;
}

inline void record(CertificateItem& item, double slack, std::size_t n, const CoordinateSpace& space,
                   std::size_t atom) {
  if (slack < item.worst_slack) {
    item.worst_slack = slack;
    item.n = n;
    item.atom = atom_path(space, atom);
  }
}

}  // namespace detail

/// Verifies on every atom:
///   sum_n ||v_n|| <= 2 h*,   ||h1_n|| <= 4 h*_{n-1},   ||u_n|| <= 2 h*_{n-1},
/// plus the reconstruction h1 + h2 = h and the centering of both parts.
inline DavisCertificate certify_davis(const DavisSplit& s) {
  const auto& space = s.h.space();
  const auto& banach = s.h.banach();
  const std::size_t N = s.h.depth();
  DavisCertificate cert;
  cert.large_parts.name = "sum_n ||v_n|| <= 2 h*";
  cert.small_majorant.name = "||h1_n|| <= 4 h*_{n-1}";
  cert.small_bound.name = "||u_n|| <= 2 h*_{n-1}";
  const std::size_t atoms = space.atom_count();
  std::vector<double> vsum(atoms, 0.0);
  for (std::size_t n = 1; n <= N; ++n) {
    const auto h1 = s.h1.as_leaf(n);
    const auto h2 = s.h2.as_leaf(n);
    const auto h = s.h.as_leaf(n);
    for (std::size_t i = 0; i < atoms; ++i) {
      const double bound = s.hstar[n - 1].values[i];
      vsum[i] += norm(s.v[n - 1].at(i), banach);
      detail::record(cert.small_majorant, 4.0 * bound - norm(h1.at(i), banach), n, space, i);
      detail::record(cert.small_bound, 2.0 * bound - norm(s.u[n - 1].at(i), banach), n, space, i);
      for (std::size_t c = 0; c < h.dim; ++c)
        cert.reconstruction_error =
            std::max(cert.reconstruction_error, std::abs(h1.at(i)[c] + h2.at(i)[c] - h.at(i)[c]));
    }
  }
  for (std::size_t i = 0; i < atoms; ++i)
    detail::record(cert.large_parts, 2.0 * s.hstar[N].values[i] - vsum[i], N, space, i);
  cert.centering_error = std::max(s.h1.max_conditional_mean(), s.h2.max_conditional_mean());
  return cert;
}

/// Threshold split of a pair: a_n = max_{m<n} max(||d_m||, ||e_m||), a_1 = 0,
/// d'_n = d_n 1{||d_n|| <= 2 a_n}, d''_n = d_n 1{||d_n|| > 2 a_n}, same for e.
struct PairThresholdSplit {
  std::vector<LeafFn> a;  // n = 1..N+1
  MDS d_small, d_large, e_small, e_large;
  /// min over atoms and n of 2(a_{n+1} - a_n) - ||x''_n|| for x in {d, e}.
  double worst_slack = std::numeric_limits<double>::infinity();
};

inline PairThresholdSplit pair_threshold_split(const DecoupledPair& pair) {
  const auto& space = pair.doubled;
  const auto& banach = pair.banach();
  const std::size_t N = pair.depth();
  const std::size_t atoms = space.atom_count();
  PairThresholdSplit s;
  s.d_small = s.d_large = MDS{space, {}, banach};
  s.e_small = s.e_large = MDS{space, {}, banach};
  LeafFn a = LeafFn::zeros(space, 1, 0, pair.d.filtration());
  s.a.push_back(a);
  for (std::size_t n = 1; n <= N; ++n) {
    const auto& d = pair.d.diffs[n - 1];
    const auto& e = pair.e.diffs[n - 1];
    LeafFn ds = d, dl = d, es = e, el = e;
    LeafFn next = a;
    next.level = n;
    for (std::size_t i = 0; i < atoms; ++i) {
      const double nd = norm(d.at(i), banach);
      const double ne = norm(e.at(i), banach);
      const double thr = 2.0 * a.values[i];
      std::fill_n((nd <= thr ? dl : ds).at(i).begin(), d.dim, 0.0);
      std::fill_n((ne <= thr ? el : es).at(i).begin(), e.dim, 0.0);
      next.values[i] = std::max({a.values[i], nd, ne});
    }
    s.d_small.diffs.push_back(std::move(ds));
    s.d_large.diffs.push_back(std::move(dl));
    s.e_small.diffs.push_back(std::move(es));
    s.e_large.diffs.push_back(std::move(el));
    for (std::size_t i = 0; i < atoms; ++i) {
      const double room = 2.0 * (next.values[i] - a.values[i]);
      s.worst_slack = std::min(s.worst_slack, room - norm(s.d_large.diffs.back().at(i), banach));
      s.worst_slack = std::min(s.worst_slack, room - norm(s.e_large.diffs.back().at(i), banach));
    }
    s.a.push_back(next);
    a = std::move(next);
  }
  return s;
}

/// Martingale-difference check of all four parts; holds when the pair is
/// conditionally symmetric.
inline bool threshold_parts_are_mds(const PairThresholdSplit& s) {
  return check_mds(s.d_small).ok && check_mds(s.d_large).ok && check_mds(s.e_small).ok && check_mds(s.e_large).ok;
}

}  // namespace mdlab

#endif  // MDLAB_DAVIS_HPP
