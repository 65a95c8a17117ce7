#ifndef MDLAB_KERNEL_IO_HPP
#define MDLAB_KERNEL_IO_HPP

// Text serialization of generator kernels.
//
//   format mdlab-kernel 1
//   space lp:dim=2,p=2
//   levels 2
//   arities 2 2
//   level 1 outcomes -1 1 probs 0.5 0.5
//   level 2 outcomes -1 1 probs 0.5 0.5
//   h 1
//   <one row of dim values per prefix x_1..x_n, lexicographic order>
//   h 2
//   ...
//   end
//
// Numbers use the shortest round-trip decimal form, so parse(serialize(k))
// reproduces k bit for bit.

#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "mdlab/martingale.hpp"

namespace mdlab {

inline std::string serialize(const GeneratorKernel& k) {
  std::string out = "format mdlab-kernel 1\n";
  out += "space " + k.banach().to_string() + "\n";
  out += "levels " + std::to_string(k.depth()) + "\n";
  out += "arities";
  for (std::size_t i = 0; i < k.depth(); ++i) out += " " + std::to_string(k.space().arity(i));
  out += "\n";
  for (std::size_t i = 0; i < k.depth(); ++i) {
    const auto& c = k.space().level(i);
    out += "level " + std::to_string(i + 1) + " outcomes";
    for (double o : c.outcomes) out += " " + format_double(o);
    out += " probs";
    for (double p : c.probs) out += " " + format_double(p);
    out += "\n";
  }
  for (std::size_t n = 1; n <= k.depth(); ++n) {
    out += "h " + std::to_string(n) + "\n";
    for (std::size_t pre = 0; pre < k.prefix_count(n); ++pre) {
      auto v = k.value(n, pre);
      for (std::size_t c = 0; c < v.size(); ++c) {
        if (c) out += ' ';
        out += format_double(v[c]);
      }
      out += "\n";
    }
  }
  out += "end\n";
  return out;
}

inline std::uint64_t fingerprint(const GeneratorKernel& k) { return fnv1a(serialize(k)); }
inline std::string fingerprint_hex(const GeneratorKernel& k) { return hex64(fingerprint(k)); }

namespace detail {

inline std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> t;
  std::string w;
  while (is >> w) t.push_back(w);
  return t;
}

}  // namespace detail

inline GeneratorKernel parse_kernel(std::istream& in, std::uint64_t atom_cap = kDefaultAtomCap) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++lineno;
      auto t = detail::tokens(line);
      if (t.empty() || t[0][0] == '#') continue;
      return t;
    }
    throw ParseError("kernel: unexpected end of input after line " + std::to_string(lineno));
  };
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("kernel line " + std::to_string(lineno) + ": " + msg);
  };

  auto t = next();
  if (t.size() != 3 || t[0] != "format" || t[1] != "mdlab-kernel" || t[2] != "1")
    throw fail("expected 'format mdlab-kernel 1'");
  t = next();
  if (t.size() != 2 || t[0] != "space") throw fail("expected 'space <descriptor>'");
  const auto banach = SpaceDescriptor::parse(t[1]);
  t = next();
  if (t.size() != 2 || t[0] != "levels") throw fail("expected 'levels <N>'");
  const auto N = static_cast<std::size_t>(parse_int(t[1]));
  if (N < 1) throw fail("levels must be >= 1");
  t = next();
  if (t.size() != N + 1 || t[0] != "arities") throw fail("expected 'arities' with " + std::to_string(N) + " entries");
  std::vector<std::size_t> arities;
  for (std::size_t i = 1; i <= N; ++i) arities.push_back(static_cast<std::size_t>(parse_int(t[i])));

  std::vector<Coordinate> levels;
  for (std::size_t i = 0; i < N; ++i) {
    t = next();
    const std::size_t a = arities[i];
    if (t.size() != 4 + 2 * a || t[0] != "level" || parse_int(t[1]) != static_cast<long long>(i + 1) ||
        t[2] != "outcomes" || t[3 + a] != "probs")
      throw fail("expected 'level " + std::to_string(i + 1) + " outcomes <" + std::to_string(a) + "> probs <" +
                 std::to_string(a) + ">'");
    Coordinate c;
    for (std::size_t j = 0; j < a; ++j) c.outcomes.push_back(parse_double(t[3 + j]));
    for (std::size_t j = 0; j < a; ++j) c.probs.push_back(parse_double(t[4 + a + j]));
    levels.push_back(std::move(c));
  }
  CoordinateSpace space(std::move(levels), atom_cap);

  std::vector<std::vector<double>> tables;
  std::size_t prefixes = 1;
  const std::size_t dim = banach.dimension();
  for (std::size_t n = 1; n <= N; ++n) {
    t = next();
    if (t.size() != 2 || t[0] != "h" || parse_int(t[1]) != static_cast<long long>(n))
      throw fail("expected 'h " + std::to_string(n) + "'");
    prefixes *= arities[n - 1];
    std::vector<double> table;
    table.reserve(prefixes * dim);
    for (std::size_t r = 0; r < prefixes; ++r) {
      t = next();
      if (t.size() != dim) throw fail("expected " + std::to_string(dim) + " values");
      for (const auto& w : t) table.push_back(parse_double(w));
    }
    tables.push_back(std::move(table));
  }
  t = next();
  if (t.size() != 1 || t[0] != "end") throw fail("expected 'end'");
  return GeneratorKernel(std::move(space), banach, std::move(tables));
}

inline GeneratorKernel parse_kernel(const std::string& text, std::uint64_t atom_cap = kDefaultAtomCap) {
  std::istringstream is(text);
  return parse_kernel(is, atom_cap);
}

inline GeneratorKernel load_kernel(const std::string& path, std::uint64_t atom_cap = kDefaultAtomCap) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open kernel file '" + path + "'");
  return parse_kernel(in, atom_cap);
}

inline void save_kernel(const GeneratorKernel& k, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write kernel file '" + path + "'");
  out << serialize(k);
}

}  // namespace mdlab

#endif  // MDLAB_KERNEL_IO_HPP
