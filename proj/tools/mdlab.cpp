// mdlab: command-line front end for ratios, searches, experiments and
// certificates. Exit codes: 0 success, 1 a contract verdict failed, 2 usage
// or input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdlab/davis.hpp"
#include "mdlab/estimator.hpp"
#include "mdlab/experiments.hpp"
#include "mdlab/kernel_io.hpp"
#include "mdlab/random.hpp"
#include "mdlab/search.hpp"

namespace fs = std::filesystem;
using namespace mdlab;
using json = nlohmann::ordered_json;

namespace {

struct Args {
  std::string space = "lp:dim=1,p=2";
  double p = 2.0;
  std::size_t n = 0;  // 0: kernel depth
  std::string engine = "exact";
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  std::uint64_t budget = 10000;
  unsigned restarts = 1;
  std::string out = ".";
  std::uint64_t atom_cap = kDefaultAtomCap;
  unsigned threads = 1;
  std::string config;
  std::string kernel;
  std::vector<std::size_t> dims;
  std::string mode = "decoupling";
  std::size_t arity = 2;

  // experiment
  std::string experiment;
  std::vector<double> weights{0.25, 0.75};

  // good-lambda
  double delta = 0.5, beta = 2.0, lambda = 0.0;
};

// Numbers on stdout keep a decimal point so integral values read as reals.
std::string num(double x) {
  auto s = format_double(x);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string out_path(const Args& a, const std::string& file) {
  fs::create_directories(a.out);
  return (fs::path(a.out) / file).string();
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << body;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

GeneratorKernel obtain_kernel(const Args& a, bool explicit_space) {
  if (!a.kernel.empty()) {
    auto k = load_kernel(a.kernel, a.atom_cap);
    if (explicit_space && !(SpaceDescriptor::parse(a.space) == k.banach()))
      throw ParameterError("--space " + a.space + " does not match the kernel's space " + k.banach().to_string());
    return k;
  }
  if (!explicit_space) throw ParameterError("--kernel is required (or give --space and --n to draw a random kernel)");
  if (a.n == 0) throw ParameterError("--n must be >= 1 for a random kernel");
  Rng rng(a.seed);
  const auto base = a.arity == 2 ? CoordinateSpace::rademacher(a.n, a.atom_cap)
                                 : CoordinateSpace::uniform(a.n, a.arity, a.atom_cap);
  return random_kernel(base, SpaceDescriptor::parse(a.space), rng);
}

std::size_t depth_of(const Args& a, const GeneratorKernel& k) {
  const std::size_t N = a.n ? a.n : k.depth();
  if (N > k.depth()) throw ParameterError("--n exceeds the kernel depth " + std::to_string(k.depth()));
  return N;
}

json provenance(const Args& a, const GeneratorKernel& k) {
  return {{"fingerprint", fingerprint_hex(k)}, {"seed", a.seed}, {"space", k.banach().to_string()}};
}

// Flat key=value config: each key names a long flag of the subcommand. Keys
// already present on the command line are skipped (flags win).
std::vector<std::string> with_config(std::vector<std::string> args) {
  std::string file;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") file = args[i + 1];
  for (const auto& s : args)
    if (s.rfind("--config=", 0) == 0) file = s.substr(9);
  if (file.empty()) return args;
  std::ifstream in(file);
  if (!in) throw CLI::FileError::Missing(file);
  std::set<std::string> given;
  for (const auto& s : args)
    if (s.rfind("--", 0) == 0) given.insert(s.substr(2, s.find('=') == std::string::npos ? std::string::npos
                                                                                         : s.find('=') - 2));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ConversionError(file + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto f = s.find_first_not_of(" \t\r");
      const auto l = s.find_last_not_of(" \t\r");
      return f == std::string::npos ? std::string() : s.substr(f, l - f + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (given.count(key)) continue;
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mdlab: decoupling constants of finite martingale difference sequences"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", a.config, "flat key=value file; keys are flag names");
    s->add_option("--out", a.out, "output directory");
    s->add_option("--atom-cap", a.atom_cap, "maximum number of atoms to enumerate");
    s->add_option("--threads", a.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    s->add_option("--seed", a.seed, "random seed");
  };
  auto kernel_opts = [&](CLI::App* s) {
    s->add_option("--kernel", a.kernel, "serialized generator kernel");
    s->add_option("--space", a.space, "space descriptor, e.g. lp:dim=4,p=inf");
    s->add_option("--n", a.n, "depth N");
    s->add_option("--arity", a.arity, "coordinate arity for random kernels")->check(CLI::Range(2, 64));
  };

  auto* ratio = app.add_subcommand("ratio", "decoupling ratio of a kernel");
  common(ratio);
  kernel_opts(ratio);
  ratio->add_option("--p", a.p, "exponent");
  ratio->add_option("--engine", a.engine, "exact or mc")->check(CLI::IsMember({"exact", "mc"}));
  ratio->add_option("--samples", a.samples, "Monte Carlo sample count");

  auto* weak = app.add_subcommand("weak-type", "weak-type constant of a kernel");
  common(weak);
  kernel_opts(weak);

  auto* umd = app.add_subcommand("umd", "sign-transform constant by enumeration, or a search for one");
  common(umd);
  kernel_opts(umd);
  umd->add_option("--p", a.p, "exponent");
  umd->add_option("--budget", a.budget, "search evaluations per restart");
  umd->add_option("--restarts", a.restarts, "search restarts");

  auto* sweep = app.add_subcommand("sweep", "dimension sweep of the adversarial search");
  common(sweep);
  sweep->add_option("--space", a.space, "space template");
  sweep->add_option("--dims", a.dims, "comma-separated sizes")->delimiter(',')->required();
  sweep->add_option("--n", a.n, "depth N");
  sweep->add_option("--p", a.p, "exponent");
  sweep->add_option("--mode", a.mode, "decoupling, umd_exact, garling_forward or garling_reverse");
  sweep->add_option("--budget", a.budget, "evaluations per restart");
  sweep->add_option("--restarts", a.restarts, "restarts");
  sweep->add_option("--arity", a.arity, "coordinate arity")->check(CLI::Range(2, 64));

  ExperimentOptions eo;
  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  common(exp);
  exp->add_option("name", a.experiment, "experiment name")->required()->check(CLI::IsMember(experiment_names()));
  exp->add_option("--dims", eo.dims, "dimensions")->delimiter(',');
  exp->add_option("--n", eo.N, "depth N");
  exp->add_option("--p", eo.p, "exponent");
  exp->add_option("--ps", eo.ps, "exponents for p-dependence")->delimiter(',');
  exp->add_option("--ks", eo.ks, "matrix sizes for schatten-probe")->delimiter(',');
  exp->add_option("--space", eo.space, "space for fubini-lift, p-dependence and garling-split");
  exp->add_option("--weights", a.weights, "section weights for fubini-lift")->delimiter(',');
  exp->add_option("--budget", eo.budget, "search evaluations per restart");
  exp->add_option("--restarts", eo.restarts, "search restarts");
  exp->add_option("--instances", eo.instances, "random instances for garling-split");
  exp->add_option("--growth-threshold", eo.growth_threshold, "c0-growth pin");
  exp->add_option("--l1-ceiling", eo.l1_ceiling, "l1-bounded pin");
  exp->add_option("--nested-ceiling", eo.nested_ceiling, "l1-bounded pin for the nested column");
  bool svg = true;
  exp->add_option("--svg", svg, "write an SVG chart when the report has one");

  auto* cert = app.add_subcommand("certify", "Davis certificate (and optional good-lambda probe) for a kernel");
  common(cert);
  kernel_opts(cert);
  cert->add_option("--lambda", a.lambda, "run the good-lambda probe at this level (> 0)");
  cert->add_option("--delta", a.delta, "good-lambda delta");
  cert->add_option("--beta", a.beta, "good-lambda beta");
  cert->add_option("--p", a.p, "good-lambda exponent");

  auto* check = app.add_subcommand("check", "tangency and (CI) of the decoupled pair of a kernel");
  common(check);
  check->add_option("--kernel", a.kernel, "serialized generator kernel")->required();

  auto* gen = app.add_subcommand("gen", "write a random generator kernel");
  common(gen);
  gen->add_option("--space", a.space, "space descriptor")->required();
  gen->add_option("--n", a.n, "depth N")->required();
  gen->add_option("--arity", a.arity, "coordinate arity")->check(CLI::Range(2, 64));

  std::vector<std::string> raw(argv + 1, argv + argc);
  try {
    auto args = with_config(raw);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    eo.threads = a.threads;
    eo.atom_cap = a.atom_cap;
    if (exp->get_option("--seed")->count() > 0) eo.seed = a.seed;
    const bool space_given = [&](CLI::App* s) { return s->get_option_no_throw("--space") &&
                                                       s->get_option("--space")->count() > 0; }(
        app.get_subcommands().front());

    if (*ratio) {
      const auto k = obtain_kernel(a, space_given);
      const auto N = depth_of(a, k);
      McOptions mc{a.samples, a.seed, a.threads};
      const auto r = decoupling_ratio(k, a.p, N, parse_engine(a.engine), mc);
      json j = r.to_json();
      j["p"] = a.p;
      j["N"] = N;
      j["provenance"] = provenance(a, k);
      write_json(out_path(a, "ratio.json"), j);
      std::cout << (r.status == Status::ok ? num(r.forward.value) : std::string("degenerate"));
      if (r.forward.std_error) std::cout << " +- " << num(*r.forward.std_error);
      std::cout << " (reverse " << (r.status == Status::ok ? num(r.reverse.value) : "nan") << ", engine " << a.engine
                << ", fingerprint " << fingerprint_hex(k) << ")\n";
      return 0;
    }

    if (*weak) {
      const auto k = obtain_kernel(a, space_given);
      const auto N = depth_of(a, k);
      const auto r = weak_type_constant(k, N);
      json j = r.to_json();
      j["N"] = N;
      j["provenance"] = provenance(a, k);
      write_json(out_path(a, "weak_type.json"), j);
      std::cout << (r.status == Status::ok ? num(r.constant.value) : std::string("degenerate")) << " (level "
                << num(r.level) << ", fingerprint " << fingerprint_hex(k) << ")\n";
      return 0;
    }

    if (*umd) {
      if (!a.kernel.empty()) {
        const auto k = load_kernel(a.kernel, a.atom_cap);
        const auto r = umd_constant_exact(k, a.p);
        json j{{"status", to_string(r.status)}, {"constant", r.constant.to_json()}, {"signs", r.signs},
               {"p", a.p},
               {"provenance", provenance(a, k)}};
        write_json(out_path(a, "umd.json"), j);
        std::cout << (r.status == Status::ok ? num(r.constant.value) : std::string("degenerate")) << " (fingerprint "
                  << fingerprint_hex(k) << ")\n";
        return 0;
      }
      SearchConfig cfg;
      cfg.space = SpaceDescriptor::parse(a.space);
      cfg.p = a.p;
      cfg.N = a.n ? a.n : 4;
      cfg.mode = SearchMode::umd_exact;
      cfg.budget = a.budget;
      cfg.seed = a.seed;
      cfg.restarts = a.restarts;
      cfg.threads = a.threads;
      cfg.atom_cap = a.atom_cap;
      const auto r = hill_climb(cfg);
      const auto best = umd_constant_exact(r.best, a.p);
      save_kernel(r.best, out_path(a, "umd_best.kernel"));
      json j{{"constant", r.estimate.to_json()}, {"recheck", r.recheck}, {"signs", best.signs},
             {"best_restart", r.best_restart}, {"budget", a.budget},   {"p", a.p},
             {"provenance", provenance(a, r.best)}};
      write_json(out_path(a, "umd.json"), j);
      std::cout << num(r.estimate.value) << " (search lower bound, fingerprint " << r.estimate.fingerprint << ")\n";
      return 0;
    }

    if (*sweep) {
      SearchConfig cfg;
      cfg.space = SpaceDescriptor::parse(a.space);
      cfg.p = a.p;
      cfg.N = a.n ? a.n : 4;
      cfg.mode = parse_search_mode(a.mode);
      cfg.budget = a.budget;
      cfg.seed = a.seed;
      cfg.restarts = a.restarts;
      cfg.threads = a.threads;
      cfg.atom_cap = a.atom_cap;
      cfg.arity = a.arity;
      const auto t = dimension_sweep(cfg, a.dims);
      write_text(out_path(a, "sweep.csv"), t.to_csv());
      for (const auto& r : t.rows) write_text(out_path(a, "sweep_dim" + std::to_string(r.dim) + ".kernel"), r.kernel);
      std::cout << "sweep " << t.rows.size() << " rows, best " << num(t.rows.back().best) << " at dim "
                << t.rows.back().dim << " -> " << out_path(a, "sweep.csv") << "\n";
      return 0;
    }

    if (*exp) {
      const auto rep = run_experiment(a.experiment, eo, a.weights);
      fs::create_directories(a.out);
      auto r = rep;
      if (!svg) r.chart.clear();
      r.write(a.out);
      std::size_t passed = 0;
      for (const auto& v : rep.verdicts) passed += v.pass;
      std::cout << rep.name << ": " << rep.rows.size() << " rows, " << passed << "/" << rep.verdicts.size()
                << " verdicts pass -> " << (fs::path(a.out) / (rep.name + ".csv")).string() << "\n";
      return rep.passed() ? 0 : 1;
    }

    if (*cert) {
      const auto k = obtain_kernel(a, space_given);
      const auto c = certify_davis(davis_split(k));
      json j{{"davis", c.to_json()}, {"provenance", provenance(a, k)}};
      bool ok = c.ok();
      if (a.lambda > 0.0) {
        const auto g = good_lambda_probe(k, GoodLambdaParams{a.delta, a.beta, a.lambda, a.p});
        j["good_lambda"] = g.to_json();
        ok = ok && g.holds() && g.tangent;
      }
      write_json(out_path(a, "certificate.json"), j);
      std::cout << "davis certificate: " << (c.ok() ? "ok" : "violated") << " (worst slack "
                << num(std::min({c.large_parts.worst_slack, c.small_majorant.worst_slack, c.small_bound.worst_slack}))
                << ", fingerprint " << fingerprint_hex(k) << ")\n";
      return ok ? 0 : 1;
    }

    if (*check) {
      const auto k = load_kernel(a.kernel, a.atom_cap);
      const auto pair = decouple(k);
      const auto t = check_tangent(pair.d, pair.e);
      const auto ci = check_ci(pair);
      auto witness = [](const LawCheck& c) {
        if (c.ok || !c.witness) return json();
        return json{{"n", c.witness->n}, {"cylinder", c.witness->cylinder}, {"what", c.witness->what}};
      };
      json j{{"tangent", t.ok}, {"ci", ci.ok}, {"tangent_witness", witness(t)}, {"ci_witness", witness(ci)},
             {"provenance", provenance(a, k)}};
      write_json(out_path(a, "check.json"), j);
      std::cout << "tangent: " << (t.ok ? "yes" : "no") << ", CI: " << (ci.ok ? "yes" : "no") << "\n";
      return t.ok && ci.ok ? 0 : 1;
    }

    if (*gen) {
      const auto k = obtain_kernel(a, true);
      const auto path = out_path(a, "kernel_" + fingerprint_hex(k) + ".kernel");
      save_kernel(k, path);
      std::cout << path << "\n";
      return 0;
    }
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << " (required atoms: " << e.required() << ", cap " << a.atom_cap << ")\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
