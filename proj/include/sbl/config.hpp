// Run configuration: flat `key = value` files with dotted section keys.
// Parsing validates everything and reports every error, not just the first.
// The config hash is FNV-1a over the resolved semantic key/value lines
// (sorted, output directory excluded), so comments, ordering, and restated
// defaults never change it.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sbl/csv.hpp"
#include "sbl/grid.hpp"
#include "sbl/math.hpp"
#include "sbl/models.hpp"
#include "sbl/solver.hpp"

namespace sbl {

enum class ExperimentKind {
  simulate,
  contraction,
  comparison,
  commutator,
  kinetic_check,
  porous_medium,
  all
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::contraction: return "contraction";
    case ExperimentKind::comparison: return "comparison";
    case ExperimentKind::commutator: return "commutator";
    case ExperimentKind::kinetic_check: return "kinetic-check";
    case ExperimentKind::porous_medium: return "porous-medium";
    case ExperimentKind::all: return "all";
  }
  return "?";
}

struct InitSpec {
  enum class Kind { zero, constant, step, box, bump, sine } kind = Kind::zero;
  double value = 0.0;              // constant
  double left = 0.0, right = 0.0;  // step at x0
  double x0 = 0.0;
  double x1 = 0.0, x2 = 0.0, height = 0.0;  // box
  double amplitude = 0.0, center = 0.0, width = 1.0;  // bump
  double base = 0.0, freq = 1.0;   // sine: base + amplitude sin(2 pi freq x / L)
};

inline CellField make_initial_field(const InitSpec& s, const Grid1D& grid) {
  CellField f = CellField::constant(grid, 0.0);
  for (int i = 0; i < grid.n_cells; ++i) {
    const double x = grid.center(i);
    switch (s.kind) {
      case InitSpec::Kind::zero:
        f.data[i] = 0.0;
        break;
      case InitSpec::Kind::constant:
        f.data[i] = s.value;
        break;
      case InitSpec::Kind::step:
        f.data[i] = x < s.x0 ? s.left : s.right;
        break;
      case InitSpec::Kind::box:
        f.data[i] = (x >= s.x1 && x < s.x2) ? s.height : 0.0;
        break;
      case InitSpec::Kind::bump: {
        const double u = (x - s.center) / s.width;
        f.data[i] = s.amplitude * ((u * u < 1.0)
                                       ? std::exp(1.0 - 1.0 / (1.0 - u * u))
                                       : 0.0);
        break;
      }
      case InitSpec::Kind::sine:
        f.data[i] = s.base + s.amplitude *
                                 std::sin(2.0 * 3.14159265358979323846 *
                                          s.freq * x / grid.length);
        break;
    }
  }
  return f;
}

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::simulate;
  int dim = 1;
  Splitting splitting = Splitting::lie;

  // models
  FluxKind flux_kind = FluxKind::burgers;
  double flux_speed = 1.0, flux_speed2 = 0.0;
  double flux_zeta = 1.0, flux_zeta2 = 0.0;
  double flux_alpha = 1.0;
  std::vector<double> flux_coeffs;

  NoiseKind noise_kind = NoiseKind::zero;
  double noise_theta = 1.0;
  double noise_beta = 0.0;

  SourceKind source_kind = SourceKind::none;
  double source_lambda = 1.0;
  double source_scale = 1.0;

  // discretization
  int grid_n = 256;
  double grid_length = 4.0;
  double time_t = 1.0;
  double cfl = kDefaultCfl;
  double dt = 0.0;  // 0 = derive from CFL
  double vgrid_margin = 0.5;
  int vgrid_n_half = 64;
  int levels_n = 33;

  // ensemble
  int seeds_count = 1;
  std::uint64_t seeds_base = 1;

  InitSpec init1, init2;
  bool has_init2 = false;
  std::vector<double> snapshots;

  // commutator experiment; the default range spans 64x so a rate-2 pair can
  // certify the 1e-2 decay target
  std::vector<double> commutator_eps{0.2, 0.1, 0.05, 0.025,
                                     0.0125, 0.00625, 0.003125};
  enum class EField { constant, identity, abs, sine } commutator_e = EField::identity;
  enum class FField { bump, step } commutator_f = FField::bump;

  std::string output_dir = "out";

  FluxModel make_flux() const {
    switch (flux_kind) {
      case FluxKind::zero: return FluxModel::zero_flux(dim);
      case FluxKind::burgers: return FluxModel::burgers();
      case FluxKind::linear_advection:
        return FluxModel::linear_advection({{flux_speed, flux_speed2}}, dim);
      case FluxKind::porous_medium:
        return FluxModel::porous_medium({{flux_zeta, flux_zeta2}}, flux_alpha, dim);
      case FluxKind::custom_polynomial:
        return FluxModel::custom_polynomial(flux_coeffs);
    }
    return FluxModel::zero_flux();
  }
  NoiseModel make_noise() const {
    switch (noise_kind) {
      case NoiseKind::zero: return NoiseModel::zero_noise(dim);
      case NoiseKind::linear_shift: return NoiseModel::linear_shift(dim);
      case NoiseKind::diagonal_nonlinear:
        return NoiseModel::diagonal_nonlinear(const_coeff(noise_theta),
                                              noise_beta, dim);
    }
    return NoiseModel::zero_noise();
  }
  SourceModel make_source() const {
    SourceModel s = source_kind == SourceKind::none
                        ? SourceModel::none_source()
                        : SourceModel::porous_medium(const_coeff(source_lambda));
    return source_scale == 1.0 ? s : s.scaled_by(source_scale);
  }
  PorousMediumSpec make_porous_spec() const {
    PorousMediumSpec s;
    s.zeta = {{flux_zeta, flux_zeta2}};
    s.alpha = flux_alpha;
    s.beta = noise_beta;
    s.theta_coeff = const_coeff(noise_theta);
    s.lambda_coeff = const_coeff(source_lambda);
    s.dim = dim;
    return s;
  }
};

struct ParseResult {
  RunConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct KvParser {
  std::map<std::string, std::string> kv;
  std::vector<std::string>* errors;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  double number(const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (...) {
      errors->push_back("key '" + key + "': not a number: '" + it->second + "'");
      return fallback;
    }
  }
  long long integer(const std::string& key, long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (...) {
      errors->push_back("key '" + key + "': not an integer: '" + it->second + "'");
      return fallback;
    }
  }
  std::string word(const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }
  std::vector<double> list(const std::string& key,
                           const std::vector<double>& fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (...) {
        errors->push_back("key '" + key + "': bad list entry '" + tok + "'");
        return fallback;
      }
    }
    return out;
  }
};

inline InitSpec parse_init(KvParser& p, const std::string& prefix,
                           std::vector<std::string>& errors) {
  InitSpec s;
  const std::string kind = p.word(prefix + ".kind", "zero");
  if (kind == "zero") s.kind = InitSpec::Kind::zero;
  else if (kind == "constant") s.kind = InitSpec::Kind::constant;
  else if (kind == "step") s.kind = InitSpec::Kind::step;
  else if (kind == "box") s.kind = InitSpec::Kind::box;
  else if (kind == "bump") s.kind = InitSpec::Kind::bump;
  else if (kind == "sine") s.kind = InitSpec::Kind::sine;
  else errors.push_back("key '" + prefix + ".kind': unknown value '" + kind + "'");
  s.value = p.number(prefix + ".value", 0.0);
  s.left = p.number(prefix + ".left", 0.0);
  s.right = p.number(prefix + ".right", 0.0);
  s.x0 = p.number(prefix + ".x0", 0.0);
  s.x1 = p.number(prefix + ".x1", 0.0);
  s.x2 = p.number(prefix + ".x2", 0.0);
  s.height = p.number(prefix + ".height", 0.0);
  s.amplitude = p.number(prefix + ".amplitude", 0.0);
  s.center = p.number(prefix + ".center", 0.0);
  s.width = p.number(prefix + ".width", 1.0);
  s.base = p.number(prefix + ".base", 0.0);
  s.freq = p.number(prefix + ".freq", 1.0);
  return s;
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{
        "experiment", "dim", "splitting",
        "flux", "flux.speed", "flux.speed2", "flux.zeta", "flux.zeta2",
        "flux.alpha", "flux.coeffs",
        "noise.kind", "noise.theta", "noise.beta",
        "source", "source.lambda", "source.scale",
        "grid.n", "grid.length",
        "time.T", "time.cfl", "time.dt",
        "vgrid.margin", "vgrid.n_half", "levels.n",
        "seeds.count", "seeds.base",
        "snapshots", "output.dir",
        "commutator.eps", "commutator.e", "commutator.f"};
    for (const std::string p : {"init", "init2"})
      for (const std::string f :
           {".kind", ".value", ".left", ".right", ".x0", ".x1", ".x2",
            ".height", ".amplitude", ".center", ".width", ".base", ".freq"})
        k.push_back(p + f);
    return k;
  }();
  return keys;
}

}  // namespace detail

inline ParseResult parse_config_text(const std::string& text) {
  ParseResult res;
  auto& errors = res.errors;
  std::map<std::string, std::string> kv;

  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    kv[key] = value;
  }

  for (const auto& [key, value] : kv) {
    (void)value;
    const auto& known = detail::known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      errors.push_back("unknown key '" + key + "'");
  }

  detail::KvParser p{kv, &errors};
  RunConfig& c = res.config;

  const std::string exp = p.word("experiment", "simulate");
  if (exp == "simulate") c.experiment = ExperimentKind::simulate;
  else if (exp == "contraction") c.experiment = ExperimentKind::contraction;
  else if (exp == "comparison") c.experiment = ExperimentKind::comparison;
  else if (exp == "commutator") c.experiment = ExperimentKind::commutator;
  else if (exp == "kinetic-check") c.experiment = ExperimentKind::kinetic_check;
  else if (exp == "porous-medium") c.experiment = ExperimentKind::porous_medium;
  else if (exp == "all") c.experiment = ExperimentKind::all;
  else errors.push_back("key 'experiment': unknown value '" + exp + "'");

  c.dim = static_cast<int>(p.integer("dim", 1));
  const std::string split = p.word("splitting", "lie");
  if (split == "lie") c.splitting = Splitting::lie;
  else if (split == "strang") c.splitting = Splitting::strang;
  else errors.push_back("key 'splitting': unknown value '" + split + "'");

  const std::string flux = p.word("flux", "burgers");
  if (flux == "burgers") c.flux_kind = FluxKind::burgers;
  else if (flux == "linear-advection") c.flux_kind = FluxKind::linear_advection;
  else if (flux == "porous-medium") c.flux_kind = FluxKind::porous_medium;
  else if (flux == "custom-polynomial") c.flux_kind = FluxKind::custom_polynomial;
  else if (flux == "zero") c.flux_kind = FluxKind::zero;
  else errors.push_back("key 'flux': unknown value '" + flux + "'");
  c.flux_speed = p.number("flux.speed", 1.0);
  c.flux_speed2 = p.number("flux.speed2", 0.0);
  c.flux_zeta = p.number("flux.zeta", 1.0);
  c.flux_zeta2 = p.number("flux.zeta2", 0.0);
  c.flux_alpha = p.number("flux.alpha", 1.0);
  c.flux_coeffs = p.list("flux.coeffs", {});
  if (c.flux_kind == FluxKind::custom_polynomial && c.flux_coeffs.size() > 7)
    errors.push_back("key 'flux.coeffs': degree must be <= 6");

  const std::string noise = p.word("noise.kind", "zero");
  if (noise == "zero") c.noise_kind = NoiseKind::zero;
  else if (noise == "linear-shift") c.noise_kind = NoiseKind::linear_shift;
  else if (noise == "diagonal-nonlinear") c.noise_kind = NoiseKind::diagonal_nonlinear;
  else errors.push_back("key 'noise.kind': unknown value '" + noise + "'");
  c.noise_theta = p.number("noise.theta", 1.0);
  c.noise_beta = p.number("noise.beta", 0.0);
  if (c.noise_beta < 0.0) errors.push_back("key 'noise.beta': must be >= 0");

  const std::string source = p.word("source", "none");
  if (source == "none") c.source_kind = SourceKind::none;
  else if (source == "porous-medium") c.source_kind = SourceKind::porous_medium;
  else errors.push_back("key 'source': unknown value '" + source + "'");
  c.source_lambda = p.number("source.lambda", 1.0);
  c.source_scale = p.number("source.scale", 1.0);

  c.grid_n = static_cast<int>(p.integer("grid.n", 256));
  c.grid_length = p.number("grid.length", 4.0);
  c.time_t = p.number("time.T", 1.0);
  c.cfl = p.number("time.cfl", kDefaultCfl);
  c.dt = p.number("time.dt", 0.0);
  c.vgrid_margin = p.number("vgrid.margin", 0.5);
  c.vgrid_n_half = static_cast<int>(p.integer("vgrid.n_half", 64));
  c.levels_n = static_cast<int>(p.integer("levels.n", 33));
  c.seeds_count = static_cast<int>(p.integer("seeds.count", 1));
  const long long base = p.integer("seeds.base", 1);
  c.seeds_base = static_cast<std::uint64_t>(base);
  c.snapshots = p.list("snapshots", {});

  c.init1 = detail::parse_init(p, "init", errors);
  c.has_init2 = kv.count("init2.kind") != 0;
  c.init2 = detail::parse_init(p, "init2", errors);

  c.commutator_eps = p.list("commutator.eps", c.commutator_eps);
  const std::string ef = p.word("commutator.e", "identity");
  if (ef == "constant") c.commutator_e = RunConfig::EField::constant;
  else if (ef == "identity") c.commutator_e = RunConfig::EField::identity;
  else if (ef == "abs") c.commutator_e = RunConfig::EField::abs;
  else if (ef == "sine") c.commutator_e = RunConfig::EField::sine;
  else errors.push_back("key 'commutator.e': unknown value '" + ef + "'");
  const std::string ff = p.word("commutator.f", "bump");
  if (ff == "bump") c.commutator_f = RunConfig::FField::bump;
  else if (ff == "step") c.commutator_f = RunConfig::FField::step;
  else errors.push_back("key 'commutator.f': unknown value '" + ff + "'");

  c.output_dir = p.word("output.dir", "out");

  // range constraints
  if (c.dim < 1 || c.dim > 2) errors.push_back("key 'dim': must be 1 or 2");
  const bool solver_experiment = c.experiment != ExperimentKind::commutator &&
                                 c.experiment != ExperimentKind::kinetic_check;
  if (solver_experiment && c.dim != 1)
    errors.push_back("key 'dim': the solver supports dim = 1 only");
  if (c.grid_n < 16) errors.push_back("key 'grid.n': must be >= 16");
  if (!(c.grid_length > 0.0)) errors.push_back("key 'grid.length': must be > 0");
  if (!(c.time_t > 0.0)) errors.push_back("key 'time.T': must be > 0");
  if (!(c.cfl > 0.0 && c.cfl <= 0.5))
    errors.push_back("key 'time.cfl': must lie in (0, 0.5]");
  if (c.dt < 0.0) errors.push_back("key 'time.dt': must be >= 0");
  if (c.vgrid_margin < 0.05) errors.push_back("key 'vgrid.margin': must be >= 0.05");
  if (c.vgrid_n_half < 2) errors.push_back("key 'vgrid.n_half': must be >= 2");
  if (c.levels_n < 3 || c.levels_n % 2 == 0)
    errors.push_back("key 'levels.n': must be odd and >= 3");
  if (c.seeds_count < 1) errors.push_back("key 'seeds.count': must be >= 1");
  if (c.flux_alpha < 0.0) errors.push_back("key 'flux.alpha': must be >= 0");
  for (double t : c.snapshots)
    if (t < 0.0 || t > c.time_t) {
      errors.push_back("key 'snapshots': times must lie in [0, T]");
      break;
    }
  for (double e : c.commutator_eps)
    if (!(e > 0.0)) {
      errors.push_back("key 'commutator.eps': entries must be > 0");
      break;
    }
  if (c.experiment == ExperimentKind::commutator && c.grid_n >= 16 &&
      c.grid_length > 0.0) {
    for (double e : c.commutator_eps)
      if (e < 2.0 * c.grid_length / c.grid_n) {
        errors.push_back(
            "key 'commutator.eps': entries must be >= 2 dx = " +
            fmt_double(2.0 * c.grid_length / c.grid_n));
        break;
      }
  }
  return res;
}

inline ParseResult parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParseResult res;
    res.errors.push_back("cannot open config file '" + path + "'");
    return res;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Canonical form and hash.

inline std::string canonical_string(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> rows;
  const auto num = [](double v) { return fmt_double(v); };
  const auto put = [&](const std::string& k, const std::string& v) {
    rows.emplace_back(k, v);
  };
  put("experiment", to_string(c.experiment));
  put("dim", std::to_string(c.dim));
  put("splitting", c.splitting == Splitting::lie ? "lie" : "strang");
  switch (c.flux_kind) {
    case FluxKind::zero: put("flux", "zero"); break;
    case FluxKind::burgers: put("flux", "burgers"); break;
    case FluxKind::linear_advection: put("flux", "linear-advection"); break;
    case FluxKind::porous_medium: put("flux", "porous-medium"); break;
    case FluxKind::custom_polynomial: put("flux", "custom-polynomial"); break;
  }
  put("flux.speed", num(c.flux_speed));
  put("flux.speed2", num(c.flux_speed2));
  put("flux.zeta", num(c.flux_zeta));
  put("flux.zeta2", num(c.flux_zeta2));
  put("flux.alpha", num(c.flux_alpha));
  {
    std::string s;
    for (double v : c.flux_coeffs) s += num(v) + ";";
    put("flux.coeffs", s);
  }
  switch (c.noise_kind) {
    case NoiseKind::zero: put("noise.kind", "zero"); break;
    case NoiseKind::linear_shift: put("noise.kind", "linear-shift"); break;
    case NoiseKind::diagonal_nonlinear: put("noise.kind", "diagonal-nonlinear"); break;
  }
  put("noise.theta", num(c.noise_theta));
  put("noise.beta", num(c.noise_beta));
  put("source", c.source_kind == SourceKind::none ? "none" : "porous-medium");
  put("source.lambda", num(c.source_lambda));
  put("source.scale", num(c.source_scale));
  put("grid.n", std::to_string(c.grid_n));
  put("grid.length", num(c.grid_length));
  put("time.T", num(c.time_t));
  put("time.cfl", num(c.cfl));
  put("time.dt", num(c.dt));
  put("vgrid.margin", num(c.vgrid_margin));
  put("vgrid.n_half", std::to_string(c.vgrid_n_half));
  put("levels.n", std::to_string(c.levels_n));
  put("seeds.count", std::to_string(c.seeds_count));
  put("seeds.base", std::to_string(c.seeds_base));
  {
    std::string s;
    for (double v : c.snapshots) s += num(v) + ";";
    put("snapshots", s);
  }
  const auto put_init = [&](const std::string& pfx, const InitSpec& s) {
    const char* kinds[] = {"zero", "constant", "step", "box", "bump", "sine"};
    put(pfx + ".kind", kinds[static_cast<int>(s.kind)]);
    put(pfx + ".value", num(s.value));
    put(pfx + ".left", num(s.left));
    put(pfx + ".right", num(s.right));
    put(pfx + ".x0", num(s.x0));
    put(pfx + ".x1", num(s.x1));
    put(pfx + ".x2", num(s.x2));
    put(pfx + ".height", num(s.height));
    put(pfx + ".amplitude", num(s.amplitude));
    put(pfx + ".center", num(s.center));
    put(pfx + ".width", num(s.width));
    put(pfx + ".base", num(s.base));
    put(pfx + ".freq", num(s.freq));
  };
  put_init("init", c.init1);
  put_init("init2", c.init2);
  {
    std::string s;
    for (double v : c.commutator_eps) s += num(v) + ";";
    put("commutator.eps", s);
  }
  const char* efields[] = {"constant", "identity", "abs", "sine"};
  put("commutator.e", efields[static_cast<int>(c.commutator_e)]);
  put("commutator.f", c.commutator_f == RunConfig::FField::bump ? "bump" : "step");

  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [k, v] : rows) out += k + "=" + v + "\n";
  return out;
}

inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = canonical_string(c);
  return fnv1a(s.data(), s.size());
}

inline std::string config_hash_hex(const RunConfig& c) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash(c)));
  return buf;
}

}  // namespace sbl
