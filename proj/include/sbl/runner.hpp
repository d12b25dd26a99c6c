// Experiment orchestration: builds models from a RunConfig, dispatches to the
// solver / verification harness, and lays results out deterministically under
// out/<config-hash>/. Exit codes: 0 pass, 1 theorem assertion failed,
// 2 config or runtime error.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbl/config.hpp"
#include "sbl/kinetic.hpp"
#include "sbl/verify.hpp"
#include "sbl/version.hpp"

namespace sbl {

struct CliOptions {
  int seeds_override = -1;
  long long base_seed_override = -1;
  int jobs = 1;
  bool dump_paths = false;
  std::string out_override;
};

struct RunOutcome {
  int exit_code = 2;
  std::filesystem::path out_dir;
  std::vector<Assertion> assertions;
};

namespace detail {

struct SeedSummary {
  std::uint64_t seed = 0;
  double k_observed = 0.0;
  double mass_drift = 0.0;
  long long walltime_ms = 0;
};

inline std::vector<std::uint64_t> seed_list(const RunConfig& cfg,
                                            const CliOptions& opt) {
  const int count = opt.seeds_override > 0 ? opt.seeds_override : cfg.seeds_count;
  const std::uint64_t base = opt.base_seed_override >= 0
                                 ? static_cast<std::uint64_t>(opt.base_seed_override)
                                 : cfg.seeds_base;
  std::vector<std::uint64_t> seeds(count);
  for (int s = 0; s < count; ++s) seeds[s] = base + static_cast<std::uint64_t>(s);
  return seeds;
}

inline SolveSpec base_solve_spec(const RunConfig& cfg) {
  SolveSpec spec;
  spec.grid = Grid1D(cfg.grid_n, cfg.grid_length);
  spec.flux = cfg.experiment == ExperimentKind::porous_medium
                  ? cfg.make_porous_spec().induced_flux()
                  : cfg.make_flux();
  spec.noise = cfg.experiment == ExperimentKind::porous_medium
                   ? cfg.make_porous_spec().induced_noise()
                   : cfg.make_noise();
  spec.source = cfg.experiment == ExperimentKind::porous_medium
                    ? cfg.make_porous_spec().induced_source()
                    : cfg.make_source();
  spec.t_end = cfg.time_t;
  spec.cfl = cfg.cfl;
  spec.dt_override = cfg.dt;
  spec.splitting = cfg.splitting;
  spec.snapshot_times = cfg.snapshots;
  spec.config_hash = config_hash(cfg);
  spec.initial = make_initial_field(cfg.init1, spec.grid);
  return spec;
}

inline std::string manifest_text(const RunConfig& cfg,
                                 const std::vector<SeedSummary>& seeds,
                                 const std::vector<Assertion>& assertions,
                                 int exit_code, double macro_dt = 0.0) {
  std::string m;
  m += "config_hash = " + config_hash_hex(cfg) + "\n";
  m += std::string("tool_version = ") + kVersion + "\n";
  m += canonical_string(cfg);
  if (macro_dt > 0.0) m += "macro_dt = " + fmt_double(macro_dt) + "\n";
  for (const auto& s : seeds) {
    m += "seed " + std::to_string(s.seed) +
         ": K_observed = " + fmt_double(s.k_observed) +
         " conservation_drift = " + fmt_double(s.mass_drift) + "\n";
    m += "seed " + std::to_string(s.seed) +
         " walltime_ms = " + std::to_string(s.walltime_ms) + "\n";
  }
  for (const auto& a : assertions) {
    m += "assertion " + a.name + ": " + (a.pass ? "PASS" : "FAIL");
    if (!a.detail.empty()) m += " (" + a.detail + ")";
    m += "\n";
  }
  m += "exit = " + std::to_string(exit_code) + "\n";
  return m;
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + p.string());
  out << body;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline long long elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// -------------------------------------------------------------------------
// simulate / porous-medium experiments

inline RunOutcome run_simulate(const RunConfig& cfg, const CliOptions& opt,
                               const std::filesystem::path& dir) {
  const auto seeds = seed_list(cfg, opt);
  SolveSpec spec = base_solve_spec(cfg);
  const bool porous = cfg.experiment == ExperimentKind::porous_medium;

  std::vector<SeedSummary> summaries(seeds.size());
  std::vector<Trajectory> trajs(seeds.size());
  sbl::detail::parallel_over(opt.jobs, static_cast<int>(seeds.size()), [&](int s) {
    const auto t0 = std::chrono::steady_clock::now();
    trajs[s] = simulate(spec, seeds[s]);
    summaries[s] = {seeds[s], trajs[s].k_observed, trajs[s].mass_drift,
                    elapsed_ms(t0)};
  });

  double global_min = 0.0;
  double worst_drift = 0.0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& traj = trajs[s];
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      const auto& f = traj.snapshots[k];
      global_min = std::min(global_min, f.min_value());
      write_file(dir / ("seed-" + std::to_string(seeds[s])) /
                     ("snap-" + std::to_string(k) + ".csv"),
                 csv_snapshot(f));
    }
    worst_drift = std::max(worst_drift, traj.mass_drift);
    if (opt.dump_paths)
      write_file(dir / ("seed-" + std::to_string(seeds[s])) / "path.csv",
                 csv_path(traj.path));
  }

  RunOutcome out;
  out.out_dir = dir;
  out.assertions.push_back({"trajectories_completed", true,
                            std::to_string(seeds.size()) + " seeds"});
  if (spec.source.kind == SourceKind::none) {
    const double tol = 1e-10 * (1.0 + spec.initial.linf()) * spec.grid.length;
    out.assertions.push_back(
        {"mass_conservation", worst_drift <= tol,
         "max drift " + fmt_double(worst_drift) + ", tol " + fmt_double(tol)});
  }
  if (porous) {
    const double floor0 = spec.initial.min_value();
    out.assertions.push_back(
        {"nonnegativity", floor0 >= -1e-12 ? global_min >= -1e-12 : true,
         "min over snapshots " + fmt_double(global_min)});
  }
  out.exit_code =
      emit_report(dir, out.assertions, {}) == 0 ? 0 : 1;
  write_file(dir / "manifest.txt",
             manifest_text(cfg, summaries, out.assertions, out.exit_code,
                           trajs.empty() ? 0.0 : trajs.front().dt));
  return out;
}

// -------------------------------------------------------------------------
// contraction / comparison experiments

inline RunOutcome run_contraction(const RunConfig& cfg, const CliOptions& opt,
                                  const std::filesystem::path& dir) {
  const auto seeds = seed_list(cfg, opt);
  PairedSpec spec;
  spec.base = base_solve_spec(cfg);
  spec.initial1 = make_initial_field(cfg.init1, spec.base.grid);
  spec.initial2 = make_initial_field(cfg.init2, spec.base.grid);

  const auto rep = contraction_experiment(spec, seeds, opt.jobs);

  RunOutcome out;
  out.out_dir = dir;
  if (rep.source_free)
    out.assertions.push_back(
        {"contraction_pathwise_nonincrease", rep.pass_pathwise,
         "max step increase " + fmt_double(rep.max_step_increase)});
  out.assertions.push_back(
      {"contraction_mean_bound", rep.pass_mean,
       "min margin " +
           fmt_double(*std::min_element(rep.margin.begin(), rep.margin.end()))});
  out.exit_code = emit_report(dir, out.assertions,
                              {{"contraction.csv", csv_contraction(rep)}});
  std::vector<SeedSummary> summaries;
  for (const auto& s : rep.seed_stats)
    summaries.push_back({s.seed, s.k_observed, s.mass_drift, s.walltime_ms});
  write_file(dir / "manifest.txt",
             manifest_text(cfg, summaries, out.assertions, out.exit_code));
  return out;
}

inline RunOutcome run_comparison(const RunConfig& cfg, const CliOptions& opt,
                                 const std::filesystem::path& dir) {
  const auto seeds = seed_list(cfg, opt);
  PairedSpec spec;
  spec.base = base_solve_spec(cfg);
  spec.initial1 = make_initial_field(cfg.init1, spec.base.grid);
  spec.initial2 = make_initial_field(cfg.init2, spec.base.grid);

  const auto rep = comparison_experiment(spec, seeds, opt.jobs);

  RunOutcome out;
  out.out_dir = dir;
  std::string detail = "max violation " + fmt_double(rep.max_violation);
  if (!rep.pass)
    detail += " at seed " + std::to_string(rep.violation_seed) + ", t = " +
              fmt_double(rep.violation_time) + ", x = " +
              fmt_double(rep.violation_x);
  out.assertions.push_back({"comparison_cellwise_order", rep.pass, detail});

  CsvBuilder csv({"n_seeds", "n_steps", "max_violation"});
  csv.row({static_cast<double>(rep.n_seeds), static_cast<double>(rep.n_steps),
           rep.max_violation});
  out.exit_code =
      emit_report(dir, out.assertions, {{"comparison.csv", csv.str()}});
  std::vector<SeedSummary> summaries;
  for (const auto& s : rep.seed_stats)
    summaries.push_back({s.seed, s.k_observed, s.mass_drift, s.walltime_ms});
  write_file(dir / "manifest.txt",
             manifest_text(cfg, summaries, out.assertions, out.exit_code));
  return out;
}

// -------------------------------------------------------------------------
// commutator experiment

inline RunOutcome run_commutator(const RunConfig& cfg, const CliOptions&,
                                 const std::filesystem::path& dir) {
  const Grid1D grid(cfg.grid_n, cfg.grid_length);
  const double half = 0.5 * cfg.grid_length;
  std::vector<double> e(grid.n_cells), f(grid.n_cells);
  for (int i = 0; i < grid.n_cells; ++i) {
    const double x = grid.center(i) - half;  // centered coordinate
    switch (cfg.commutator_e) {
      case RunConfig::EField::constant: e[i] = 1.5; break;
      case RunConfig::EField::identity: e[i] = x; break;
      case RunConfig::EField::abs: e[i] = std::abs(x); break;
      case RunConfig::EField::sine:
        e[i] = std::sin(2.0 * 3.14159265358979323846 * x / cfg.grid_length);
        break;
    }
    const double u = x / (0.25 * cfg.grid_length);
    f[i] = cfg.commutator_f == RunConfig::FField::bump
               ? ((u * u < 1.0) ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0)
               : (std::abs(x) < 0.25 * cfg.grid_length ? 1.0 : 0.0);
  }

  // F is supported in the middle half of the domain, so [0.1 L, 0.9 L]
  // contains the whole commutator support while staying clear of the
  // periodic wrap (where non-periodic E samples jump).
  const MollifierKernel kernel(KernelKind::rho1_space);
  const auto rep = commutator_test(e, f, kernel, cfg.commutator_eps, grid,
                                   0.1 * cfg.grid_length, 0.9 * cfg.grid_length);

  RunOutcome out;
  out.out_dir = dir;
  const bool ok = rep.pass || rep.hypothesis_violated;
  std::string detail = "fitted rate " + fmt_double(rep.fitted_rate);
  if (rep.hypothesis_violated) detail += "; hypothesis violated (BV-only data)";
  out.assertions.push_back({"commutator_decay", ok, detail});
  out.exit_code =
      emit_report(dir, out.assertions, {{"commutator.csv", csv_commutator(rep)}});
  std::vector<SeedSummary> summaries;
  write_file(dir / "manifest.txt",
             manifest_text(cfg, summaries, out.assertions, out.exit_code));
  return out;
}

// -------------------------------------------------------------------------
// kinetic-check experiment: chi identities plus a small shock defect report.

inline RunOutcome run_kinetic_check(const RunConfig& cfg, const CliOptions& opt,
                                    const std::filesystem::path& dir) {
  RunOutcome out;
  out.out_dir = dir;

  // chi / moment identities on random data
  NormalRng rng(splitmix64(cfg.seeds_base));
  double worst_chi = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double a = 20.0 * rng.next_uniform() - 10.0;
    const double b = 20.0 * rng.next_uniform() - 10.0;
    worst_chi = std::max(worst_chi,
                         std::abs(l1_chi_distance(a, b) - std::abs(a - b)));
  }
  out.assertions.push_back({"chi_l1_identity", worst_chi <= 1e-14,
                            "max error " + fmt_double(worst_chi)});

  const Grid1D grid(64, cfg.grid_length);
  CellField field = CellField::constant(grid, 0.0);
  for (int i = 0; i < grid.n_cells; ++i)
    field.data[i] = 3.0 * (2.0 * rng.next_uniform() - 1.0);
  const double v_abs = 3.0 * (1.0 + cfg.vgrid_margin);
  const VGrid vgrid = VGrid::symmetric(v_abs, cfg.vgrid_n_half);
  const KineticField u = chi_transform(field, vgrid);
  double worst_moment = 0.0;
  {
    const CellField m1 = moment(u, [](double) { return 1.0; });
    const CellField m2 = moment(u, [](double v) { return 2.0 * v; });
    for (int i = 0; i < grid.n_cells; ++i) {
      worst_moment = std::max(worst_moment, std::abs(m1.data[i] - field.data[i]));
      worst_moment =
          std::max(worst_moment, std::abs(m2.data[i] - sq(field.data[i])));
    }
    for (double c : make_levels(3.0, 9)) {
      const CellField mk =
          moment(u, [c](double v) { return sign0(v - c); }, {c});
      for (int i = 0; i < grid.n_cells; ++i)
        worst_moment = std::max(
            std::abs(mk.data[i] -
                     (std::abs(field.data[i] - c) - std::abs(c))),
            worst_moment);
    }
  }
  out.assertions.push_back({"moment_identity", worst_moment <= 1e-12,
                            "max error " + fmt_double(worst_moment)});

  // defect report on a burgers shock, no noise
  SolveSpec spec;
  spec.grid = Grid1D(128, cfg.grid_length);
  spec.flux = FluxModel::burgers();
  spec.noise = NoiseModel::zero_noise();
  spec.source = SourceModel::none_source();
  spec.t_end = std::min(cfg.time_t, 0.5);
  spec.cfl = cfg.cfl;
  spec.dense = true;
  InitSpec step;
  step.kind = InitSpec::Kind::step;
  step.left = 1.0;
  step.right = 0.0;
  step.x0 = 0.5 * cfg.grid_length;
  spec.initial = make_initial_field(step, spec.grid);
  const Trajectory traj = simulate(spec, cfg.seeds_base);
  const auto levels = make_levels(1.2, cfg.levels_n);
  const auto est = defect_estimate(traj, spec.flux, spec.noise, spec.source, levels);
  const double tol_m = defect_density_tol(spec.grid, traj.dt);
  out.assertions.push_back(
      {"defect_nonnegative", est.neg_overshoot >= -tol_m,
       "neg overshoot " + fmt_double(est.neg_overshoot) + ", tol " +
           fmt_double(tol_m)});
  out.assertions.push_back(
      {"defect_mass_bound", est.total_mass <= est.bound_level_form + 1e-8,
       "mass " + fmt_double(est.total_mass) + " vs bound " +
           fmt_double(est.bound_level_form)});

  std::string summary_block;
  summary_block += "total_mass = " + fmt_double(est.total_mass) + "\n";
  summary_block += "neg_overshoot = " + fmt_double(est.neg_overshoot) + "\n";
  summary_block +=
      "support_box_t = [" + fmt_double(est.box_t_min) + ", " +
      fmt_double(est.box_t_max) + "]\n";
  summary_block +=
      "support_box_x = [" + fmt_double(est.box_x_min) + ", " +
      fmt_double(est.box_x_max) + "]\n";
  summary_block +=
      "support_box_v = [" + fmt_double(est.box_v_min) + ", " +
      fmt_double(est.box_v_max) + "]\n";

  out.exit_code = emit_report(dir, out.assertions,
                              {{"defect.csv", csv_defect(est)},
                               {"defect_summary.txt", summary_block}});
  std::vector<SeedSummary> summaries;
  write_file(dir / "manifest.txt",
             manifest_text(cfg, summaries, out.assertions, out.exit_code));
  (void)opt;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline RunOutcome run_experiment(const RunConfig& cfg, const CliOptions& opt);

namespace detail {

// small-scale battery: every verification under two minutes
inline RunOutcome run_all(const RunConfig& cfg, const CliOptions& opt,
                          const std::filesystem::path& dir) {
  RunOutcome total;
  total.out_dir = dir;
  total.exit_code = 0;

  const auto merge = [&](const char* tag, RunConfig sub) {
    sub.output_dir = (dir / tag).string();
    CliOptions sub_opt = opt;
    sub_opt.out_override = sub.output_dir;  // keep sub-runs under the battery
    const RunOutcome r = run_experiment(sub, sub_opt);
    for (auto a : r.assertions) {
      a.name = std::string(tag) + "." + a.name;
      total.assertions.push_back(a);
    }
    total.exit_code = std::max(total.exit_code, r.exit_code);
  };

  RunConfig c = cfg;
  c.grid_n = 128;
  c.seeds_count = std::min(cfg.seeds_count, 20);
  c.time_t = 0.5;

  RunConfig contraction = c;
  contraction.experiment = ExperimentKind::contraction;
  contraction.flux_kind = FluxKind::burgers;
  contraction.noise_kind = NoiseKind::linear_shift;
  contraction.source_kind = SourceKind::none;
  contraction.init1.kind = InitSpec::Kind::box;
  contraction.init1.x1 = 1.0;
  contraction.init1.x2 = 2.0;
  contraction.init1.height = 0.8;
  contraction.init2.kind = InitSpec::Kind::bump;
  contraction.init2.amplitude = 0.4;
  contraction.init2.center = 2.0;
  contraction.init2.width = 0.8;
  merge("contraction", contraction);

  RunConfig comparison = contraction;
  comparison.experiment = ExperimentKind::comparison;
  comparison.source_kind = SourceKind::porous_medium;
  comparison.init1.kind = InitSpec::Kind::box;
  comparison.init1.height = 0.2;
  comparison.init2 = comparison.init1;
  comparison.init2.height = 0.5;
  merge("comparison", comparison);

  RunConfig commut = c;
  commut.experiment = ExperimentKind::commutator;
  commut.grid_n = 4096;
  commut.commutator_e = RunConfig::EField::identity;
  merge("commutator", commut);

  RunConfig kin = c;
  kin.experiment = ExperimentKind::kinetic_check;
  merge("kinetic", kin);

  RunConfig porous = c;
  porous.experiment = ExperimentKind::porous_medium;
  porous.flux_zeta = 1.0;
  porous.flux_alpha = 1.0;
  porous.noise_kind = NoiseKind::diagonal_nonlinear;
  porous.noise_theta = 0.5;
  porous.noise_beta = 2.0;
  porous.source_kind = SourceKind::porous_medium;
  porous.source_lambda = 1.0;
  porous.init1.kind = InitSpec::Kind::bump;
  porous.init1.amplitude = 0.5;
  porous.init1.center = 0.5 * porous.grid_length;
  porous.init1.width = 0.6;
  merge("porous-medium", porous);

  write_file(dir / "manifest.txt",
             manifest_text(cfg, {}, total.assertions, total.exit_code));
  return total;
}

}  // namespace detail

inline RunOutcome run_experiment(const RunConfig& cfg, const CliOptions& opt) {
  const std::string base =
      !opt.out_override.empty() ? opt.out_override : cfg.output_dir;
  RunConfig resolved = cfg;
  if (opt.seeds_override > 0) resolved.seeds_count = opt.seeds_override;
  if (opt.base_seed_override >= 0)
    resolved.seeds_base = static_cast<std::uint64_t>(opt.base_seed_override);
  const std::filesystem::path dir =
      std::filesystem::path(base) / config_hash_hex(resolved);

  switch (resolved.experiment) {
    case ExperimentKind::simulate:
    case ExperimentKind::porous_medium:
      return detail::run_simulate(resolved, opt, dir);
    case ExperimentKind::contraction:
      return detail::run_contraction(resolved, opt, dir);
    case ExperimentKind::comparison:
      return detail::run_comparison(resolved, opt, dir);
    case ExperimentKind::commutator:
      return detail::run_commutator(resolved, opt, dir);
    case ExperimentKind::kinetic_check:
      return detail::run_kinetic_check(resolved, opt, dir);
    case ExperimentKind::all:
      return detail::run_all(resolved, opt, dir);
  }
  throw ConfigError("run_experiment: unknown experiment");
}

}  // namespace sbl
