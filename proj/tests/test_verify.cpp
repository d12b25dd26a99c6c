#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sbl/config.hpp"
#include "sbl/verify.hpp"

using namespace sbl;

namespace {

PairedSpec burgers_shift_pair(int n, double T,
                              const SourceModel& src = SourceModel::none_source()) {
  PairedSpec spec;
  spec.base.grid = Grid1D(n, 4.0);
  spec.base.flux = FluxModel::burgers();
  spec.base.noise = NoiseModel::linear_shift();
  spec.base.source = src;
  spec.base.t_end = T;
  InitSpec a;
  a.kind = InitSpec::Kind::box;
  a.x1 = 1.0;
  a.x2 = 2.0;
  a.height = 0.8;
  InitSpec b;
  b.kind = InitSpec::Kind::bump;
  b.amplitude = 0.4;
  b.center = 2.2;
  b.width = 0.8;
  spec.initial1 = make_initial_field(a, spec.base.grid);
  spec.initial2 = make_initial_field(b, spec.base.grid);
  return spec;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = base + i;
  return s;
}

}  // namespace

TEST_CASE("l1 distance basics and the kinetic cross route") {
  const Grid1D grid(32, 2.0);
  const CellField a = CellField::constant(grid, 1.0);
  const CellField z = CellField::constant(grid, 0.0);
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l1_distance(a, z) == doctest::Approx(2.0));

  CHECK_THROWS_AS(l1_distance(a, CellField::constant(Grid1D(16, 2.0), 0.0)),
                  ShapeError);

  // random fields: sum_x int |chi_r1 - chi_r2| dv dx equals the direct L1
  NormalRng rng(5);
  CellField f = CellField::constant(grid, 0.0), g = f;
  for (int i = 0; i < grid.n_cells; ++i) {
    f.data[i] = 3.0 * (2.0 * rng.next_uniform() - 1.0);
    g.data[i] = 3.0 * (2.0 * rng.next_uniform() - 1.0);
  }
  double kinetic_route = 0.0;
  for (int i = 0; i < grid.n_cells; ++i)
    kinetic_route += l1_chi_distance(f.data[i], g.data[i]) * grid.dx;
  CHECK(std::abs(kinetic_route - l1_distance(f, g)) <= 1e-12);
}

TEST_CASE("paired runs demand a common path") {
  const Grid1D grid(32, 2.0);
  SolveSpec spec;
  spec.grid = grid;
  spec.flux = FluxModel::burgers();
  spec.noise = NoiseModel::linear_shift();
  spec.t_end = 0.25;
  spec.initial = CellField::constant(grid, 0.3);

  const Trajectory t1 = simulate(spec, 1);
  const Trajectory t1b = simulate(spec, 1);
  const Trajectory t2 = simulate(spec, 2);
  CHECK_NOTHROW(PairedRun(t1, t1b));
  CHECK_THROWS_AS(PairedRun(t1, t2), std::logic_error);
}

TEST_CASE("contraction: identical initial data stays at zero distance") {
  PairedSpec spec = burgers_shift_pair(64, 0.25);
  spec.initial2 = spec.initial1;
  const auto rep = contraction_experiment(spec, seed_range(1, 5));
  for (double v : rep.lhs) CHECK(v == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("contraction without source is pathwise non-increasing") {
  const PairedSpec spec = burgers_shift_pair(96, 0.5);
  const auto rep = contraction_experiment(spec, seed_range(1, 20));
  CHECK(rep.source_free);
  CHECK(rep.max_step_increase <= 1e-12);
  CHECK(rep.pass_pathwise);
  CHECK(rep.pass_mean);  // rhs = initial distance, constant in t
  for (std::size_t q = 0; q < rep.times.size(); ++q)
    CHECK(rep.rhs[q] == doctest::Approx(rep.initial_l1));
}

TEST_CASE("contraction with the porous-medium source obeys the growth bound") {
  const SourceModel src = SourceModel::porous_medium(const_coeff(1.0));
  PairedSpec spec = burgers_shift_pair(96, 0.5, src);
  spec.base.snapshot_times = {0.125, 0.25, 0.375};
  const auto rep = contraction_experiment(spec, seed_range(11, 40));
  CHECK(rep.pass_mean);
  // rate = lambda * max 2 rho/(1+rho^2)^2 = 3 sqrt(3)/8 since K > 1/sqrt(3)
  const double rate = 3.0 * std::sqrt(3.0) / 8.0;
  CHECK(rep.rhs.back() ==
        doctest::Approx(rep.initial_l1 * std::exp(rate * 0.5)).epsilon(1e-6));
}

TEST_CASE("contraction scaling: kappa A scales the exponent rate by kappa") {
  const SourceModel src = SourceModel::porous_medium(const_coeff(1.0));
  PairedSpec spec1 = burgers_shift_pair(64, 0.25, src);
  PairedSpec spec2 = burgers_shift_pair(64, 0.25, src.scaled_by(2.0));
  const auto r1 = contraction_experiment(spec1, seed_range(1, 3));
  const auto r2 = contraction_experiment(spec2, seed_range(1, 3));
  const double g1 = std::log(r1.rhs.back() / r1.initial_l1);
  const double g2 = std::log(r2.rhs.back() / r2.initial_l1);
  CHECK(g2 == doctest::Approx(2.0 * g1).epsilon(1e-9));
}

TEST_CASE("comparison principle experiments") {
  const SourceModel src = SourceModel::porous_medium(const_coeff(1.0));
  PairedSpec spec;
  spec.base.grid = Grid1D(96, 4.0);
  spec.base.flux = FluxModel::burgers();
  spec.base.noise = NoiseModel::linear_shift();
  spec.base.source = src;
  spec.base.t_end = 0.5;
  InitSpec lo;
  lo.kind = InitSpec::Kind::box;
  lo.x1 = 1.0;
  lo.x2 = 2.0;
  lo.height = 0.2;
  InitSpec hi = lo;
  hi.height = 0.5;
  spec.initial1 = make_initial_field(lo, spec.base.grid);
  spec.initial2 = make_initial_field(hi, spec.base.grid);

  const auto rep = comparison_experiment(spec, seed_range(1, 20));
  CHECK(rep.pass);
  CHECK(rep.max_violation <= 1e-12);

  SUBCASE("equal data propagates equality") {
    PairedSpec eq = spec;
    eq.initial1 = eq.initial2;
    const auto r = comparison_experiment(eq, seed_range(1, 3));
    CHECK(r.max_violation == 0.0);
  }
  SUBCASE("unordered initial data is rejected") {
    PairedSpec bad = spec;
    bad.initial1 = spec.initial2;
    bad.initial2 = spec.initial1;
    CHECK_THROWS_AS(comparison_experiment(bad, seed_range(1, 2)), ConfigError);
  }
  SUBCASE("empty seed list is a config error") {
    CHECK_THROWS_AS(comparison_experiment(spec, {}), ConfigError);
    CHECK_THROWS_AS(contraction_experiment(spec, {}), ConfigError);
  }
}

TEST_CASE("paired trajectory aborts propagate with the seed id") {
  PairedSpec spec;
  spec.base.grid = Grid1D(16, 1.0);
  spec.base.flux = FluxModel::zero_flux();
  spec.base.source = SourceModel::porous_medium(const_coeff(2500.0));
  spec.base.t_end = 1.0;
  spec.base.dt_override = 1e-3;
  spec.initial1 = CellField::constant(spec.base.grid, 0.4);
  spec.initial2 = CellField::constant(spec.base.grid, 0.5);
  try {
    contraction_experiment(spec, seed_range(7, 2));
    FAIL("expected a StepError");
  } catch (const StepError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("comparison recovers nonnegativity against the zero solution") {
  PorousMediumSpec pm;
  pm.zeta = {{1.0, 0.0}};
  pm.alpha = 1.0;
  pm.beta = 2.0;
  pm.theta_coeff = const_coeff(0.5);
  pm.lambda_coeff = const_coeff(1.0);

  PairedSpec spec;
  spec.base.grid = Grid1D(96, 4.0);
  spec.base.flux = pm.induced_flux();
  spec.base.noise = pm.induced_noise();
  spec.base.source = pm.induced_source();
  spec.base.t_end = 0.4;
  spec.initial1 = CellField::constant(spec.base.grid, 0.0);
  InitSpec bump;
  bump.kind = InitSpec::Kind::bump;
  bump.amplitude = 0.5;
  bump.center = 2.0;
  bump.width = 0.6;
  spec.initial2 = make_initial_field(bump, spec.base.grid);

  const auto rep = comparison_experiment(spec, seed_range(7, 10));
  CHECK(rep.pass);  // rho1 = 0 <= rho2 pathwise, i.e. rho2 stays nonnegative
}

TEST_CASE("commutator: constant E vanishes identically") {
  const Grid1D grid(1024, 4.0);
  std::vector<double> e(grid.n_cells, 2.5), f(grid.n_cells);
  for (int i = 0; i < grid.n_cells; ++i) {
    const double u = (grid.center(i) - 2.0) / 1.0;
    f[i] = (u * u < 1.0) ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
  }
  const MollifierKernel kernel(KernelKind::rho1_space);
  const auto rep =
      commutator_test(e, f, kernel, {0.2, 0.1, 0.05}, grid, 0.4, 3.6);
  for (double nrm : rep.norms) CHECK(nrm <= 1e-13);
  CHECK(rep.pass);
}

TEST_CASE("commutator: E(x) = x against the convolution oracle") {
  // continuum identity: (x dF/dx) * rho_eps - x d/dx (F * rho_eps)
  //                     = - int y rho_eps(y) F'(x - y) dy
  const int n = 2048;
  const Grid1D grid(n, 4.0);  // x in [0,4], centered coordinate x - 2 in [-2,2]
  std::vector<double> e(n), f(n);
  const double w = 0.8;
  const auto f_exact = [&](double xc) {
    const double u = xc / w;
    return (u * u < 1.0) ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
  };
  const auto df_exact = [&](double xc) {
    const double u = xc / w;
    if (u * u >= 1.0) return 0.0;
    return f_exact(xc) * (-2.0 * u / sq(1.0 - u * u)) / w;
  };
  for (int i = 0; i < n; ++i) {
    const double xc = grid.center(i) - 2.0;
    e[i] = xc;
    f[i] = f_exact(xc);
  }
  const MollifierKernel kernel(KernelKind::rho1_space);
  const double eps = 0.1;
  const auto rep = commutator_test(e, f, kernel, {eps}, grid, 0.4, 3.6);

  // oracle at 10x resolution
  double oracle = 0.0;
  const int fine = 10;
  for (int i = 0; i < n; ++i) {
    const double x = grid.center(i);
    if (x < 0.4 || x > 3.6) continue;
    const double xc = x - 2.0;
    double acc = 0.0;
    const int m = 200;
    for (int j = 0; j < m; ++j) {
      const double y = -eps + 2.0 * eps * (j + 0.5) / m;
      acc += -y * kernel.profile(y / eps) / eps * df_exact(xc - y) *
             (2.0 * eps / m);
    }
    oracle += std::abs(acc) * grid.dx;
  }
  (void)fine;
  CHECK(rep.norms[0] == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("commutator: rate and monotone decay for a Lipschitz/smooth pair") {
  const int n = 4096;
  const Grid1D grid(n, 4.0);
  std::vector<double> e(n), f(n);
  for (int i = 0; i < n; ++i) {
    const double xc = grid.center(i) - 2.0;
    e[i] = xc;
    const double u = xc / 1.0;
    f[i] = (u * u < 1.0) ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
  }
  const MollifierKernel kernel(KernelKind::rho1_space);
  const auto rep = commutator_test(
      e, f, kernel, {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125}, grid,
      0.3, 3.7);
  CHECK(rep.fitted_rate >= 0.8);
  for (std::size_t q = 0; q + 1 < rep.norms.size(); ++q)
    CHECK(rep.norms[q + 1] <= rep.norms[q] * 1.05);  // monotone within 5%
  CHECK(rep.decays_to_tol);  // below 1e-2 of the largest-eps norm
  CHECK(rep.pass);
  CHECK_FALSE(rep.hypothesis_violated);
}

TEST_CASE("commutator: BV data flags the hypothesis instead of failing") {
  const int n = 4096;
  const Grid1D grid(n, 4.0);
  std::vector<double> e(n), f(n);
  for (int i = 0; i < n; ++i) {
    const double xc = grid.center(i) - 2.0;
    e[i] = std::sin(xc);
    f[i] = std::abs(xc) < 1.0 ? 1.0 : 0.0;  // step: BV, not W^{1,1}
  }
  const MollifierKernel kernel(KernelKind::rho1_space);
  const auto rep =
      commutator_test(e, f, kernel, {0.2, 0.1, 0.05, 0.025}, grid, 0.3, 3.7);
  CHECK(rep.hypothesis_violated);
  // norms stay bounded
  for (double nrm : rep.norms) CHECK(nrm <= 10.0 * rep.norms.front() + 1.0);
}

TEST_CASE("commutator: eps below grid resolution raises") {
  const Grid1D grid(64, 4.0);
  std::vector<double> e(64, 1.0), f(64, 0.0);
  const MollifierKernel kernel(KernelKind::rho1_space);
  CHECK_THROWS_AS(commutator_test(e, f, kernel, {0.01}, grid, 0.0, 4.0),
                  std::out_of_range);
}

TEST_CASE("report tables carry named header rows") {
  ContractionReport rep;
  rep.times = {0.0, 1.0};
  rep.lhs = {1.0, 0.5};
  rep.rhs = {1.0, 1.0};
  rep.margin = {0.0, 0.5};
  rep.clt_sigma = {0.0, 0.01};
  const std::string csv = csv_contraction(rep);
  CHECK(csv.substr(0, csv.find('\n')) == "t,lhs,rhs,margin,clt_sigma");

  CommutatorReport crep;
  crep.eps = {0.2};
  crep.norms = {0.1};
  CHECK(csv_commutator(crep).substr(0, 12) == "eps1,l1_norm");
}

TEST_CASE("emit_report writes files and maps pass/fail to exit status") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / "sbl_test_report" / "case_a";
  fs::remove_all(dir.parent_path());

  const int ok = emit_report(dir, {{"alpha", true, "fine"}},
                             {{"table.csv", "a,b\n1,2\n"}});
  CHECK(ok == 0);
  CHECK(fs::exists(dir / "table.csv"));
  std::ifstream in(dir / "summary.txt");
  std::string line;
  std::getline(in, line);
  CHECK(line == "assertion alpha: PASS (fine)");

  // injected violation: nonzero status plus locus detail in the summary
  const int bad = emit_report(dir, {{"order", false, "seed 3, t = 0.5, x = 1.25"}}, {});
  CHECK(bad == 1);

  fs::remove_all(dir.parent_path());
}
