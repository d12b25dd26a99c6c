// Seeded Brownian paths on a fixed time grid, discrete Ito integrals, and
// the anticipating time mollifier used by the stochastic mollification bound.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "sbl/math.hpp"

namespace sbl {

// ---------------------------------------------------------------------------
// Wiener path sampled at t_k = k dt, k = 0..n_steps. values is
// (n_steps+1) x dim row-major; values[0] = 0 and increments are iid
// N(0, dt I_d) under the seeded generator. Identical seed, identical path.
struct BrownianPath {
  std::uint64_t seed = 0;
  double dt = 0.0;
  int n_steps = 0;
  int dim = 1;
  std::vector<double> values;

  double w(int k, int j = 0) const { return values[static_cast<std::size_t>(k) * dim + j]; }
  double increment(int k, int j = 0) const { return w(k + 1, j) - w(k, j); }
  double horizon() const { return n_steps * dt; }

  std::uint64_t content_hash() const {
    std::uint64_t h = fnv1a(&seed, sizeof seed);
    h = fnv1a(&dt, sizeof dt, h);
    h = fnv1a(values.data(), values.size() * sizeof(double), h);
    return h;
  }
};

inline BrownianPath sample_path(std::uint64_t seed, double horizon, double dt,
                                int dim = 1) {
  if (!(horizon > 0.0) || !(dt > 0.0))
    throw ConfigError("sample_path: horizon and dt must be positive");
  if (dim < 1) throw ConfigError("sample_path: dim must be >= 1");
  const double ratio = horizon / dt;
  const int n = static_cast<int>(std::llround(ratio));
  if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("sample_path: horizon/dt must be integral");

  BrownianPath path;
  path.seed = seed;
  path.dt = dt;
  path.n_steps = n;
  path.dim = dim;
  path.values.assign(static_cast<std::size_t>(n + 1) * dim, 0.0);
  NormalRng rng(splitmix64(seed));
  const double root_dt = std::sqrt(dt);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < dim; ++j)
      path.values[static_cast<std::size_t>(k + 1) * dim + j] =
          path.values[static_cast<std::size_t>(k) * dim + j] +
          root_dt * rng.next_normal();
  return path;
}

// Restriction of a path to a coarser grid (every `factor`-th node). The same
// realization drives runs at different resolutions in refinement studies.
inline BrownianPath coarsen_path(const BrownianPath& fine, int factor) {
  if (factor < 1 || fine.n_steps % factor != 0)
    throw ConfigError("coarsen_path: factor must divide n_steps");
  BrownianPath out;
  out.seed = fine.seed;
  out.dt = fine.dt * factor;
  out.n_steps = fine.n_steps / factor;
  out.dim = fine.dim;
  out.values.resize(static_cast<std::size_t>(out.n_steps + 1) * out.dim);
  for (int k = 0; k <= out.n_steps; ++k)
    for (int j = 0; j < out.dim; ++j)
      out.values[static_cast<std::size_t>(k) * out.dim + j] =
          fine.w(k * factor, j);
  return out;
}

// ---------------------------------------------------------------------------
// Step functions of time on the path grid: values[k] = g(t_k).
struct StepFunction {
  double dt = 0.0;
  std::vector<double> values;

  int n_nodes() const { return static_cast<int>(values.size()); }
  double horizon() const { return (n_nodes() - 1) * dt; }

  static StepFunction sampled(double dt, int n_nodes,
                              const std::function<double(double)>& f) {
    StepFunction g;
    g.dt = dt;
    g.values.resize(n_nodes);
    for (int k = 0; k < n_nodes; ++k) g.values[k] = f(k * dt);
    return g;
  }

  // L2(0, T) norm squared by left-point quadrature on the grid.
  double l2_sq(double T) const {
    const int n = std::min(n_nodes() - 1, static_cast<int>(std::llround(T / dt)));
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += values[k] * values[k];
    return s * dt;
  }
};

// Left-point (Ito) Riemann sums: I(t_k) = sum_{j<k} f(t_j) (W(t_{j+1}) - W(t_j)).
// A discrete martingale in k.
inline StepFunction ito_integral(const StepFunction& f, const BrownianPath& path,
                                 int component = 0) {
  if (f.n_nodes() != path.n_steps + 1 ||
      std::abs(f.dt - path.dt) > 1e-12 * std::max(1.0, path.dt))
    throw ShapeError("ito_integral: integrand not on the path grid");
  StepFunction out;
  out.dt = path.dt;
  out.values.assign(f.values.size(), 0.0);
  double acc = 0.0;
  for (int k = 0; k < path.n_steps; ++k) {
    acc += f.values[k] * path.increment(k, component);
    out.values[k + 1] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mollifier kernels: smooth unit-mass bumps. rho1 (space) and rho3 (velocity)
// are centered on (-1, 1); rho2 (time) is supported in (-1, 0) so that
// convolution at t reads the integrand on the anticipating window [t, t+eps].
enum class KernelKind { rho1_space, rho2_time, rho3_velocity };

struct MollifierKernel {
  KernelKind which = KernelKind::rho1_space;

  explicit MollifierKernel(KernelKind k) : which(k) {
    norm_ = 1.0;
    norm_ = 1.0 / integrate([this](double u) { return raw(u); },
                            support_lo(), support_hi(), 1e-14);
  }

  double support_lo() const { return -1.0; }
  double support_hi() const { return which == KernelKind::rho2_time ? 0.0 : 1.0; }

  double profile(double u) const { return norm_ * raw(u); }

  double mass() const {
    return integrate([this](double u) { return profile(u); }, support_lo(),
                     support_hi(), 1e-14);
  }

 private:
  double raw(double u) const {
    if (which == KernelKind::rho2_time) return bump_profile(2.0 * u + 1.0);
    return bump_profile(u);
  }
  double norm_ = 1.0;
};

// Discrete convolution with rho2_eps(t) = eps^-1 rho2(t/eps), midpoint rule
// on the path grid. Output node k reads g on [t_k, t_k + eps2] only, so the
// result is defined on a grid shortened by round(eps2/dt) nodes; callers
// extend the input past the horizon of interest.
inline StepFunction mollify_in_time(const StepFunction& g,
                                    const MollifierKernel& kernel, double eps2) {
  if (kernel.which != KernelKind::rho2_time)
    throw std::invalid_argument("mollify_in_time: kernel must be rho2-time");
  if (!(eps2 > 0.0)) throw std::invalid_argument("mollify_in_time: eps2 <= 0");
  const double dt = g.dt;
  const int window = static_cast<int>(std::llround(eps2 / dt));
  if (window < 1) {
    std::cerr << "sbl: warning: eps2 < dt, time mollification degenerates to"
                 " the identity\n";
    return g;
  }
  if (g.n_nodes() <= window + 1)
    throw std::invalid_argument("mollify_in_time: integrand too short for eps2");

  // weights at s_m = -(m + 1/2) dt, normalized to unit discrete mass
  std::vector<double> weight(window);
  double wsum = 0.0;
  for (int m = 0; m < window; ++m) {
    const double s = -(m + 0.5) * dt;
    weight[m] = kernel.profile(s / eps2);
    wsum += weight[m];
  }
  for (double& w : weight) w /= wsum;

  StepFunction out;
  out.dt = dt;
  out.values.assign(g.values.size() - window, 0.0);
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    double acc = 0.0;
    for (int m = 0; m < window; ++m) {
      // g(t_k - s_m) with s_m mid-cell: average of the bracketing nodes
      acc += weight[m] * 0.5 * (g.values[k + m] + g.values[k + m + 1]);
    }
    out.values[k] = acc;
  }
  return out;
}

}  // namespace sbl
