// Problem data registry: flux B with derivative b = B', noise coefficients
// B_ij with sigma_ij = d/drho B_ij, diffusion matrix a = (1/2) sigma sigma,
// and sources A(t,x,rho) with A(t,x,0) = 0.
//
// All models are immutable after construction and normalized so B(0) = 0.
// Dimension d is 1 or 2; the solver consumes component 0 only.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbl/math.hpp"

namespace sbl {

inline constexpr int kMaxDim = 2;
using Vec = std::array<double, kMaxDim>;
using Mat = std::array<std::array<double, kMaxDim>, kMaxDim>;

inline Mat zero_mat() { return Mat{{{0.0, 0.0}, {0.0, 0.0}}}; }

using TimeCoeff = std::function<double(double)>;  // e.g. theta(t), lambda(t)

inline TimeCoeff const_coeff(double value) {
  return [value](double) { return value; };
}

// ---------------------------------------------------------------------------
// Flux models

enum class FluxKind { zero, burgers, linear_advection, porous_medium,
                      custom_polynomial };

struct FluxModel {
  FluxKind kind = FluxKind::zero;
  int dim = 1;
  Vec speed{{0.0, 0.0}};          // linear advection
  Vec zeta{{0.0, 0.0}};           // porous medium
  double alpha = 0.0;             // porous medium exponent, >= 0
  std::vector<double> coeffs;     // custom polynomial, ascending, coeffs[0]=0

  static FluxModel zero_flux(int d = 1) {
    FluxModel m;
    m.kind = FluxKind::zero;
    m.dim = d;
    return m;
  }
  static FluxModel burgers() {
    FluxModel m;
    m.kind = FluxKind::burgers;
    m.dim = 1;
    return m;
  }
  static FluxModel linear_advection(Vec c, int d = 1) {
    FluxModel m;
    m.kind = FluxKind::linear_advection;
    m.dim = d;
    m.speed = c;
    return m;
  }
  static FluxModel porous_medium(Vec zeta, double alpha, int d = 1) {
    if (alpha < 0.0)
      throw std::invalid_argument("porous_medium flux: alpha must be >= 0");
    FluxModel m;
    m.kind = FluxKind::porous_medium;
    m.dim = d;
    m.zeta = zeta;
    m.alpha = alpha;
    return m;
  }
  // Degree <= 6, coefficients ascending; the constant term is forced to zero
  // (fluxes are defined up to a constant, we pin B(0) = 0).
  static FluxModel custom_polynomial(std::vector<double> c) {
    if (c.size() > 7)
      throw std::invalid_argument("custom flux: degree must be <= 6");
    if (c.empty()) c = {0.0};
    c[0] = 0.0;
    FluxModel m;
    m.kind = FluxKind::custom_polynomial;
    m.dim = 1;
    m.coeffs = std::move(c);
    return m;
  }

  Vec eval(double rho) const {
    if (!std::isfinite(rho)) throw std::domain_error("flux eval: rho not finite");
    Vec out{{0.0, 0.0}};
    switch (kind) {
      case FluxKind::zero:
        break;
      case FluxKind::burgers:
        out[0] = 0.5 * rho * rho;
        break;
      case FluxKind::linear_advection:
        for (int i = 0; i < dim; ++i) out[i] = speed[i] * rho;
        break;
      case FluxKind::porous_medium: {
        const double s = signed_pow(rho, alpha + 1.0);
        for (int i = 0; i < dim; ++i) out[i] = zeta[i] * s;
        break;
      }
      case FluxKind::custom_polynomial:
        out[0] = poly_eval(coeffs, rho);
        break;
    }
    return out;
  }

  Vec deriv(double rho) const {
    if (!std::isfinite(rho)) throw std::domain_error("flux deriv: rho not finite");
    Vec out{{0.0, 0.0}};
    switch (kind) {
      case FluxKind::zero:
        break;
      case FluxKind::burgers:
        out[0] = rho;
        break;
      case FluxKind::linear_advection:
        for (int i = 0; i < dim; ++i) out[i] = speed[i];
        break;
      case FluxKind::porous_medium: {
        const double s = (alpha == 0.0 && rho == 0.0)
                             ? 1.0
                             : std::pow(std::abs(rho), alpha);
        for (int i = 0; i < dim; ++i) out[i] = zeta[i] * (alpha + 1.0) * s;
        break;
      }
      case FluxKind::custom_polynomial:
        out[0] = poly_eval(poly_derivative(coeffs), rho);
        break;
    }
    return out;
  }

  // sup of |b| over [lo, hi], componentwise max.
  double lipschitz_bound_on(double lo, double hi) const {
    if (!(hi >= lo)) std::swap(lo, hi);
    switch (kind) {
      case FluxKind::zero:
        return 0.0;
      case FluxKind::burgers:
        return std::max(std::abs(lo), std::abs(hi));
      case FluxKind::linear_advection: {
        double m = 0.0;
        for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(speed[i]));
        return m;
      }
      case FluxKind::porous_medium: {
        double z = 0.0;
        for (int i = 0; i < dim; ++i) z = std::max(z, std::abs(zeta[i]));
        const double r = std::max(std::abs(lo), std::abs(hi));
        return z * (alpha + 1.0) * ((alpha == 0.0 && r == 0.0) ? 1.0 : std::pow(r, alpha));
      }
      case FluxKind::custom_polynomial: {
        // |b| attains its sup at an endpoint or a critical point of b.
        const auto b = poly_derivative(coeffs);
        double m = std::max(std::abs(poly_eval(b, lo)), std::abs(poly_eval(b, hi)));
        for (double r : poly_roots_in(poly_derivative(b), lo, hi))
          m = std::max(m, std::abs(poly_eval(b, r)));
        return m;
      }
    }
    return 0.0;
  }

  // Engquist-Osher splitting of component 0:
  //   eo_plus(u)  = int_0^u max(b, 0),  nondecreasing,
  //   eo_minus(u) = int_0^u min(b, 0),  nonincreasing,
  // so eo_plus + eo_minus = B and the numerical flux
  //   F(a, b) = eo_plus(a) + eo_minus(b)
  // is monotone for any locally Lipschitz B.
  double eo_plus(double u) const {
    switch (kind) {
      case FluxKind::zero:
        return 0.0;
      case FluxKind::burgers:
        return u > 0.0 ? 0.5 * u * u : 0.0;
      case FluxKind::linear_advection:
        return speed[0] > 0.0 ? speed[0] * u : 0.0;
      case FluxKind::porous_medium:
        // b = zeta0 (alpha+1) |rho|^alpha has the constant sign of zeta0
        return zeta[0] > 0.0 ? zeta[0] * signed_pow(u, alpha + 1.0) : 0.0;
      case FluxKind::custom_polynomial:
        return eo_split_custom(u, /*positive_part=*/true);
    }
    return 0.0;
  }
  double eo_minus(double u) const {
    switch (kind) {
      case FluxKind::zero:
        return 0.0;
      case FluxKind::burgers:
        // int_0^u min(s, 0) ds = u^2/2 for u < 0 (nonincreasing in u)
        return u < 0.0 ? 0.5 * u * u : 0.0;
      case FluxKind::linear_advection:
        return speed[0] < 0.0 ? speed[0] * u : 0.0;
      case FluxKind::porous_medium:
        return zeta[0] < 0.0 ? zeta[0] * signed_pow(u, alpha + 1.0) : 0.0;
      case FluxKind::custom_polynomial:
        return eo_split_custom(u, /*positive_part=*/false);
    }
    return 0.0;
  }
  double eo_flux(double a, double b) const { return eo_plus(a) + eo_minus(b); }

 private:
  // int_0^u b_pm(s) ds for polynomial b: split [0, u] at the sign changes of
  // b and telescope with the exact antiderivative B on pieces of one sign.
  double eo_split_custom(double u, bool positive_part) const {
    if (u == 0.0) return 0.0;
    const auto b = poly_derivative(coeffs);
    const double lo = std::min(0.0, u), hi = std::max(0.0, u);
    std::vector<double> pts{lo};
    for (double r : poly_roots_in(b, lo, hi, 256)) pts.push_back(r);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const double a = pts[k], c = pts[k + 1];
      if (!(c > a)) continue;
      const double bm = poly_eval(b, 0.5 * (a + c));
      const bool keep = positive_part ? (bm > 0.0) : (bm < 0.0);
      if (keep) acc += poly_eval(coeffs, c) - poly_eval(coeffs, a);
    }
    return u > 0.0 ? acc : -acc;
  }
};

// free-function spelling of the operation
inline Vec eval_flux(const FluxModel& model, double rho) { return model.eval(rho); }

// ---------------------------------------------------------------------------
// Noise models (all diagonal, sigma symmetric by construction)

enum class NoiseKind { zero, linear_shift, diagonal_nonlinear };

struct NoiseModel {
  NoiseKind kind = NoiseKind::zero;
  int dim = 1;
  bool symmetric = true;
  TimeCoeff theta = const_coeff(0.0);
  double beta = 0.0;  // >= 0

  static NoiseModel zero_noise(int d = 1) {
    NoiseModel m;
    m.kind = NoiseKind::zero;
    m.dim = d;
    return m;
  }
  // B_ij(t, rho) = delta_ij rho, sigma = identity
  static NoiseModel linear_shift(int d = 1) {
    NoiseModel m;
    m.kind = NoiseKind::linear_shift;
    m.dim = d;
    m.theta = const_coeff(1.0);
    return m;
  }
  // B_ij(t, rho) = delta_ij theta(t) |rho|^(beta/2) rho
  static NoiseModel diagonal_nonlinear(TimeCoeff theta, double beta, int d = 1) {
    if (beta < 0.0)
      throw std::invalid_argument("diagonal_nonlinear noise: beta must be >= 0");
    NoiseModel m;
    m.kind = NoiseKind::diagonal_nonlinear;
    m.dim = d;
    m.theta = std::move(theta);
    m.beta = beta;
    return m;
  }

  // scalar diagonal profile g with B_ii = g(t, rho)
  double g_profile(double t, double rho) const {
    switch (kind) {
      case NoiseKind::zero:
        return 0.0;
      case NoiseKind::linear_shift:
        return rho;
      case NoiseKind::diagonal_nonlinear:
        return theta(t) * signed_pow(rho, 0.5 * beta + 1.0);
    }
    return 0.0;
  }
  // d/drho of g. At rho = 0: 0 for beta > 0, theta(t) for beta = 0.
  double g_deriv(double t, double rho) const {
    switch (kind) {
      case NoiseKind::zero:
        return 0.0;
      case NoiseKind::linear_shift:
        return 1.0;
      case NoiseKind::diagonal_nonlinear: {
        if (rho == 0.0) return beta > 0.0 ? 0.0 : theta(t);
        return theta(t) * (0.5 * beta + 1.0) * std::pow(std::abs(rho), 0.5 * beta);
      }
    }
    return 0.0;
  }

  Mat b_coeff(double t, double rho) const {
    if (!std::isfinite(rho) || !std::isfinite(t))
      throw std::domain_error("noise b_coeff: input not finite");
    Mat out = zero_mat();
    const double g = g_profile(t, rho);
    for (int i = 0; i < dim; ++i) out[i][i] = g;
    return out;
  }

  Mat sigma(double t, double rho) const {
    if (!std::isfinite(rho) || !std::isfinite(t))
      throw std::domain_error("noise sigma: input not finite");
    Mat out = zero_mat();
    const double s = g_deriv(t, rho);
    for (int i = 0; i < dim; ++i) out[i][i] = s;
    return out;
  }

  // sup of |sigma_11| over rho in [lo, hi]; the noise sub-CFL speed.
  double sigma_bound(double t, double lo, double hi) const {
    if (!(hi >= lo)) std::swap(lo, hi);
    const double r = std::max(std::abs(lo), std::abs(hi));
    switch (kind) {
      case NoiseKind::zero:
        return 0.0;
      case NoiseKind::linear_shift:
        return 1.0;
      case NoiseKind::diagonal_nonlinear:
        return std::abs(theta(t)) * (0.5 * beta + 1.0) *
               ((beta == 0.0) ? 1.0 : std::pow(r, 0.5 * beta));
    }
    return 0.0;
  }
};

// a = (1/2) sigma sigma; symmetric PSD for our diagonal sigmas.
inline Mat diffusion_matrix(const NoiseModel& model, double t, double rho) {
  const Mat s = model.sigma(t, rho);
  if (model.symmetric) {
    for (int i = 0; i < model.dim; ++i)
      for (int j = 0; j < model.dim; ++j)
        if (s[i][j] != s[j][i])
          throw std::logic_error("diffusion_matrix: sigma not symmetric");
  }
  Mat a = zero_mat();
  for (int i = 0; i < model.dim; ++i)
    for (int j = 0; j < model.dim; ++j) {
      double acc = 0.0;
      for (int k = 0; k < model.dim; ++k) acc += s[i][k] * s[k][j];
      a[i][j] = 0.5 * acc;
    }
  return a;
}

// ---------------------------------------------------------------------------
// Source models, A(t, x, rho) with A(t, x, 0) = 0.

enum class SourceKind { none, porous_medium, scaled };

struct SourceModel {
  SourceKind kind = SourceKind::none;
  TimeCoeff lambda = const_coeff(0.0);
  double scale = 1.0;  // multiplies A; growth-rate scaling checks use it

  static SourceModel none_source() { return SourceModel{}; }
  // A(t, rho) = lambda(t) rho^2 / (1 + rho^2)
  static SourceModel porous_medium(TimeCoeff lambda) {
    SourceModel m;
    m.kind = SourceKind::porous_medium;
    m.lambda = std::move(lambda);
    return m;
  }
  SourceModel scaled_by(double kappa) const {
    SourceModel m = *this;
    m.scale *= kappa;
    return m;
  }

  double eval(double t, double x, double rho) const {
    if (!std::isfinite(t) || !std::isfinite(x) || !std::isfinite(rho))
      throw std::domain_error("source eval: input not finite");
    switch (kind) {
      case SourceKind::none:
        return 0.0;
      case SourceKind::porous_medium:
      case SourceKind::scaled:
        return scale * lambda(t) * rho * rho / (1.0 + rho * rho);
    }
    return 0.0;
  }

  double deriv_v(double t, double x, double rho) const {
    (void)x;
    switch (kind) {
      case SourceKind::none:
        return 0.0;
      case SourceKind::porous_medium:
      case SourceKind::scaled:
        return scale * lambda(t) * 2.0 * rho / sq(1.0 + rho * rho);
    }
    return 0.0;
  }

  // || [d/dv A(t,.,.)]^+ ||_inf restricted to |rho| <= k_bound.
  // For the porous-medium source the profile 2 rho / (1+rho^2)^2 peaks at
  // rho = 1/sqrt(3) with value 3 sqrt(3) / 8.
  double pos_part_sup(double t, double k_bound) const {
    switch (kind) {
      case SourceKind::none:
        return 0.0;
      case SourceKind::porous_medium:
      case SourceKind::scaled: {
        const double lam = std::abs(scale * lambda(t));
        const double rs = 1.0 / std::sqrt(3.0);
        const double r = std::min(k_bound, rs);
        return lam * 2.0 * r / sq(1.0 + r * r);
      }
    }
    return 0.0;
  }

  // sup_{|v| <= k} |A(t, x, v)|; the a-tilde weight in the mass bound.
  double abs_sup(double t, double k_bound) const {
    switch (kind) {
      case SourceKind::none:
        return 0.0;
      case SourceKind::porous_medium:
      case SourceKind::scaled:
        return std::abs(scale * lambda(t)) * k_bound * k_bound /
               (1.0 + k_bound * k_bound);
    }
    return 0.0;
  }

  // sup |d/dv A| on [-k, k]; bounds the source-step Lipschitz constant.
  double lip_bound(double t, double k_bound) const {
    return pos_part_sup(t, k_bound);  // profile is odd, |.|-sup equals +-sup
  }
};

inline double eval_source(const SourceModel& model, double t, double x,
                          double rho) {
  return model.eval(t, x, rho);
}

// ---------------------------------------------------------------------------
// The porous-medium problem family: everything induced from (zeta, alpha,
// beta, theta, lambda).

struct PorousMediumSpec {
  Vec zeta{{1.0, 0.0}};
  double alpha = 0.0;
  double beta = 0.0;
  TimeCoeff theta_coeff = const_coeff(1.0);
  TimeCoeff lambda_coeff = const_coeff(1.0);
  int dim = 1;

  FluxModel induced_flux() const {
    return FluxModel::porous_medium(zeta, alpha, dim);
  }
  NoiseModel induced_noise() const {
    return NoiseModel::diagonal_nonlinear(theta_coeff, beta, dim);
  }
  SourceModel induced_source() const {
    return SourceModel::porous_medium(lambda_coeff);
  }
};

}  // namespace sbl
