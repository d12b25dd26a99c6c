// Small numeric helpers shared across the library: sign conventions,
// quadrature, seeded normal sampling, polynomial utilities, rate fitting.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sbl {

// Error taxonomy. ConfigError maps to CLI exit code 2; StepError flags CFL /
// step-size / blow-up trouble inside the solver.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline double sq(double x) { return x * x; }

// sign(0) = 0 throughout (symmetric choice for Kruzkov derivatives).
inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double pos_part(double x) { return x > 0.0 ? x : 0.0; }
inline double neg_part(double x) { return x < 0.0 ? -x : 0.0; }

// sign(rho)*|rho|^(a+1), continuous through 0 for a >= 0.
inline double signed_pow(double rho, double exponent_plus_one) {
  if (rho == 0.0) return 0.0;
  return (rho > 0.0 ? 1.0 : -1.0) * std::pow(std::abs(rho), exponent_plus_one);
}

inline bool finite(double x) { return std::isfinite(x); }

// --------------------------------------------------------------------------
// Seed mixing (splitmix64) so that base_seed + index gives decorrelated
// generator states.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// xoshiro256++ core. Hand-rolled so paths are bit-identical for a given seed
// on every platform (std::normal_distribution is implementation-defined).
class NormalRng {
 public:
  explicit NormalRng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s = splitmix64(s);
      word = s;
    }
    has_cached_ = false;
  }

  double next_uniform() {  // in (0,1]
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// --------------------------------------------------------------------------
// Adaptive Simpson quadrature.
namespace detail {
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f,
                                   double a, double b, double fa, double fm,
                                   double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12, int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = detail::simpson(f, a, b, fa, fm, fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol,
                                      max_depth);
}

// --------------------------------------------------------------------------
// Polynomials, coefficients in ascending order.
inline double poly_eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i)
    d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

// Roots of a polynomial inside [lo, hi] by sign-change bracketing plus
// bisection. Sufficient for the degree <= 5 derivatives that arise here.
inline std::vector<double> poly_roots_in(const std::vector<double>& c,
                                         double lo, double hi,
                                         int scan_points = 512) {
  std::vector<double> roots;
  if (!(hi > lo)) return roots;
  double prev_x = lo;
  double prev_f = poly_eval(c, lo);
  for (int k = 1; k <= scan_points; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / scan_points;
    const double fx = poly_eval(c, x);
    if (prev_f == 0.0) {
      roots.push_back(prev_x);
    } else if (prev_f * fx < 0.0) {
      double a = prev_x, b = x, fa = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm2 = poly_eval(c, m);
        if (fm2 == 0.0) {
          a = b = m;
          break;
        }
        if (fa * fm2 < 0.0) {
          b = m;
        } else {
          a = m;
          fa = fm2;
        }
        if (b - a <= 1e-15 * std::max(1.0, std::abs(m))) break;
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_f = fx;
  }
  if (prev_f == 0.0) roots.push_back(prev_x);
  return roots;
}

// --------------------------------------------------------------------------
// Least-squares slope of log(y) against log(x); used for convergence rates.
inline double fit_loglog_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need >= 2 samples");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::domain_error("fit_loglog_slope: nonpositive sample");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  return (n * sxy - sx * sy) / denom;
}

// Smooth compactly supported bump, exp(-1/(1-u^2)) on (-1,1), unnormalized.
inline double bump_profile(double u) {
  const double s = u * u;
  if (s >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s));
}

// FNV-1a over bytes; the config hash.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace sbl
