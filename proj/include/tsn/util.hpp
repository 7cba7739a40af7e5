#ifndef TSN_UTIL_HPP_
#define TSN_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsn {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

/// Invalid physical input (non-positive pressure, out-of-range argument, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// A nonlinear solve failed to converge or has no admissible root.
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration parsing/validation failure.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Polynomials (perturbation profiles, wall shape)
// ---------------------------------------------------------------------------

/// Dense polynomial c0 + c1 x + c2 x^2 + ... used for inlet/wall profiles.
class Poly {
 public:
  Poly() = default;
  explicit Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

  double operator()(double x) const {
    double v = 0.0;
    for (std::size_t k = c_.size(); k-- > 0;) v = v * x + c_[k];
    return v;
  }

  double deriv(double x) const {
    double v = 0.0;
    for (std::size_t k = c_.size(); k-- > 1;) v = v * x + c_[k] * double(k);
    return v;
  }

  double deriv2(double x) const {
    double v = 0.0;
    for (std::size_t k = c_.size(); k-- > 2;)
      v = v * x + c_[k] * double(k) * double(k - 1);
    return v;
  }

  bool empty() const { return c_.empty(); }
  const std::vector<double>& coeffs() const { return c_; }

 private:
  std::vector<double> c_;
};

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Newton iteration safeguarded by a bracketing bisection fallback.
/// f must be continuous on [lo,hi] with f(lo)*f(hi) <= 0.
inline double newton_bracketed(const std::function<double(double)>& f,
                               const std::function<double(double)>& df,
                               double x0, double lo, double hi,
                               double tol = 1e-14, int max_iter = 100) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw SolveError("newton_bracketed: root not bracketed");
  double x = std::clamp(x0, lo, hi);
  for (int it = 0; it < max_iter; ++it) {
    double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == (fhi > 0.0)) { hi = x; fhi = fx; }
    else { lo = x; flo = fx; }
    double d = df(x);
    double xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    double scale = std::max({std::abs(x), std::abs(xn), 1e-30});
    if (std::abs(xn - x) < tol * scale && std::abs(fx) < 1e3 * tol) return xn;
    x = xn;
    if (hi - lo < tol * std::max(std::abs(lo) + std::abs(hi), 1e-30))
      return 0.5 * (lo + hi);
  }
  return x;
}

/// Plain bisection; residual-monotone problems (shock shooting).
inline double bisect(const std::function<double(double)>& f, double lo,
                     double hi, double xtol, int* iters = nullptr) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0) throw SolveError("bisect: root not bracketed");
  int n = 0;
  while (hi - lo > xtol) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    ++n;
    if (fm == 0.0) { lo = hi = mid; break; }
    if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; }
    else { hi = mid; }
    if (n > 200) break;
  }
  if (iters) *iters = n;
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Quadrature on sampled data
// ---------------------------------------------------------------------------

/// Composite Simpson on a uniform grid (n intervals; n even preferred,
/// trailing interval handled by trapezoid when n is odd).
inline double simpson_uniform(const std::vector<double>& f, double h) {
  const std::size_t n = f.size() - 1;
  if (n == 0) return 0.0;
  double s = 0.0;
  std::size_t m = (n % 2 == 0) ? n : n - 1;
  for (std::size_t i = 0; i + 2 <= m; i += 2)
    s += (h / 3.0) * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
  if (n % 2 != 0) s += 0.5 * h * (f[n - 1] + f[n]);
  return s;
}

/// Cumulative trapezoid: out[i] = integral over [x0, x0 + i h].
inline std::vector<double> cumtrapz_uniform(const std::vector<double>& f,
                                            double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i)
    out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
  return out;
}

/// Cumulative Simpson-type quadrature: out[i] = integral over [x0, x0 + i h].
/// Per-interval integration of the local 3-point parabola; 4th-order global.
inline std::vector<double> cumsimpson_uniform(const std::vector<double>& f,
                                              double h) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  if (n == 2) { out[1] = 0.5 * h * (f[0] + f[1]); return out; }
  // first interval from the parabola through nodes 0,1,2
  out[1] = (h / 12.0) * (5.0 * f[0] + 8.0 * f[1] - f[2]);
  for (std::size_t i = 2; i < n; ++i)
    out[i] = out[i - 1] +
             (h / 12.0) * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Index of the left node for interpolation on a uniform grid.
inline std::size_t uniform_cell(double x, double x0, double h, std::size_t n) {
  double t = (x - x0) / h;
  long i = static_cast<long>(std::floor(t));
  i = std::clamp<long>(i, 0, static_cast<long>(n) - 2);
  return static_cast<std::size_t>(i);
}

/// Linear interpolation on a uniform grid of nodes y[0..n-1] at x0 + i h.
inline double lerp_uniform(const std::vector<double>& y, double x0, double h,
                           double x) {
  std::size_t i = uniform_cell(x, x0, h, y.size());
  double t = (x - (x0 + double(i) * h)) / h;
  return y[i] * (1.0 - t) + y[i + 1] * t;
}

/// Cubic Lagrange interpolation (4-point stencil) on a uniform grid.
/// Exact for cubics; clamps the stencil at the ends.
inline double cubic_uniform(const std::vector<double>& y, double x0, double h,
                            double x) {
  const std::size_t n = y.size();
  if (n < 4) return lerp_uniform(y, x0, h, x);
  double t = (x - x0) / h;
  long i = static_cast<long>(std::floor(t)) - 1;
  i = std::clamp<long>(i, 0, static_cast<long>(n) - 4);
  double s = t - double(i + 1);  // local coordinate relative to node i+1
  const double ym1 = y[i], y0 = y[i + 1], y1 = y[i + 2], y2 = y[i + 3];
  // Lagrange basis on nodes {-1,0,1,2}
  double a = -s * (s - 1.0) * (s - 2.0) / 6.0;
  double b = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  double c = -(s + 1.0) * s * (s - 2.0) / 2.0;
  double d = (s + 1.0) * s * (s - 1.0) / 6.0;
  return a * ym1 + b * y0 + c * y1 + d * y2;
}

/// Inverse of a strictly increasing tabulated map y(x) on a uniform x-grid:
/// returns x with y(x)=target, by bracketing plus local linear correction.
inline double invert_monotone(const std::vector<double>& y, double x0,
                              double h, double target) {
  if (target <= y.front()) return x0;
  if (target >= y.back()) return x0 + h * double(y.size() - 1);
  std::size_t lo = 0, hi = y.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (y[mid] <= target) lo = mid; else hi = mid;
  }
  double t = (target - y[lo]) / (y[hi] - y[lo]);
  return x0 + h * (double(lo) + t);
}

// ---------------------------------------------------------------------------
// Number formatting (deterministic 17-significant-digit CSV output)
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace tsn

#endif  // TSN_UTIL_HPP_
