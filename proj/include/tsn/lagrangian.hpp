#ifndef TSN_LAGRANGIAN_HPP_
#define TSN_LAGRANGIAN_HPP_

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "tsn/background.hpp"
#include "tsn/gas.hpp"
#include "tsn/util.hpp"

namespace tsn {

// ---------------------------------------------------------------------------
// C^2 extension operator
// ---------------------------------------------------------------------------

/// Coefficients (c1,c2,c3) of the three-term reflection extension, from the
/// exact 3x3 rational system
///   sum c_k = 1,  -sum c_k/k = 1,  sum c_k/k^2 = 1,
/// which matches value, first, and second derivative across the seam.
/// Solved by integer Cramer's rule after clearing denominators.
inline std::array<double, 3> extension_coefficients() {
  // rows scaled by 1, -6, 36 to make all entries integers
  const long long A[3][3] = {{1, 1, 1}, {6, 3, 2}, {36, 9, 4}};
  const long long b[3] = {1, -6, 36};
  auto det3 = [](const long long M[3][3]) {
    return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
           M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
           M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
  };
  long long d = det3(A);
  std::array<double, 3> c{};
  for (int j = 0; j < 3; ++j) {
    long long M[3][3];
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) M[r][s] = (s == j) ? b[r] : A[r][s];
    long long num = det3(M);
    if (num % d != 0)
      throw SolveError("extension_coefficients: non-integer solution");
    c[j] = double(num / d);
  }
  return c;
}

/// A field on [0,N] (uniform vertex samples) extended to [-N, 2N] by the
/// three-term reflection rule; C^2 across z=0 and z=N. Interior evaluation
/// uses cubic interpolation (exact on polynomial data up to degree 3).
class ExtendedField {
 public:
  ExtendedField() = default;
  ExtendedField(std::vector<double> samples, double N)
      : w_(std::move(samples)), N_(N) {
    if (w_.size() < 4) throw DomainError("ExtendedField: need >= 4 samples");
    h_ = N_ / double(w_.size() - 1);
  }

  double operator()(double z) const {
    if (z >= 0.0 && z <= N_) return base(z);
    const std::array<double, 3> c = extension_coefficients();
    double v = 0.0;
    if (z < 0.0) {
      for (int k = 1; k <= 3; ++k)
        v += c[k - 1] * base(base_clamped(-z / double(k)));
    } else {
      for (int k = 1; k <= 3; ++k)
        v += c[k - 1] * base(base_clamped(N_ - (z - N_) / double(k)));
    }
    return v;
  }

  double lo() const { return -N_; }
  double hi() const { return 2.0 * N_; }
  double N() const { return N_; }
  const std::vector<double>& samples() const { return w_; }

 private:
  double base(double z) const { return cubic_uniform(w_, 0.0, h_, z); }
  // reflected arguments can land a roundoff hair outside [0,N]
  double base_clamped(double z) const { return std::clamp(z, 0.0, N_); }

  std::vector<double> w_;
  double N_ = 1.0, h_ = 1.0;
};

// ---------------------------------------------------------------------------
// Fixed computational domain E+ = (0,N) x (0,M)
// ---------------------------------------------------------------------------

/// Uniform grid on E+: vertex-centered in z1 (n1+1 nodes), cell-centered in
/// z2 (n2 cells, no node on the axis z2=0).
struct FixedDomain {
  double N = 1.0;  // r2 - r_b
  double M = 1.0;  // total-flux constant
  int n1 = 64;
  int n2 = 64;

  double h1() const { return N / double(n1); }
  double hs() const { return M / double(n2); }
  double z1(int i) const { return double(i) * h1(); }
  double s(int j) const { return (double(j) + 0.5) * hs(); }

  void validate() const {
    if (!(N > 0.0 && M > 0.0)) throw DomainError("FixedDomain: N, M must be > 0");
    if (n1 < 4 || n2 < 4) throw DomainError("FixedDomain: grid too coarse");
  }
};

// ---------------------------------------------------------------------------
// Streamline chart y2 = sqrt(streamfunction)
// ---------------------------------------------------------------------------

/// Total-flux constant: M = sqrt(r1^2 int_0^theta0 rhoU1 sin(t) dt) from an
/// inlet slice sampled uniformly in theta (including both endpoints).
inline double total_flux(const std::vector<double>& rhoU1, double theta0,
                         double r1) {
  if (rhoU1.size() < 3) throw DomainError("total_flux: need >= 3 samples");
  for (double v : rhoU1)
    if (!(v > 0.0)) throw DomainError("total_flux: rho U1 must be > 0");
  double h = theta0 / double(rhoU1.size() - 1);
  std::vector<double> g(rhoU1.size());
  for (std::size_t j = 0; j < rhoU1.size(); ++j)
    g[j] = rhoU1[j] * std::sin(double(j) * h);
  return std::sqrt(r1 * r1 * simpson_uniform(g, h));
}

/// Streamline-straightening chart built from a mass-flux sampler
/// rhoU1(r,theta) on r in [ra,rb], theta in [0, theta_w(r)].
/// Tables: streamfunction ytilde2(r_i, t_j theta_w(r_i)) and the inverse
/// theta(y1, y2) on a uniform (y1, y2) grid.
class LagrangianChart {
 public:
  LagrangianChart(const std::function<double(double, double)>& rhoU1,
                  const std::function<double(double)>& theta_w, double ra,
                  double rb, int nr, int ntheta) {
    ra_ = ra;
    rb_ = rb;
    nr_ = nr;
    nth_ = ntheta;
    hr_ = (rb - ra) / double(nr);
    yt_.assign(nr + 1, std::vector<double>(ntheta + 1, 0.0));
    thw_.resize(nr + 1);
    double jac_min = 1e300;
    for (int i = 0; i <= nr; ++i) {
      double r = ra + double(i) * hr_;
      double tw = theta_w(r);
      thw_[i] = tw;
      double ht = tw / double(ntheta);
      std::vector<double> g(ntheta + 1);
      for (int j = 0; j <= ntheta; ++j) {
        double th = double(j) * ht;
        double q = rhoU1(r, th);
        if (!(q > 0.0))
          throw DomainError("LagrangianChart: rho U1 <= 0 in chart region");
        g[j] = r * r * q * std::sin(th);
      }
      auto cum = cumsimpson_uniform(g, ht);
      for (int j = 0; j <= ntheta; ++j) yt_[i][j] = std::max(cum[j], 0.0);
      for (int j = 1; j <= ntheta; ++j) {
        double y2 = std::sqrt(yt_[i][j]);
        jac_min = std::min(jac_min, g[j] / (2.0 * y2));
      }
    }
    jac_min_ = jac_min;
    if (!(jac_min_ > 1e-12))
      throw SolveError("LagrangianChart: degenerate chart (Jacobian ~ 0)");
    M_ = std::sqrt(yt_[0][nth_]);
  }

  /// Forward map: y2(r, theta).
  double y2(double r, double theta) const {
    int i = int(uniform_cell(r, ra_, hr_, std::size_t(nr_) + 1));
    // interpolate the streamfunction in r at fixed theta
    double t = (r - (ra_ + double(i) * hr_)) / hr_;
    double a = yt_at(i, theta);
    double b = yt_at(i + 1, theta);
    double v = a * (1.0 - t) + b * t;
    return std::sqrt(std::max(v, 0.0));
  }

  /// Inverse map: theta(y1, y2) by monotone inversion of the streamfunction.
  double theta(double y1, double y2v) const {
    int i = int(uniform_cell(y1, ra_, hr_, std::size_t(nr_) + 1));
    double t = (y1 - (ra_ + double(i) * hr_)) / hr_;
    double target = y2v * y2v;
    double tha = invert_row(i, target);
    double thb = invert_row(i + 1, target);
    return tha * (1.0 - t) + thb * t;
  }

  double M() const { return M_; }
  double jacobian_min() const { return jac_min_; }
  double wall_y2(int i) const { return std::sqrt(yt_[i][nth_]); }
  int nr() const { return nr_; }

 private:
  double yt_at(int i, double theta) const {
    double ht = thw_[i] / double(nth_);
    return cubic_uniform(yt_[i], 0.0, ht, std::clamp(theta, 0.0, thw_[i]));
  }
  double invert_row(int i, double target) const {
    double ht = thw_[i] / double(nth_);
    double th0 = invert_monotone(yt_[i], 0.0, ht, target);
    // one Newton polish using the exact derivative of the cubic interpolant
    // via a centered difference of the interpolated streamfunction
    double d = 1e-6 * thw_[i];
    double lo = std::max(th0 - d, 0.0), hi = std::min(th0 + d, thw_[i]);
    double slope = (yt_at(i, hi) - yt_at(i, lo)) / (hi - lo);
    if (slope > 0.0) {
      double th1 = th0 - (yt_at(i, th0) - target) / slope;
      if (th1 >= 0.0 && th1 <= thw_[i]) return th1;
    }
    return th0;
  }

  double ra_ = 0.0, rb_ = 1.0, hr_ = 1.0, M_ = 0.0, jac_min_ = 0.0;
  int nr_ = 0, nth_ = 0;
  std::vector<std::vector<double>> yt_;  // streamfunction ytilde2
  std::vector<double> thw_;              // wall angle per radius
};

/// Angle recovery from the mass flux expressed in chart variables:
/// theta = arccos(1 - int_0^{y2} 2 s / (y1^2 rhoU1(y1,s)) ds).
inline double theta_from_chart(double y1, double y2,
                               const std::function<double(double)>& rhoU1_lag,
                               int n = 64) {
  if (n % 2 != 0) ++n;
  double h = y2 / double(n);
  std::vector<double> g(n + 1);
  for (int j = 0; j <= n; ++j) {
    double s = double(j) * h;
    double q = rhoU1_lag(s);
    if (!(q > 0.0)) throw DomainError("theta_from_chart: rho U1 must be > 0");
    g[j] = 2.0 * s / (y1 * y1 * q);
  }
  double arg = 1.0 - simpson_uniform(g, h);
  if (arg < -1.0 || arg > 1.0)
    throw DomainError("theta_from_chart: arccos argument outside [-1,1]");
  return std::acos(arg);
}

}  // namespace tsn

#endif  // TSN_LAGRANGIAN_HPP_
