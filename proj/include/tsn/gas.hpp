#ifndef TSN_GAS_HPP_
#define TSN_GAS_HPP_

#include <cmath>

#include "tsn/util.hpp"

namespace tsn {

/// Polytropic-gas constants for P = A rho^gamma exp(S/c_v).
struct GasConstants {
  double gamma = 1.4;  // ratio of specific heats, > 1
  double A = 1.0;      // entropy-scale constant, > 0
  double c_v = 1.0;    // specific heat at constant volume, > 0

  void validate() const {
    if (!(gamma > 1.0)) throw DomainError("gas: gamma must be > 1");
    if (!(A > 0.0)) throw DomainError("gas: A must be > 0");
    if (!(c_v > 0.0)) throw DomainError("gas: c_v must be > 0");
  }
};

/// Density from pressure and entropy: rho = (P exp(-S/c_v)/A)^(1/gamma).
inline double density_from_PS(double P, double S, const GasConstants& g) {
  if (!(P > 0.0)) throw DomainError("density_from_PS: pressure must be > 0");
  return std::pow(P * std::exp(-S / g.c_v) / g.A, 1.0 / g.gamma);
}

/// Pressure from density and entropy (exact inverse of density_from_PS).
inline double pressure_from_rhoS(double rho, double S, const GasConstants& g) {
  if (!(rho > 0.0)) throw DomainError("pressure_from_rhoS: density must be > 0");
  return g.A * std::pow(rho, g.gamma) * std::exp(S / g.c_v);
}

/// Entropy from pressure and density: S = c_v ln(P/(A rho^gamma)).
inline double entropy_from_Prho(double P, double rho, const GasConstants& g) {
  if (!(P > 0.0 && rho > 0.0))
    throw DomainError("entropy_from_Prho: P, rho must be > 0");
  return g.c_v * std::log(P / (g.A * std::pow(rho, g.gamma)));
}

/// One gas state in spherical components (radial, polar, azimuthal/swirl).
struct FlowState {
  double U1 = 0.0;  // radial velocity
  double U2 = 0.0;  // polar velocity
  double U3 = 0.0;  // swirl velocity
  double P = 1.0;   // pressure, > 0
  double S = 0.0;   // specific entropy

  double speed2() const { return U1 * U1 + U2 * U2 + U3 * U3; }
};

inline double density(const FlowState& st, const GasConstants& g) {
  return density_from_PS(st.P, st.S, g);
}

/// Local sound speed c = sqrt(gamma P / rho).
inline double sound_speed(const FlowState& st, const GasConstants& g) {
  return std::sqrt(g.gamma * st.P / density(st, g));
}

/// Specific enthalpy h = gamma/(gamma-1) * P/rho.
inline double enthalpy(double P, double S, const GasConstants& g) {
  return g.gamma / (g.gamma - 1.0) * P / density_from_PS(P, S, g);
}

/// Bernoulli function B = |u|^2/2 + h.
inline double bernoulli(const FlowState& st, const GasConstants& g) {
  return 0.5 * st.speed2() + enthalpy(st.P, st.S, g);
}

inline double mach(const FlowState& st, const GasConstants& g) {
  return std::sqrt(st.speed2()) / sound_speed(st, g);
}

/// Density as a function of speed magnitude at fixed (B, S):
/// h = B - q^2/2 with h = gamma/(gamma-1) A rho^(gamma-1) exp(S/c_v).
inline double density_from_BSspeed(double B, double S, double speed,
                                   const GasConstants& g) {
  double h = B - 0.5 * speed * speed;
  if (!(h > 0.0))
    throw DomainError("density_from_BSspeed: speed exceeds stagnation limit");
  double base = (g.gamma - 1.0) * h / (g.gamma * g.A * std::exp(S / g.c_v));
  return std::pow(base, 1.0 / (g.gamma - 1.0));
}

/// Critical (sonic) speed at fixed Bernoulli constant:
/// c*^2 = 2(gamma-1) B / (gamma+1).
inline double critical_speed(double B, const GasConstants& g) {
  if (!(B > 0.0)) throw DomainError("critical_speed: B must be > 0");
  return std::sqrt(2.0 * (g.gamma - 1.0) * B / (g.gamma + 1.0));
}

}  // namespace tsn

#endif  // TSN_GAS_HPP_
