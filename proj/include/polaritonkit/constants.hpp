#pragma once

#include <numbers>

namespace polaritonkit {

// CODATA 2018 values, fixed at build time. SI units unless noted.
namespace constants {

inline constexpr double hbar_j_s = 1.054571817e-34;     // reduced Planck constant
inline constexpr double e_charge_c = 1.602176634e-19;   // elementary charge
inline constexpr double m0_kg = 9.1093837015e-31;       // free electron mass
inline constexpr double eps0_f_m = 8.8541878128e-12;    // vacuum permittivity
inline constexpr double hc_ev_um = 1.23984193;          // photon energy-wavelength product

}  // namespace constants

// Energies are stored in eV, linewidths in meV, angles in degrees.
// Conversions are explicit at module boundaries; these helpers are the
// only sanctioned way to cross between the unit systems.
inline constexpr double mev_to_ev(double mev) { return mev * 1e-3; }
inline constexpr double ev_to_mev(double ev) { return ev * 1e3; }
inline constexpr double deg_to_rad(double deg) {
  return deg * std::numbers::pi / 180.0;
}

}  // namespace polaritonkit
