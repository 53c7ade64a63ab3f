#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "polaritonkit/constants.hpp"

namespace polaritonkit {

// Units of the quasi-BIC loss coefficient alpha. The meV reading is the
// default: it produces a gradual FWHM growth over the first few degrees
// instead of saturating within 0.1 degree.
enum class AlphaUnits { mev_um2, ev_um2 };

inline const char* to_string(AlphaUnits u) {
  return u == AlphaUnits::mev_um2 ? "meV" : "eV";
}

// Closed-form model of the BIC band: energy and radiative loss versus
// emission angle. The band is lossless exactly at normal incidence and
// acquires loss ~ alpha*k^2 at small oblique angles, saturating at
// kappa_inf.
struct BicDispersionParams {
  double e0_ev = 2.107;       // band energy at theta = 0
  double u_ev = 0.3;          // band-coupling constant U
  double v_ev_um = 0.1;       // group-velocity constant v
  double kappa_inf_mev = 20.0;  // loss at high oblique angles
  double alpha = 30.0;          // quasi-BIC loss coefficient, see alpha_units
  AlphaUnits alpha_units = AlphaUnits::mev_um2;
  double lambda_ref_um = constants::hc_ev_um / 2.107;  // wavelength in k(theta)

  void validate() const {
    if (!(e0_ev > 0.0)) throw std::invalid_argument("dispersion: e0_ev must be > 0");
    if (!(u_ev > 0.0)) throw std::invalid_argument("dispersion: u_ev must be > 0");
    if (!(v_ev_um >= 0.0)) throw std::invalid_argument("dispersion: v_ev_um must be >= 0");
    if (!(kappa_inf_mev >= 0.0))
      throw std::invalid_argument("dispersion: kappa_inf_mev must be >= 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("dispersion: alpha must be > 0");
    if (!(lambda_ref_um > 0.0))
      throw std::invalid_argument("dispersion: lambda_ref_um must be > 0");
  }

  // Fitted constants of the reference TiO2 nanopillar device (D ~ 260 nm).
  static BicDispersionParams tio2_metasurface() { return BicDispersionParams{}; }
};

// lambda = hc / E.
inline double energy_to_wavelength(double energy_ev) {
  if (!(energy_ev > 0.0))
    throw std::domain_error("energy_to_wavelength: energy must be > 0 eV");
  return constants::hc_ev_um / energy_ev;
}

// In-plane wavevector k(theta) = (2 pi / lambda) sin(theta), rad/um.
// Sign is carried by the angle; magnitude is what the band model consumes.
inline double wavevector(double theta_deg, double lambda_um) {
  if (!(lambda_um > 0.0))
    throw std::domain_error("wavevector: wavelength must be > 0 um");
  if (!(theta_deg >= -90.0 && theta_deg <= 90.0))
    throw std::domain_error("wavevector: angle must be in [-90, 90] degrees");
  return 2.0 * std::numbers::pi / lambda_um * std::sin(deg_to_rad(theta_deg));
}

namespace detail {

// k^2 at theta with lambda held at the fixed reference wavelength. The band
// moves by <1% over the fitted angle range, so a self-consistent lambda is
// not worth a fixed-point iteration here.
inline double wavevector_sq(const BicDispersionParams& p, double theta_deg) {
  double k = wavevector(theta_deg, p.lambda_ref_um);
  return k * k;
}

inline double alpha_k2_mev(const BicDispersionParams& p, double k2) {
  double a = p.alpha * k2;
  return p.alpha_units == AlphaUnits::mev_um2 ? a : ev_to_mev(a);
}

}  // namespace detail

// E_BIC(theta) = E_BIC(0) + U - sqrt(U^2 + v^2 k(theta)^2), eV.
// Even in theta and non-increasing in |theta|.
inline double bic_energy(const BicDispersionParams& p, double theta_deg) {
  p.validate();
  double k2 = detail::wavevector_sq(p, theta_deg);
  return p.e0_ev + p.u_ev - std::sqrt(p.u_ev * p.u_ev + p.v_ev_um * p.v_ev_um * k2);
}

// kappa_BIC(theta) = (1/kappa_inf + 1/(alpha k^2))^-1, meV.
// Exactly zero at normal incidence; saturates at kappa_inf.
inline double bic_fwhm(const BicDispersionParams& p, double theta_deg) {
  p.validate();
  double k2 = detail::wavevector_sq(p, theta_deg);
  if (k2 == 0.0) return 0.0;
  if (p.kappa_inf_mev == 0.0) return 0.0;
  double ak2 = detail::alpha_k2_mev(p, k2);
  return 1.0 / (1.0 / p.kappa_inf_mev + 1.0 / ak2);
}

}  // namespace polaritonkit
