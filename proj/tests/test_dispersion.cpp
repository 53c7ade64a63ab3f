#include <catch2/catch_amalgamated.hpp>

#include "polaritonkit/dispersion.hpp"
#include "polaritonkit/rng.hpp"

using namespace polaritonkit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("energy_to_wavelength", "[dispersion]") {
  CHECK(energy_to_wavelength(1.23984193) == 1.0);
  CHECK_THAT(energy_to_wavelength(2.107), WithinAbs(0.5884394542002848, 1e-15));
  CHECK_THROWS_AS(energy_to_wavelength(0.0), std::domain_error);
  CHECK_THROWS_AS(energy_to_wavelength(-1.0), std::domain_error);
}

TEST_CASE("wavevector", "[dispersion]") {
  CHECK(wavevector(0.0, 0.58844) == 0.0);
  CHECK_THAT(wavevector(90.0, 0.58844), WithinAbs(10.677699182889652, 1e-12));
  CHECK_THAT(wavevector(5.0, 0.58844), WithinAbs(0.9306228031208104, 1e-12));
  CHECK_THROWS_AS(wavevector(5.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(wavevector(91.0, 0.58844), std::domain_error);
}

TEST_CASE("bic_energy", "[dispersion]") {
  BicDispersionParams p = BicDispersionParams::tio2_metasurface();
  CHECK(bic_energy(p, 0.0) == 2.107);
  CHECK_THAT(bic_energy(p, 5.0), WithinAbs(2.092897144102551, 1e-12));

  BicDispersionParams flat = p;
  flat.v_ev_um = 0.0;
  for (double theta : {0.0, 3.0, 10.0, 45.0}) CHECK(bic_energy(flat, theta) == flat.e0_ev);

  BicDispersionParams bad = p;
  bad.u_ev = -1.0;
  CHECK_THROWS_AS(bic_energy(bad, 0.0), std::invalid_argument);
}

TEST_CASE("bic_fwhm", "[dispersion]") {
  BicDispersionParams p = BicDispersionParams::tio2_metasurface();
  CHECK(bic_fwhm(p, 0.0) == 0.0);
  CHECK_THAT(bic_fwhm(p, 1.0), WithinAbs(0.9902275021320074, 1e-12));

  // High angle: alpha k^2 >> kappa_inf, loss saturates just below 20 meV.
  double high = bic_fwhm(p, 89.0);
  CHECK(high > 19.8);
  CHECK(high < 20.0);

  // Literal eV reading of alpha saturates almost immediately.
  BicDispersionParams ev = p;
  ev.alpha_units = AlphaUnits::ev_um2;
  CHECK(bic_fwhm(ev, 1.0) > 19.0);

  // Lossless cavity limit.
  BicDispersionParams lossless = p;
  lossless.kappa_inf_mev = 0.0;
  CHECK(bic_fwhm(lossless, 3.0) == 0.0);
}

TEST_CASE("band and loss are even, monotone and bounded", "[dispersion]") {
  BicDispersionParams p = BicDispersionParams::tio2_metasurface();
  RandomStream rng(31);
  for (int i = 0; i < 500; ++i) {
    double theta = rng.uniform(0.0, 90.0);
    CHECK(bic_energy(p, theta) == bic_energy(p, -theta));
    CHECK(bic_fwhm(p, theta) == bic_fwhm(p, -theta));
  }
  double prev_e = bic_energy(p, 0.0);
  double prev_k = bic_fwhm(p, 0.0);
  for (double theta = 0.25; theta <= 90.0; theta += 0.25) {
    double e = bic_energy(p, theta);
    double k = bic_fwhm(p, theta);
    CHECK(e <= prev_e);
    CHECK(k >= prev_k);
    CHECK(k >= 0.0);
    CHECK(k < p.kappa_inf_mev);  // strict harmonic-mean bound
    prev_e = e;
    prev_k = k;
  }
}

TEST_CASE("loss tends to kappa_inf as alpha grows", "[dispersion]") {
  BicDispersionParams p = BicDispersionParams::tio2_metasurface();
  p.alpha = 1e15;
  for (double theta : {0.5, 2.0, 20.0})
    CHECK_THAT(bic_fwhm(p, theta), WithinAbs(p.kappa_inf_mev, 1e-6));
}
