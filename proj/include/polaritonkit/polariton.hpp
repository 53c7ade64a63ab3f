#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "polaritonkit/constants.hpp"
#include "polaritonkit/dispersion.hpp"
#include "polaritonkit/errors.hpp"

namespace polaritonkit {

using complexd = std::complex<double>;

struct EmitterParams {
  double e_spe_ev = 2.106;    // zero-phonon line energy
  double kappa_spe_mev = 0.5; // ZPL linewidth (FWHM); room-temperature default

  void validate() const {
    if (!(e_spe_ev > 0.0)) throw std::invalid_argument("emitter: e_spe_ev must be > 0");
    if (!(kappa_spe_mev >= 0.0))
      throw std::invalid_argument("emitter: kappa_spe_mev must be >= 0");
  }
};

struct CouplingParams {
  double g_mev = 2.0;  // light-matter coupling strength

  void validate() const {
    if (!(g_mev >= 0.0)) throw std::invalid_argument("coupling: g_mev must be >= 0");
  }
};

// Complex mode energy, sign convention E + i*kappa/2 with kappa >= 0.
struct ComplexEnergy {
  double re_ev = 0.0;
  double im_ev = 0.0;

  double fwhm_mev() const { return ev_to_mev(2.0 * im_ev); }
  complexd value() const { return complexd(re_ev, im_ev); }
};

// 2x2 complex coupled-oscillator Hamiltonian, all entries in eV.
// Diagonal carries the uncoupled complex mode energies, off-diagonal the
// real symmetric coupling g.
struct CoupledHamiltonian {
  complexd h00;  // cavity: E_BIC + i*kappa_BIC/2
  complexd h11;  // emitter: E_SPE + i*kappa_SPE/2
  double g_ev = 0.0;

  complexd trace() const { return h00 + h11; }
  complexd det() const { return h00 * h11 - complexd(g_ev * g_ev, 0.0); }
  // Delta = (E_BIC - E_SPE)/2 + i (kappa_BIC - kappa_SPE)/4.
  complexd detuning() const { return 0.5 * (h00 - h11); }
};

inline CoupledHamiltonian hamiltonian(double e_bic_ev, double kappa_bic_mev,
                                      const EmitterParams& em,
                                      const CouplingParams& c) {
  em.validate();
  c.validate();
  if (!(kappa_bic_mev >= 0.0))
    throw std::domain_error("hamiltonian: kappa_bic_mev must be >= 0");
  CoupledHamiltonian h;
  h.h00 = complexd(e_bic_ev, 0.5 * mev_to_ev(kappa_bic_mev));
  h.h11 = complexd(em.e_spe_ev, 0.5 * mev_to_ev(em.kappa_spe_mev));
  h.g_ev = mev_to_ev(c.g_mev);
  return h;
}

namespace detail {

// UPB first: larger real part, ties by larger imaginary part. The principal
// square root already orders the +/- pair this way, but the rule is applied
// explicitly so the numeric route gets the same labels.
inline std::pair<ComplexEnergy, ComplexEnergy> label_branches(complexd a, complexd b) {
  bool a_upper = a.real() > b.real() ||
                 (a.real() == b.real() && a.imag() >= b.imag());
  complexd up = a_upper ? a : b;
  complexd lo = a_upper ? b : a;
  return {ComplexEnergy{up.real(), up.imag()}, ComplexEnergy{lo.real(), lo.imag()}};
}

}  // namespace detail

// Closed-form eigenvalues: mean + i(kappa_BIC + kappa_SPE)/4 +- sqrt(Delta^2 + g^2)
// with the principal complex square root. Returns (UPB, LPB). The uncoupled
// limit returns the diagonal entries exactly.
inline std::pair<ComplexEnergy, ComplexEnergy> eigenenergies_analytic(
    const CoupledHamiltonian& h) {
  if (h.g_ev == 0.0) return detail::label_branches(h.h00, h.h11);
  complexd mean = 0.5 * (h.h00 + h.h11);
  complexd delta = h.detuning();
  complexd s = std::sqrt(delta * delta + complexd(h.g_ev * h.g_ev, 0.0));
  return detail::label_branches(mean + s, mean - s);
}

// Independent route: roots of the characteristic polynomial
// lambda^2 - tr*lambda + det = 0, solved with the cancellation-safe
// quadratic formula. Used as the oracle for the analytic expression and as
// the normative blueshift definition.
inline std::pair<ComplexEnergy, ComplexEnergy> eigenenergies_numeric(
    const CoupledHamiltonian& h) {
  if (h.g_ev == 0.0) return detail::label_branches(h.h00, h.h11);
  complexd tr = h.trace();
  complexd disc = std::sqrt(tr * tr - 4.0 * h.det());
  // Pick the sign that avoids cancellation in tr + disc.
  if (tr.real() * disc.real() + tr.imag() * disc.imag() < 0.0) disc = -disc;
  complexd l1 = 0.5 * (tr + disc);
  complexd l2 = tr - l1;
  return detail::label_branches(l1, l2);
}

// Hopfield coefficients A+- = +-sqrt(1 + (Delta/g)^2) - Delta/g of the
// (UPB, LPB) eigenvectors |branch> = |BIC> + A|SPE>. Evaluated through the
// rationalized form so that A+ * A- = -1 holds to machine precision even
// for |Delta| >> g.
inline std::pair<complexd, complexd> hopfield(complexd delta_ev, double g_mev) {
  if (!(g_mev > 0.0))
    throw std::domain_error("hopfield: g must be > 0 (uncoupled limit is handled by callers)");
  complexd x = delta_ev / mev_to_ev(g_mev);
  complexd root = std::sqrt(1.0 + x * x);
  // root + x loses digits when x points opposite to root; use whichever of
  // the two equivalent forms is additive.
  if (root.real() * x.real() + root.imag() * x.imag() >= 0.0) {
    complexd big = root + x;           // = -A-
    return {1.0 / big, -big};          // A+ = 1/(sqrt(1+x^2)+x)
  }
  complexd big = root - x;             // = A+
  return {big, -1.0 / big};
}

// Photonic/excitonic weights of one polariton state: W_BIC = (1+|A|^2)^-1.
inline std::pair<double, double> fractions(complexd hopfield_a) {
  if (!std::isfinite(hopfield_a.real()) || !std::isfinite(hopfield_a.imag()))
    throw std::domain_error("fractions: Hopfield coefficient must be finite");
  double w_bic = 1.0 / (1.0 + std::norm(hopfield_a));
  return {w_bic, 1.0 - w_bic};
}

enum class BranchId { upb, lpb };

inline const char* to_string(BranchId b) { return b == BranchId::upb ? "UPB" : "LPB"; }

// One polariton branch sampled at one angle.
struct PolaritonBranch {
  BranchId branch_id = BranchId::upb;
  double theta_deg = 0.0;
  double energy_ev = 0.0;
  double fwhm_mev = 0.0;
  complexd hopfield_a{0.0, 0.0};
  double w_bic = 1.0;
  double w_spe = 0.0;
};

// Both branches over an angle grid, index-aligned with `thetas`.
struct BranchCurves {
  std::vector<double> thetas_deg;
  std::vector<PolaritonBranch> upb;
  std::vector<PolaritonBranch> lpb;
};

// Evaluates the full model over an angle grid: dispersion, Hamiltonian,
// eigenenergies and Hopfield data per angle. E(theta) is the real part,
// gamma(theta) twice the imaginary part. For g = 0 the uncoupled limit is
// stored: weights are exactly {1,0}/{0,1} and the emitter-like branch keeps
// an infinite Hopfield coefficient.
inline BranchCurves branch_curves(const BicDispersionParams& p,
                                  const EmitterParams& em, const CouplingParams& c,
                                  std::span<const double> thetas_deg) {
  p.validate();
  em.validate();
  c.validate();
  if (thetas_deg.empty())
    throw std::invalid_argument("branch_curves: empty angle grid");

  BranchCurves out;
  out.thetas_deg.assign(thetas_deg.begin(), thetas_deg.end());
  out.upb.reserve(thetas_deg.size());
  out.lpb.reserve(thetas_deg.size());

  for (double theta : thetas_deg) {
    double e_bic = bic_energy(p, theta);
    double kappa_bic = bic_fwhm(p, theta);
    CoupledHamiltonian h = hamiltonian(e_bic, kappa_bic, em, c);
    auto [up, lo] = eigenenergies_analytic(h);

    PolaritonBranch upb{BranchId::upb, theta, up.re_ev, up.fwhm_mev(), {}, 0.0, 0.0};
    PolaritonBranch lpb{BranchId::lpb, theta, lo.re_ev, lo.fwhm_mev(), {}, 0.0, 0.0};

    if (c.g_mev > 0.0) {
      auto [a_plus, a_minus] = hopfield(h.detuning(), c.g_mev);
      upb.hopfield_a = a_plus;
      lpb.hopfield_a = a_minus;
      std::tie(upb.w_bic, upb.w_spe) = fractions(a_plus);
      std::tie(lpb.w_bic, lpb.w_spe) = fractions(a_minus);
    } else {
      // Uncoupled: the branch sitting on the cavity energy is pure BIC.
      bool upb_is_bic = up.re_ev == e_bic;
      const double inf = std::numeric_limits<double>::infinity();
      upb.hopfield_a = upb_is_bic ? complexd(0.0, 0.0) : complexd(inf, 0.0);
      lpb.hopfield_a = upb_is_bic ? complexd(inf, 0.0) : complexd(0.0, 0.0);
      upb.w_bic = upb_is_bic ? 1.0 : 0.0;
      upb.w_spe = 1.0 - upb.w_bic;
      lpb.w_bic = 1.0 - upb.w_bic;
      lpb.w_spe = upb.w_bic;
    }
    out.upb.push_back(upb);
    out.lpb.push_back(lpb);
  }
  return out;
}

struct RabiSplitting {
  double theta_deg = 0.0;     // angle of the minimum branch separation
  double splitting_mev = 0.0; // value of the minimum separation
};

// Minimum of E_UPB - E_LPB over theta >= 0, refined by a local quadratic
// through the grid minimum and its neighbours. A gap that is monotone over
// the grid means the grid does not span the anticrossing.
inline RabiSplitting rabi_splitting(const BranchCurves& curves) {
  std::vector<double> theta;
  std::vector<double> gap;
  for (std::size_t i = 0; i < curves.thetas_deg.size(); ++i) {
    if (curves.thetas_deg[i] < 0.0) continue;
    theta.push_back(curves.thetas_deg[i]);
    gap.push_back(ev_to_mev(curves.upb[i].energy_ev - curves.lpb[i].energy_ev));
  }
  if (theta.size() < 3)
    throw diagnostic_error("rabi_splitting: need at least 3 grid points with theta >= 0");

  std::size_t imin = 0;
  for (std::size_t i = 1; i < gap.size(); ++i)
    if (gap[i] < gap[imin]) imin = i;

  if (imin + 1 == gap.size())
    throw diagnostic_error(
        "rabi_splitting: separation is still decreasing at the grid edge; "
        "the grid does not span the anticrossing");
  if (imin == 0) {
    // Interior by even symmetry only when the grid starts at normal
    // incidence, where the gap is stationary.
    if (theta[0] == 0.0) return {0.0, gap[0]};
    throw diagnostic_error(
        "rabi_splitting: separation is minimal at the first grid angle; "
        "extend the grid toward normal incidence");
  }

  double t0 = theta[imin - 1], t1 = theta[imin], t2 = theta[imin + 1];
  double y0 = gap[imin - 1], y1 = gap[imin], y2 = gap[imin + 1];
  double curv = y0 - 2.0 * y1 + y2;
  if (curv <= 0.0) return {t1, y1};  // flat to machine precision
  // Uniform-step vertex; falls back to the grid point for ragged grids.
  double step = 0.5 * (t2 - t0);
  double dt = 0.5 * (y0 - y2) / curv * step;
  double value = y1 - 0.125 * (y0 - y2) * (y0 - y2) / curv;
  return {t1 + dt, value < 0.0 ? 0.0 : value};
}

struct CouplingCheck {
  bool strong = false;
  double margin_mev = 0.0;  // g - |kappa_cav - kappa_spe| / 2
};

// Strong-coupling criterion g >= |kappa_cav - kappa_SPE| / 2; for an ideal
// BIC (kappa_cav = 0) it reduces to g >= kappa_SPE / 2.
inline CouplingCheck strong_coupling_check(double g_mev, double kappa_cav_mev,
                                           double kappa_spe_mev) {
  if (!(g_mev >= 0.0) || !(kappa_cav_mev >= 0.0) || !(kappa_spe_mev >= 0.0))
    throw std::domain_error("strong_coupling_check: rates must be >= 0");
  double margin = g_mev - 0.5 * std::abs(kappa_cav_mev - kappa_spe_mev);
  return {margin >= 0.0, margin};
}

// Oscillator strength per mode volume from the coupling strength:
// f/V = 4 eps_r eps0 m0 g^2 / (hbar^2 pi e^2), reported in um^-3.
inline double oscillator_strength_density(double g_mev, double eps_r) {
  if (!(g_mev >= 0.0))
    throw std::domain_error("oscillator_strength_density: g must be >= 0");
  if (!(eps_r > 0.0))
    throw std::domain_error("oscillator_strength_density: eps_r must be > 0");
  namespace k = constants;
  double g_j = mev_to_ev(g_mev) * k::e_charge_c;
  double per_m3 = 4.0 * eps_r * k::eps0_f_m * k::m0_kg * g_j * g_j /
                  (k::hbar_j_s * k::hbar_j_s * std::numbers::pi * k::e_charge_c *
                   k::e_charge_c);
  return per_m3 * 1e-18;  // m^-3 -> um^-3
}

// Forward direction of the same relation: g(f/V), meV.
inline double coupling_from_oscillator_strength(double f_per_v_um3, double eps_r) {
  if (!(f_per_v_um3 >= 0.0))
    throw std::domain_error("coupling_from_oscillator_strength: f/V must be >= 0");
  if (!(eps_r > 0.0))
    throw std::domain_error("coupling_from_oscillator_strength: eps_r must be > 0");
  namespace k = constants;
  double per_m3 = f_per_v_um3 * 1e18;
  double g_j = k::hbar_j_s *
               std::sqrt(std::numbers::pi * k::e_charge_c * k::e_charge_c * per_m3 /
                         (4.0 * eps_r * k::eps0_f_m * k::m0_kg));
  return ev_to_mev(g_j / k::e_charge_c);
}

struct BranchShifts {
  double upb_mev = 0.0;
  double lpb_mev = 0.0;
};

// First-order polariton blueshifts for a cavity blueshift delta_bic.
// Derivative of the eigenvalues with respect to E_BIC:
//   d(UPB/LPB) = (delta_bic/2) (1 +- Re[Delta / sqrt(Delta^2 + g^2)]),
// which satisfies the sum rule exactly and gives the larger shift to the
// branch with the larger BIC fraction. (The +- assignment, rather than the
// literal -+ ordering of the source expression, is what matches the
// finite-difference result; see blueshift_numeric.)
inline BranchShifts blueshift_analytic(complexd delta_ev, double g_mev,
                                       double delta_bic_mev) {
  if (!(g_mev > 0.0)) throw std::domain_error("blueshift_analytic: g must be > 0");
  double g_ev = mev_to_ev(g_mev);
  complexd s = delta_ev / std::sqrt(delta_ev * delta_ev + complexd(g_ev * g_ev, 0.0));
  double half = 0.5 * delta_bic_mev;
  return {half * (1.0 + s.real()), half * (1.0 - s.real())};
}

// Finite-shift reference: re-solve the eigenproblem with E_BIC shifted by
// delta_bic and difference the real parts. Exact for finite shifts; the
// analytic formula is its delta_bic -> 0 limit.
inline BranchShifts blueshift_numeric(const CoupledHamiltonian& h,
                                      double delta_bic_mev) {
  CoupledHamiltonian shifted = h;
  shifted.h00 += complexd(mev_to_ev(delta_bic_mev), 0.0);
  auto [up0, lo0] = eigenenergies_numeric(h);
  auto [up1, lo1] = eigenenergies_numeric(shifted);
  return {ev_to_mev(up1.re_ev - up0.re_ev), ev_to_mev(lo1.re_ev - lo0.re_ev)};
}

}  // namespace polaritonkit
