#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "polaritonkit/errors.hpp"
#include "polaritonkit/polariton.hpp"
#include "polaritonkit/spectra.hpp"

namespace polaritonkit {

struct FitOptions {
  int max_iter = 200;
  double step_tol = 1e-10;      // relative step size
  double residual_tol = 1e-12;  // on the residual norm
};

struct FitProblem {
  std::function<std::vector<double>(std::span<const double>)> residual;
  std::vector<double> initial;
  std::vector<double> lower;  // may be -inf
  std::vector<double> upper;  // may be +inf
  FitOptions options;
};

struct FitResult {
  std::vector<double> params;
  std::vector<double> std_errors;  // from the residual Jacobian at the solution
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostics;
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double sum_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Gaussian elimination with partial pivoting; A is n x n row-major and is
// destroyed. Returns false when a pivot collapses.
inline bool solve_linear(std::vector<double>& a, std::vector<double>& b,
                         std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
      std::swap(b[col], b[pivot]);
    }
    double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    double s = b[col];
    for (std::size_t k = col + 1; k < n; ++k) s -= a[col * n + k] * b[k];
    b[col] = s / a[col * n + col];
  }
  return true;
}

inline std::vector<double> clamp_to_bounds(std::span<const double> x,
                                           std::span<const double> lo,
                                           std::span<const double> hi) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(out[i], lo[i], hi[i]);
  return out;
}

inline double median_abs(std::span<const double> v) {
  if (v.empty()) return 1.0;
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
  std::nth_element(a.begin(), mid, a.end());
  double m = *mid;
  return m > 0.0 ? m : 1.0;
}

}  // namespace detail

// Damped least squares (Levenberg-Marquardt): numeric forward-difference
// Jacobian (relative step 1e-6), Marquardt diagonal scaling, and steps
// projected onto the bound box. Starts undamped, so linear problems finish
// in one Gauss-Newton step.
inline FitResult nlls_solve(const FitProblem& problem) {
  const std::size_t n = problem.initial.size();
  if (n == 0) throw std::invalid_argument("nlls_solve: empty parameter vector");
  if (problem.lower.size() != n || problem.upper.size() != n)
    throw std::invalid_argument("nlls_solve: bounds must match parameter count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(problem.lower[i] <= problem.upper[i]))
      throw std::invalid_argument("nlls_solve: bounds must be ordered");
    if (problem.initial[i] < problem.lower[i] || problem.initial[i] > problem.upper[i])
      throw std::invalid_argument("nlls_solve: initial parameters must lie within bounds");
  }

  std::vector<double> x = problem.initial;
  std::vector<double> r = problem.residual(x);
  const std::size_t m = r.size();
  if (m == 0) throw std::invalid_argument("nlls_solve: empty residual vector");
  if (!detail::all_finite(r))
    throw diagnostic_error("nlls_solve: non-finite residual at the initial parameters");

  double ssq = detail::sum_sq(r);
  FitResult result;
  result.params = x;

  // Forward differences with the step reflected at an active upper bound.
  std::vector<double> jac(m * n);  // row-major m x n
  auto fill_jacobian = [&](const std::vector<double>& at,
                           const std::vector<double>& r_at) {
    std::vector<double> xh = at;
    for (std::size_t j = 0; j < n; ++j) {
      double h = 1e-6 * std::max(std::abs(at[j]), 1.0);
      if (at[j] + h > problem.upper[j]) h = -h;
      if (at[j] + h < problem.lower[j]) {  // box narrower than the step
        for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = 0.0;
        continue;
      }
      xh[j] = at[j] + h;
      std::vector<double> rh = problem.residual(xh);
      if (rh.size() != m || !detail::all_finite(rh))
        throw diagnostic_error("nlls_solve: non-finite residual while differencing");
      double inv = 1.0 / (xh[j] - at[j]);
      for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = (rh[i] - r_at[i]) * inv;
      xh[j] = at[j];
    }
  };

  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string note;

  std::vector<double> jtj(n * n), jtr(n), mtx(n * n), rhs(n);
  for (int iter = 1; iter <= problem.options.max_iter; ++iter) {
    fill_jacobian(x, r);
    for (std::size_t a = 0; a < n; ++a) {
      jtr[a] = 0.0;
      for (std::size_t i = 0; i < m; ++i) jtr[a] += jac[i * n + a] * r[i];
      for (std::size_t b = a; b < n; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += jac[i * n + a] * jac[i * n + b];
        jtj[a * n + b] = s;
        jtj[b * n + a] = s;
      }
    }
    double grad_inf = 0.0;
    for (double gv : jtr) grad_inf = std::max(grad_inf, std::abs(gv));
    if (grad_inf <= 1e-14 * std::max(1.0, ssq)) {
      converged = true;
      break;
    }

    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      mtx = jtj;
      for (std::size_t a = 0; a < n; ++a)
        mtx[a * n + a] += lambda * std::max(jtj[a * n + a], 1e-12);
      for (std::size_t a = 0; a < n; ++a) rhs[a] = -jtr[a];
      if (!detail::solve_linear(mtx, rhs, n)) {
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
        continue;
      }
      std::vector<double> trial(n);
      for (std::size_t a = 0; a < n; ++a) trial[a] = x[a] + rhs[a];
      trial = detail::clamp_to_bounds(trial, problem.lower, problem.upper);
      double step_rel = 0.0;
      for (std::size_t a = 0; a < n; ++a)
        step_rel = std::max(step_rel,
                            std::abs(trial[a] - x[a]) / (std::abs(x[a]) + problem.options.step_tol));
      if (step_rel == 0.0) {
        converged = true;  // pinned at bounds or a zero step: nothing to do
        accepted = true;
        break;
      }
      std::vector<double> r_trial = problem.residual(trial);
      if (r_trial.size() != m || !detail::all_finite(r_trial)) {
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
        continue;
      }
      double ssq_trial = detail::sum_sq(r_trial);
      if (ssq_trial < ssq) {
        x = std::move(trial);
        r = std::move(r_trial);
        ssq = ssq_trial;
        lambda = lambda < 1e-12 ? 0.0 : lambda / 3.0;
        iterations = iter;
        accepted = true;
        if (step_rel <= problem.options.step_tol ||
            std::sqrt(ssq) <= problem.options.residual_tol)
          converged = true;
      } else {
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
      }
    }
    if (!accepted) {
      // The damping ladder shrank the step to nothing without finding a
      // decrease: a numerical minimum.
      converged = true;
      note = "stalled at a numerical minimum";
      break;
    }
    if (converged) break;
  }
  if (!converged && note.empty() && iterations >= problem.options.max_iter)
    note = "iteration cap reached";

  result.params = x;
  result.residual_norm = std::sqrt(ssq);
  result.iterations = iterations;
  result.converged = converged;
  result.diagnostics = note;

  // Standard errors: s^2 (J^T J)^-1 at the solution.
  result.std_errors.assign(n, std::numeric_limits<double>::quiet_NaN());
  fill_jacobian(x, r);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += jac[i * n + a] * jac[i * n + b];
      jtj[a * n + b] = s;
      jtj[b * n + a] = s;
    }
  double s2 = m > n ? ssq / static_cast<double>(m - n) : 0.0;
  bool cov_ok = true;
  for (std::size_t col = 0; col < n && cov_ok; ++col) {
    mtx = jtj;
    std::vector<double> e(n, 0.0);
    e[col] = 1.0;
    if (!detail::solve_linear(mtx, e, n)) {
      cov_ok = false;
      break;
    }
    result.std_errors[col] = std::sqrt(std::max(0.0, s2 * e[col]));
  }
  if (!cov_ok) {
    result.std_errors.assign(n, std::numeric_limits<double>::quiet_NaN());
    if (!result.diagnostics.empty()) result.diagnostics += "; ";
    result.diagnostics += "singular normal equations; std errors unavailable";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Lorentzian peak fitting
// ---------------------------------------------------------------------------

struct LorentzianFit {
  std::vector<LorentzianPeak> peaks;  // sorted by center
  FitResult fit;
};

namespace detail {

inline std::vector<double> smooth3(std::span<const double> y) {
  std::vector<double> out(y.begin(), y.end());
  if (y.size() < 3) return out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    out[i] = (y[i - 1] + y[i] + y[i + 1]) / 3.0;
  return out;
}

// Indices of local maxima, tallest first, kept at least `min_sep` samples
// apart.
inline std::vector<std::size_t> pick_maxima(std::span<const double> y,
                                            std::size_t min_sep) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] >= y[i - 1] && y[i] >= y[i + 1] && (y[i] > y[i - 1] || y[i] > y[i + 1]))
      candidates.push_back(i);
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  std::vector<std::size_t> picked;
  for (std::size_t c : candidates) {
    bool clash = false;
    for (std::size_t p : picked)
      if ((c > p ? c - p : p - c) < min_sep) clash = true;
    if (!clash) picked.push_back(c);
  }
  return picked;
}

}  // namespace detail

// Single or double Lorentzian fit. Without an explicit init, peaks are
// seeded from local maxima of a lightly smoothed spectrum with a minimum
// separation of two grid steps. Centers are fitted as meV offsets from the
// window midpoint to keep the normal equations well scaled.
inline LorentzianFit fit_lorentzian(std::span<const double> energies_ev,
                                    std::span<const double> intensities,
                                    int n_peaks,
                                    const std::optional<std::vector<LorentzianPeak>>& init =
                                        std::nullopt,
                                    const FitOptions& options = {}) {
  if (n_peaks != 1 && n_peaks != 2)
    throw std::invalid_argument("fit_lorentzian: n_peaks must be 1 or 2");
  const std::size_t np = static_cast<std::size_t>(n_peaks);
  const std::size_t m = energies_ev.size();
  if (intensities.size() != m)
    throw std::invalid_argument("fit_lorentzian: energy/intensity size mismatch");
  if (m < 5 * np)
    throw std::invalid_argument("fit_lorentzian: need at least 5 samples per peak");

  const double e_lo = energies_ev.front();
  const double e_hi = energies_ev.back();
  const double e_ref = 0.5 * (e_lo + e_hi);
  const double step_mev = ev_to_mev((e_hi - e_lo) / static_cast<double>(m - 1));
  const double window_mev = ev_to_mev(e_hi - e_lo);
  double y_min = *std::min_element(intensities.begin(), intensities.end());
  double y_max = *std::max_element(intensities.begin(), intensities.end());

  // Parameters: [offset, (dc_mev, fwhm_mev, amplitude) x n_peaks].
  std::vector<double> x0, lo, hi;
  x0.reserve(1 + 3 * np);
  auto push_param = [&](double v, double l, double h) {
    x0.push_back(std::clamp(v, l, h));
    lo.push_back(l);
    hi.push_back(h);
  };
  double amp_cap = 10.0 * std::max(y_max - y_min, 1e-12);
  push_param(init ? 0.0 : y_min, 0.0, std::max(y_max, 1e-12));

  if (init) {
    if (init->size() != np)
      throw std::invalid_argument("fit_lorentzian: init size must equal n_peaks");
    x0[0] = std::clamp((*init)[0].offset, lo[0], hi[0]);
    for (const LorentzianPeak& p : *init) {
      push_param(ev_to_mev(p.center_ev - e_ref), ev_to_mev(e_lo - e_ref),
                 ev_to_mev(e_hi - e_ref));
      push_param(p.fwhm_mev, 0.01 * step_mev, 10.0 * window_mev);
      push_param(p.amplitude, 0.0, amp_cap);
    }
  } else {
    std::vector<double> ysm = detail::smooth3(detail::smooth3(intensities));
    double base = *std::min_element(ysm.begin(), ysm.end());
    std::vector<std::size_t> peaks_idx = detail::pick_maxima(ysm, 2);
    if (peaks_idx.size() < np) {
      std::ostringstream msg;
      msg << "fit_lorentzian: found " << peaks_idx.size() << " local maxima but "
          << np << " peaks were requested; pass an explicit initialization";
      throw diagnostic_error(msg.str());
    }
    peaks_idx.resize(np);
    for (std::size_t idx : peaks_idx) {
      double amp0 = std::max(intensities[idx] - base, 1e-9);
      double half = base + 0.5 * (ysm[idx] - base);
      std::size_t l = idx, rgt = idx;
      while (l > 0 && ysm[l] > half) --l;
      while (rgt + 1 < m && ysm[rgt] > half) ++rgt;
      double fwhm0 = std::max(ev_to_mev(energies_ev[rgt] - energies_ev[l]), 1.5 * step_mev);
      push_param(ev_to_mev(energies_ev[idx] - e_ref), ev_to_mev(e_lo - e_ref),
                 ev_to_mev(e_hi - e_ref));
      push_param(std::min(fwhm0, 0.5 * window_mev), 0.01 * step_mev, 10.0 * window_mev);
      push_param(amp0, 0.0, amp_cap);
    }
  }

  FitProblem problem;
  problem.options = options;
  problem.initial = x0;
  problem.lower = lo;
  problem.upper = hi;
  problem.residual = [energies_ev, intensities, e_ref, np](std::span<const double> p) {
    std::vector<double> r(energies_ev.size());
    for (std::size_t i = 0; i < energies_ev.size(); ++i) {
      double model = p[0];
      for (std::size_t k = 0; k < np; ++k) {
        double c = e_ref + mev_to_ev(p[1 + 3 * k]);
        double hw = 0.5 * mev_to_ev(p[2 + 3 * k]);
        double u = (energies_ev[i] - c) / hw;
        model += p[3 + 3 * k] / (1.0 + u * u);
      }
      r[i] = model - intensities[i];
    }
    return r;
  };

  FitResult fit = nlls_solve(problem);

  LorentzianFit out;
  out.fit = fit;
  for (std::size_t k = 0; k < np; ++k) {
    LorentzianPeak p;
    p.center_ev = e_ref + mev_to_ev(fit.params[1 + 3 * k]);
    p.fwhm_mev = fit.params[2 + 3 * k];
    p.amplitude = fit.params[3 + 3 * k];
    p.offset = fit.params[0];
    out.peaks.push_back(p);
  }
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const LorentzianPeak& a, const LorentzianPeak& b) {
              return a.center_ev < b.center_ev;
            });
  if (np == 2) {
    double sep_mev = ev_to_mev(out.peaks[1].center_ev - out.peaks[0].center_ev);
    if (sep_mev < 0.5 * step_mev) {
      out.fit.converged = false;
      if (!out.fit.diagnostics.empty()) out.fit.diagnostics += "; ";
      out.fit.diagnostics += "degenerate fit: peak centers coincide";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Branch extraction from a map
// ---------------------------------------------------------------------------

// Per-angle samples of one polariton branch pulled out of a map.
struct BranchTrace {
  std::vector<double> theta_deg;  // strictly increasing
  std::vector<double> energy_ev;
  std::vector<double> fwhm_mev;
  std::vector<double> amplitude;

  std::size_t size() const { return theta_deg.size(); }
  void push(double th, double e, double g, double a) {
    theta_deg.push_back(th);
    energy_ev.push_back(e);
    fwhm_mev.push_back(g);
    amplitude.push_back(a);
  }
  void validate() const {
    if (energy_ev.size() != theta_deg.size() || fwhm_mev.size() != theta_deg.size())
      throw std::invalid_argument("branch trace: column length mismatch");
    for (std::size_t i = 1; i < theta_deg.size(); ++i)
      if (!(theta_deg[i] > theta_deg[i - 1]))
        throw std::invalid_argument("branch trace: angles must be strictly monotone");
  }
};

struct ExtractOptions {
  double exclusion_halfwidth_deg = 0.5;  // dark-state region has no signal
  double max_center_se_mev = 0.5;        // reject rows with unconstrained centers
  FitOptions fit;
};

struct ExtractedBranches {
  BranchTrace upb, lpb;
  std::vector<std::string> skipped;  // per-angle diagnostics for omitted rows
};

// Per-angle double-Lorentzian fits with nearest-center branch tracking.
// A failed or low-quality row is skipped with a diagnostic, not fatal; if
// no row at all yields two peaks the map does not show both branches.
inline ExtractedBranches extract_branches(const SpectralMap& map,
                                          const ExtractOptions& options = {}) {
  map.validate();
  ExtractedBranches out;
  double last_up = 0.0, last_lo = 0.0, last_dup = 0.0;
  bool have_last = false;

  for (std::size_t it = 0; it < map.n_theta(); ++it) {
    double theta = map.thetas_deg[it];
    if (std::abs(theta) < options.exclusion_halfwidth_deg) continue;
    std::span<const double> row(map.intensities.data() + it * map.n_energy(),
                                map.n_energy());
    LorentzianFit lf;
    try {
      lf = fit_lorentzian(map.energies_ev, row, 2, std::nullopt, options.fit);
    } catch (const diagnostic_error& e) {
      out.skipped.push_back(std::to_string(theta) + " deg: " + e.what());
      continue;
    }
    const LorentzianPeak& plo = lf.peaks[0];
    const LorentzianPeak& pup = lf.peaks[1];
    bool ok = lf.fit.converged;
    for (const LorentzianPeak& p : lf.peaks) {
      if (!(p.amplitude > 0.0) || !(p.fwhm_mev > 0.0)) ok = false;
      if (p.center_ev <= map.energies_ev.front() || p.center_ev >= map.energies_ev.back())
        ok = false;
    }
    // params layout: [offset, (dc, fwhm, amp) x2]; gate on the center errors.
    for (std::size_t k : {std::size_t{1}, std::size_t{4}}) {
      double se = lf.fit.std_errors[k];
      if (std::isfinite(se) && se > options.max_center_se_mev) ok = false;
    }
    if (!ok) {
      out.skipped.push_back(std::to_string(theta) + " deg: low-quality fit");
      continue;
    }

    double c_up = pup.center_ev, c_lo = plo.center_ev;
    if (have_last) {
      // Nearest-center continuity; on a tie keep the sign of dE/dtheta of
      // the upper trace.
      double straight = std::abs(c_up - last_up) + std::abs(c_lo - last_lo);
      double swapped = std::abs(c_lo - last_up) + std::abs(c_up - last_lo);
      bool swap = swapped < straight;
      if (swapped == straight && last_dup != 0.0)
        swap = (c_lo - last_up) * last_dup > (c_up - last_up) * last_dup;
      if (swap) std::swap(c_up, c_lo);
    }
    const LorentzianPeak& up = c_up == pup.center_ev ? pup : plo;
    const LorentzianPeak& lo = c_up == pup.center_ev ? plo : pup;
    if (have_last) last_dup = up.center_ev - last_up;
    last_up = up.center_ev;
    last_lo = lo.center_ev;
    have_last = true;
    out.upb.push(theta, up.center_ev, up.fwhm_mev, up.amplitude);
    out.lpb.push(theta, lo.center_ev, lo.fwhm_mev, lo.amplitude);
  }

  if (out.upb.size() == 0 || out.lpb.size() == 0)
    throw diagnostic_error(
        "extract_branches: no angle produced a two-peak fit; a branch is missing "
        "from the map");
  out.upb.validate();
  out.lpb.validate();
  return out;
}

// ---------------------------------------------------------------------------
// BIC dispersion fit (energy and FWHM jointly)
// ---------------------------------------------------------------------------

struct DispersionFit {
  BicDispersionParams params;
  FitResult fit;
};

// Joint fit of E(theta) and kappa(theta). Energy and width residuals are
// scaled by their per-series median absolute values so the two series
// contribute comparably. e0 is seeded from the sample closest to normal
// incidence.
inline DispersionFit fit_bic_dispersion(const BranchTrace& samples,
                                        AlphaUnits alpha_units = AlphaUnits::mev_um2,
                                        const FitOptions& options = {}) {
  samples.validate();
  const std::size_t nsamp = samples.size();
  if (nsamp < 5)
    throw diagnostic_error("fit_bic_dispersion: need at least 5 samples");
  double max_abs_theta = 0.0;
  for (double t : samples.theta_deg) max_abs_theta = std::max(max_abs_theta, std::abs(t));
  if (max_abs_theta < 3.0)
    throw diagnostic_error(
        "fit_bic_dispersion: degenerate angle range; samples must span |theta| >= 3 deg");

  std::size_t i_near = 0, i_far = 0;
  for (std::size_t i = 1; i < nsamp; ++i) {
    if (std::abs(samples.theta_deg[i]) < std::abs(samples.theta_deg[i_near])) i_near = i;
    if (std::abs(samples.theta_deg[i]) > std::abs(samples.theta_deg[i_far])) i_far = i;
  }
  double e0_init = samples.energy_ev[i_near];
  double u_init = 0.2;
  double v_init = 0.05;
  {
    double lambda0 = constants::hc_ev_um / e0_init;
    double k_far = wavevector(samples.theta_deg[i_far], lambda0);
    double drop = e0_init - samples.energy_ev[i_far];
    if (drop > 0.0 && std::abs(k_far) > 0.0)
      v_init = std::sqrt(std::max((drop + u_init) * (drop + u_init) - u_init * u_init,
                                  1e-12)) /
               std::abs(k_far);
  }
  double gamma_max = 0.0;
  for (double g : samples.fwhm_mev) gamma_max = std::max(gamma_max, g);
  double kappa_inf_init = gamma_max > 0.0 ? 1.05 * gamma_max : 1.0;
  double alpha_init = 10.0;
  {
    // smallest non-zero angle pins the quadratic onset
    std::size_t i_small = i_far;
    for (std::size_t i = 0; i < nsamp; ++i)
      if (std::abs(samples.theta_deg[i]) > 1e-9 &&
          std::abs(samples.theta_deg[i]) < std::abs(samples.theta_deg[i_small]))
        i_small = i;
    double k = wavevector(samples.theta_deg[i_small], constants::hc_ev_um / e0_init);
    double gam = samples.fwhm_mev[i_small];
    if (gam > 0.0 && gam < kappa_inf_init) {
      double inv = 1.0 / gam - 1.0 / kappa_inf_init;
      double a0 = 1.0 / (k * k * inv);
      if (std::isfinite(a0) && a0 > 0.0) alpha_init = a0;
    }
  }

  double e_lo = *std::min_element(samples.energy_ev.begin(), samples.energy_ev.end());
  double e_hi = *std::max_element(samples.energy_ev.begin(), samples.energy_ev.end());
  double s_e = detail::median_abs(samples.energy_ev);
  double s_g = detail::median_abs(samples.fwhm_mev);

  FitProblem problem;
  problem.options = options;
  problem.initial = {e0_init, u_init, v_init, kappa_inf_init, alpha_init};
  problem.lower = {std::max(e_lo - 0.1, 1e-6), 1e-4, 0.0, 1e-3, 1e-6};
  problem.upper = {e_hi + 0.1, 10.0, 100.0, 1e4, 1e6};
  for (std::size_t i = 0; i < problem.initial.size(); ++i)
    problem.initial[i] = std::clamp(problem.initial[i], problem.lower[i], problem.upper[i]);
  problem.residual = [&samples, alpha_units, s_e, s_g](std::span<const double> p) {
    BicDispersionParams bic;
    bic.e0_ev = p[0];
    bic.u_ev = p[1];
    bic.v_ev_um = p[2];
    bic.kappa_inf_mev = p[3];
    bic.alpha = p[4];
    bic.alpha_units = alpha_units;
    bic.lambda_ref_um = constants::hc_ev_um / p[0];
    std::vector<double> r;
    r.reserve(2 * samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      r.push_back((bic_energy(bic, samples.theta_deg[i]) - samples.energy_ev[i]) / s_e);
      r.push_back((bic_fwhm(bic, samples.theta_deg[i]) - samples.fwhm_mev[i]) / s_g);
    }
    return r;
  };

  FitResult fit = nlls_solve(problem);
  DispersionFit out;
  out.fit = fit;
  out.params.e0_ev = fit.params[0];
  out.params.u_ev = fit.params[1];
  out.params.v_ev_um = fit.params[2];
  out.params.kappa_inf_mev = fit.params[3];
  out.params.alpha = fit.params[4];
  out.params.alpha_units = alpha_units;
  out.params.lambda_ref_um = constants::hc_ev_um / fit.params[0];
  return out;
}

// ---------------------------------------------------------------------------
// Coupled-oscillator fit
// ---------------------------------------------------------------------------

struct CoupledOscillatorFit {
  double g_mev = 0.0;
  double delta0_mev = 0.0;     // E_BIC(0) - E_SPE
  double kappa_spe_mev = 0.0;
  double e_spe_ev = 0.0;
  RabiSplitting rabi;
  FitResult fit;
};

// Fits (g, delta_0, kappa_SPE) against both branch energy and FWHM traces
// with the cavity dispersion held fixed. Residual series are scaled by
// their per-series median absolute values.
inline CoupledOscillatorFit fit_coupled_oscillator(const BranchTrace& upb,
                                                   const BranchTrace& lpb,
                                                   const BicDispersionParams& bic,
                                                   const EmitterParams& em_init,
                                                   double g_init_mev,
                                                   const FitOptions& options = {}) {
  upb.validate();
  lpb.validate();
  bic.validate();
  em_init.validate();
  if (upb.size() == 0 || lpb.size() == 0)
    throw diagnostic_error("fit_coupled_oscillator: empty branch trace");

  struct Sample {
    double e_bic_ev, kappa_bic_mev, energy_ev, fwhm_mev;
    bool upper;
  };
  std::vector<Sample> data;
  data.reserve(upb.size() + lpb.size());
  bool has_pos = false, has_neg = false;
  auto ingest = [&](const BranchTrace& t, bool upper) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      data.push_back({bic_energy(bic, t.theta_deg[i]), bic_fwhm(bic, t.theta_deg[i]),
                      t.energy_ev[i], t.fwhm_mev[i], upper});
      if (t.theta_deg[i] > 0.0) has_pos = true;
      if (t.theta_deg[i] < 0.0) has_neg = true;
    }
  };
  ingest(upb, true);
  ingest(lpb, false);

  double s_e_up = detail::median_abs(upb.energy_ev);
  double s_e_lo = detail::median_abs(lpb.energy_ev);
  double s_g_up = detail::median_abs(upb.fwhm_mev);
  double s_g_lo = detail::median_abs(lpb.fwhm_mev);

  FitProblem problem;
  problem.options = options;
  problem.initial = {g_init_mev, ev_to_mev(bic.e0_ev - em_init.e_spe_ev),
                     em_init.kappa_spe_mev};
  problem.lower = {0.0, -100.0, 0.0};
  problem.upper = {100.0, 100.0, 1000.0};
  for (std::size_t i = 0; i < 3; ++i)
    problem.initial[i] = std::clamp(problem.initial[i], problem.lower[i], problem.upper[i]);
  problem.residual = [&data, &bic, s_e_up, s_e_lo, s_g_up, s_g_lo](
                         std::span<const double> p) {
    EmitterParams em{bic.e0_ev - mev_to_ev(p[1]), p[2]};
    CouplingParams c{p[0]};
    std::vector<double> r;
    r.reserve(2 * data.size());
    for (const Sample& s : data) {
      CoupledHamiltonian h = hamiltonian(s.e_bic_ev, s.kappa_bic_mev, em, c);
      auto [up, lo] = eigenenergies_analytic(h);
      const ComplexEnergy& e = s.upper ? up : lo;
      r.push_back((e.re_ev - s.energy_ev) / (s.upper ? s_e_up : s_e_lo));
      r.push_back((e.fwhm_mev() - s.fwhm_mev) / (s.upper ? s_g_up : s_g_lo));
    }
    return r;
  };

  FitResult fit = nlls_solve(problem);
  if (!(has_pos && has_neg)) {
    if (!fit.diagnostics.empty()) fit.diagnostics += "; ";
    fit.diagnostics += "traces cover one side of the anticrossing only; expect wide uncertainties";
  }

  CoupledOscillatorFit out;
  out.fit = fit;
  out.g_mev = fit.params[0];
  out.delta0_mev = fit.params[1];
  out.kappa_spe_mev = fit.params[2];
  out.e_spe_ev = bic.e0_ev - mev_to_ev(fit.params[1]);
  double theta_max = 0.0;
  for (double t : upb.theta_deg) theta_max = std::max(theta_max, std::abs(t));
  for (double t : lpb.theta_deg) theta_max = std::max(theta_max, std::abs(t));
  try {
    std::vector<double> grid = symmetric_theta_grid(std::max(theta_max, 1.0), 0.01);
    EmitterParams em{out.e_spe_ev, out.kappa_spe_mev};
    BranchCurves curves = branch_curves(bic, em, CouplingParams{out.g_mev}, grid);
    out.rabi = rabi_splitting(curves);
  } catch (const diagnostic_error& e) {
    out.rabi = {std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN()};
    if (!out.fit.diagnostics.empty()) out.fit.diagnostics += "; ";
    out.fit.diagnostics += std::string("rabi splitting not located: ") + e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Power-detuning series
// ---------------------------------------------------------------------------

struct PowerPoint {
  double power_kw_cm2 = 0.0;
  double upb_shift_mev = 0.0;  // observed shift relative to the lowest power
  double lpb_shift_mev = 0.0;
};

struct PowerPointFit {
  double power_kw_cm2 = 0.0;
  double delta_bic_mev = 0.0;
  BranchShifts predicted;
  double sum_rule_residual_mev = 0.0;  // obs_UPB + obs_LPB - delta_BIC
};

struct PowerSeriesFit {
  std::vector<PowerPointFit> points;
  bool converged = true;
  std::string diagnostics;
};

// Per power point, finds the cavity blueshift delta_BIC that reproduces the
// observed UPB/LPB shifts in least squares, with the emitter held fixed.
// The sum-rule residual is reported as a consistency diagnostic.
inline PowerSeriesFit fit_power_series(std::span<const PowerPoint> observations,
                                       const BicDispersionParams& bic,
                                       const EmitterParams& em, const CouplingParams& c,
                                       double theta_deg,
                                       const FitOptions& options = {}) {
  if (observations.empty())
    throw std::invalid_argument("fit_power_series: no power points");
  CoupledHamiltonian base =
      hamiltonian(bic_energy(bic, theta_deg), bic_fwhm(bic, theta_deg), em, c);

  PowerSeriesFit out;
  if (observations.size() == 1) {
    out.points.push_back({observations[0].power_kw_cm2, 0.0, {0.0, 0.0},
                          observations[0].upb_shift_mev + observations[0].lpb_shift_mev});
    return out;
  }

  for (const PowerPoint& obs : observations) {
    FitProblem problem;
    problem.options = options;
    problem.initial = {std::clamp(obs.upb_shift_mev + obs.lpb_shift_mev, -100.0, 100.0)};
    problem.lower = {-100.0};
    problem.upper = {100.0};
    problem.residual = [&base, &obs](std::span<const double> p) {
      BranchShifts pred = blueshift_numeric(base, p[0]);
      return std::vector<double>{pred.upb_mev - obs.upb_shift_mev,
                                 pred.lpb_mev - obs.lpb_shift_mev};
    };
    FitResult fit = nlls_solve(problem);
    if (!fit.converged) {
      out.converged = false;
      if (!out.diagnostics.empty()) out.diagnostics += "; ";
      out.diagnostics += "power point did not converge";
    }
    double delta = fit.params[0];
    out.points.push_back({obs.power_kw_cm2, delta, blueshift_numeric(base, delta),
                          obs.upb_shift_mev + obs.lpb_shift_mev - delta});
  }
  return out;
}

}  // namespace polaritonkit
