#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "polaritonkit/errors.hpp"
#include "polaritonkit/fitting.hpp"
#include "polaritonkit/rng.hpp"

namespace polaritonkit {

struct G2Params {
  double g2_0 = 0.28;       // dip value at zero delay
  double tau0_ps = 2000.0;  // correlation time of the dip
  double baseline = 1.0;    // long-delay level

  void validate() const {
    if (!(g2_0 >= 0.0)) throw std::invalid_argument("g2: g2_0 must be >= 0");
    if (!(tau0_ps > 0.0)) throw std::invalid_argument("g2: tau0_ps must be > 0");
    if (!(baseline > 0.0)) throw std::invalid_argument("g2: baseline must be > 0");
  }
};

// Two-level antibunching dip: baseline * (1 - (1 - g2_0) exp(-|tau|/tau0)).
// Even in tau; tends to the baseline at long delays.
inline double g2_model(double tau_ps, const G2Params& p) {
  p.validate();
  return p.baseline * (1.0 - (1.0 - p.g2_0) * std::exp(-std::abs(tau_ps) / p.tau0_ps));
}

enum class G2Normalization { raw, unity_baseline };

// Coincidence histogram with uniform bins placed symmetrically about zero
// delay (tau = 0 is a bin center).
struct G2Histogram {
  double bin_width_ps = 64.0;
  std::vector<double> delays_ps;  // bin centers
  std::vector<double> counts;
  G2Normalization normalization = G2Normalization::raw;

  void validate() const {
    if (!(bin_width_ps > 0.0))
      throw std::invalid_argument("g2 histogram: bin width must be > 0");
    if (counts.size() != delays_ps.size())
      throw std::invalid_argument("g2 histogram: counts/delays length mismatch");
  }
};

// Bins delay samples into the symmetric histogram. Counts are conserved:
// the total equals the number of samples inside the covered range.
inline G2Histogram histogram_delays(std::span<const double> delays_ps,
                                    double bin_width_ps, double range_ps) {
  if (!(bin_width_ps > 0.0))
    throw std::invalid_argument("histogram_delays: bin width must be > 0");
  if (!(range_ps > 0.0))
    throw std::invalid_argument("histogram_delays: range must be > 0");
  auto n_half = static_cast<long>(std::floor(range_ps / bin_width_ps + 0.5));
  long n_bins = 2 * n_half + 1;

  G2Histogram hist;
  hist.bin_width_ps = bin_width_ps;
  hist.delays_ps.reserve(static_cast<std::size_t>(n_bins));
  for (long i = -n_half; i <= n_half; ++i)
    hist.delays_ps.push_back(static_cast<double>(i) * bin_width_ps);
  hist.counts.assign(static_cast<std::size_t>(n_bins), 0.0);

  for (double d : delays_ps) {
    long bin = static_cast<long>(std::floor(d / bin_width_ps + 0.5));
    if (bin < -n_half || bin > n_half) continue;
    hist.counts[static_cast<std::size_t>(bin + n_half)] += 1.0;
  }
  return hist;
}

// Hanbury Brown-Twiss simulation: a two-level emitter photon stream (an
// exponential re-excitation wait followed by an exponential emission wait)
// mixed with an uncorrelated background stream, split onto two detectors,
// cross-correlated within +-window. The renewal structure gives
// g2(tau) = 1 - rho^2 exp(-(R + G)|tau|) with rho the emitter fraction of
// the detected rate, so the dip depth and correlation time are set by the
// rates alone.
struct CoincidenceSim {
  double pump_rate_per_ps = 2.5e-4;        // re-excitation rate R
  double decay_rate_per_ps = 5.0e-4;       // radiative rate 1/tau_emitter
  double background_rate_per_ps = 0.0;     // uncorrelated photon rate
  double detector_split = 0.5;             // fraction routed to detector A
  double window_ps = 12800.0;              // coincidence window half-width

  void validate() const {
    if (pump_rate_per_ps < 0.0 || decay_rate_per_ps < 0.0 || background_rate_per_ps < 0.0)
      throw std::invalid_argument("coincidence sim: rates must be >= 0");
    if (!(detector_split > 0.0 && detector_split < 1.0))
      throw std::invalid_argument("coincidence sim: detector split must be in (0, 1)");
    if (!(window_ps > 0.0))
      throw std::invalid_argument("coincidence sim: window must be > 0");
  }

  // Signal fraction and the background rate that realize a target dip.
  static double background_for_dip(double pump_rate, double decay_rate, double g2_0) {
    double signal = pump_rate * decay_rate / (pump_rate + decay_rate);
    double rho = std::sqrt(std::max(1.0 - g2_0, 0.0));
    return rho > 0.0 ? signal * (1.0 - rho) / rho : 0.0;
  }
};

// Detector-B-minus-detector-A delays of all photon pairs within the window.
// Deterministic per seed.
inline std::vector<double> simulate_coincidences(const CoincidenceSim& sim,
                                                 double total_time_ps,
                                                 std::uint64_t seed) {
  sim.validate();
  if (!(total_time_ps >= 0.0))
    throw std::invalid_argument("simulate_coincidences: total time must be >= 0");
  RandomStream stream(seed);

  std::vector<double> photons;
  if (sim.pump_rate_per_ps > 0.0 && sim.decay_rate_per_ps > 0.0) {
    double t = 0.0;
    while (true) {
      t += stream.exponential(sim.pump_rate_per_ps);
      t += stream.exponential(sim.decay_rate_per_ps);
      if (t >= total_time_ps) break;
      photons.push_back(t);
    }
  }
  if (sim.background_rate_per_ps > 0.0) {
    double t = 0.0;
    while (true) {
      t += stream.exponential(sim.background_rate_per_ps);
      if (t >= total_time_ps) break;
      photons.push_back(t);
    }
  }
  std::sort(photons.begin(), photons.end());

  std::vector<double> det_a, det_b;
  for (double t : photons)
    (stream.uniform() < sim.detector_split ? det_a : det_b).push_back(t);

  std::vector<double> delays;
  std::size_t lo = 0;
  for (double ta : det_a) {
    while (lo < det_b.size() && det_b[lo] < ta - sim.window_ps) ++lo;
    for (std::size_t j = lo; j < det_b.size() && det_b[j] <= ta + sim.window_ps; ++j)
      delays.push_back(det_b[j] - ta);
  }
  return delays;
}

struct G2Fit {
  G2Params params;
  FitResult fit;
  std::optional<bool> purity;  // empty when no dip could be resolved
};

// Normalizes the baseline from the outer 20% of bins, fits the dip model,
// and classifies single-photon purity as fitted g2(0) < 0.5 (strict).
inline G2Fit fit_g2(const G2Histogram& hist, const FitOptions& options = {}) {
  hist.validate();
  const std::size_t n = hist.counts.size();
  if (n < 10) throw diagnostic_error("fit_g2: need at least 10 bins");

  // Outer-bin baseline estimate (10% from each edge, at least one bin).
  std::size_t n_outer = std::max<std::size_t>(n / 10, 1);
  double outer_sum = 0.0;
  for (std::size_t i = 0; i < n_outer; ++i)
    outer_sum += hist.counts[i] + hist.counts[n - 1 - i];
  double outer_avg = outer_sum / static_cast<double>(2 * n_outer);
  if (!(outer_avg > 0.0))
    return {G2Params{1.0, hist.bin_width_ps, 1.0},
            FitResult{{}, {}, 0.0, 0, false, "empty outer bins; baseline undefined"},
            std::nullopt};

  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = hist.counts[i] / outer_avg;

  double range = std::abs(hist.delays_ps.front());
  double center_min = norm[n / 2];
  double g2_init = std::clamp(center_min, 0.0, 1.5);
  // Initial correlation time: delay where the dip has recovered half-way.
  double tau_init = 4.0 * hist.bin_width_ps;
  for (std::size_t i = n / 2; i < n; ++i)
    if (norm[i] > 1.0 - 0.5 * (1.0 - g2_init)) {
      tau_init = std::max(hist.delays_ps[i] / std::numbers::ln2, hist.bin_width_ps);
      break;
    }

  FitProblem problem;
  problem.options = options;
  problem.initial = {g2_init, std::min(tau_init, range), 1.0};
  problem.lower = {0.0, 0.25 * hist.bin_width_ps, 0.1};
  problem.upper = {2.0, 4.0 * range, 10.0};
  problem.residual = [&hist, &norm](std::span<const double> p) {
    std::vector<double> r(norm.size());
    for (std::size_t i = 0; i < norm.size(); ++i) {
      double model =
          p[2] * (1.0 - (1.0 - p[0]) * std::exp(-std::abs(hist.delays_ps[i]) / p[1]));
      r[i] = model - norm[i];
    }
    return r;
  };

  G2Fit out;
  out.fit = nlls_solve(problem);
  out.params.g2_0 = out.fit.params[0];
  out.params.tau0_ps = out.fit.params[1];
  out.params.baseline = out.fit.params[2];
  if (out.fit.converged)
    out.purity = out.params.g2_0 < 0.5;
  else
    out.purity = std::nullopt;  // no resolvable dip
  return out;
}

// Number of ZPL energies within [center - halfwidth, center + halfwidth].
inline int count_matching_emitters(std::span<const double> zpl_ev, double center_ev,
                                   double halfwidth_mev) {
  if (!(halfwidth_mev > 0.0))
    throw std::domain_error("count_matching_emitters: halfwidth must be > 0");
  double hw = mev_to_ev(halfwidth_mev);
  int count = 0;
  for (double e : zpl_ev)
    if (e >= center_ev - hw && e <= center_ev + hw) ++count;
  return count;
}

}  // namespace polaritonkit
