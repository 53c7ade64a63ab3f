#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polaritonkit/errors.hpp"
#include "polaritonkit/polariton.hpp"
#include "polaritonkit/rng.hpp"

namespace polaritonkit {

struct LorentzianPeak {
  double center_ev = 0.0;
  double fwhm_mev = 1.0;
  double amplitude = 1.0;  // peak height, counts
  double offset = 0.0;     // constant background, counts

  void validate() const {
    if (!(fwhm_mev > 0.0)) throw std::invalid_argument("lorentzian: fwhm must be > 0");
    if (!(amplitude >= 0.0))
      throw std::invalid_argument("lorentzian: amplitude must be >= 0");
    if (!(offset >= 0.0)) throw std::invalid_argument("lorentzian: offset must be >= 0");
  }
};

// offset + A (G/2)^2 / ((E - c)^2 + (G/2)^2); peak height A, FWHM G.
// Evaluated as A / (1 + (d/hw)^2) so the value at the center is exactly
// offset + A.
inline double lorentzian(double energy_ev, const LorentzianPeak& p) {
  p.validate();
  double u = (energy_ev - p.center_ev) / (0.5 * mev_to_ev(p.fwhm_mev));
  return p.offset + p.amplitude / (1.0 + u * u);
}

// Far-field emission weight of one branch: (BIC fraction) x (radiative
// cavity loss), normalized by kappa_inf and clamped to [0, 1]. This is the
// modeling choice that reproduces the dark state at normal incidence: both
// branches go dark because the only out-coupling channel is the cavity one.
inline double branch_weight(const PolaritonBranch& b, double kappa_bic_mev,
                            double kappa_inf_mev) {
  if (!(kappa_bic_mev >= 0.0) || !(kappa_inf_mev > 0.0))
    throw std::domain_error("branch_weight: losses must be non-negative, kappa_inf > 0");
  double w = b.w_bic * kappa_bic_mev / kappa_inf_mev;
  return std::clamp(w, 0.0, 1.0);
}

// Rectangular grid of intensity over (angle, energy); the unit of map
// ingestion and synthesis. Intensities are row-major [n_theta x n_energy].
struct SpectralMap {
  std::vector<double> thetas_deg;   // strictly increasing
  std::vector<double> energies_ev;  // strictly increasing, uniform step
  std::vector<double> intensities;
  std::map<std::string, std::string> metadata;

  std::size_t n_theta() const { return thetas_deg.size(); }
  std::size_t n_energy() const { return energies_ev.size(); }
  double& at(std::size_t it, std::size_t ie) { return intensities[it * n_energy() + ie]; }
  double at(std::size_t it, std::size_t ie) const {
    return intensities[it * n_energy() + ie];
  }

  void validate() const {
    if (intensities.size() != n_theta() * n_energy())
      throw std::invalid_argument("spectral map: matrix does not match axes");
    auto strictly_increasing = [](const std::vector<double>& v) {
      for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
      return true;
    };
    if (!strictly_increasing(thetas_deg))
      throw std::invalid_argument("spectral map: angles must be strictly increasing");
    if (!strictly_increasing(energies_ev))
      throw std::invalid_argument("spectral map: energies must be strictly increasing");
    if (energies_ev.size() >= 3) {
      double step = energies_ev[1] - energies_ev[0];
      for (std::size_t i = 2; i < energies_ev.size(); ++i)
        if (std::abs(energies_ev[i] - energies_ev[i - 1] - step) > 1e-9 * step)
          throw std::invalid_argument("spectral map: energy step must be uniform");
    }
    for (double v : intensities)
      if (!(v >= 0.0))
        throw std::invalid_argument("spectral map: negative or non-finite intensity");
  }
};

// Mirror-exact symmetric angle grid: -n*step, ..., -step, 0, step, ..., n*step.
// Each negative value is the exact negation of its positive partner, so
// noiseless maps are bit-symmetric.
inline std::vector<double> symmetric_theta_grid(double max_deg, double step_deg) {
  if (!(max_deg > 0.0) || !(step_deg > 0.0))
    throw std::invalid_argument("theta grid: max and step must be > 0");
  auto n = static_cast<std::size_t>(std::floor(max_deg / step_deg + 0.5));
  std::vector<double> grid;
  grid.reserve(2 * n + 1);
  for (std::size_t i = n; i > 0; --i) grid.push_back(-(static_cast<double>(i) * step_deg));
  grid.push_back(0.0);
  for (std::size_t i = 1; i <= n; ++i) grid.push_back(static_cast<double>(i) * step_deg);
  return grid;
}

inline std::vector<double> energy_grid(double center_ev, double halfwidth_mev,
                                       double step_mev) {
  if (!(halfwidth_mev > 0.0) || !(step_mev > 0.0))
    throw std::invalid_argument("energy grid: halfwidth and step must be > 0");
  auto n = static_cast<long>(std::floor(halfwidth_mev / step_mev + 0.5));
  std::vector<double> grid;
  grid.reserve(2 * n + 1);
  for (long i = -n; i <= n; ++i)
    grid.push_back(center_ev + mev_to_ev(step_mev) * static_cast<double>(i));
  return grid;
}

enum class NoiseKind { none, gaussian, poisson };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double sigma_frac = 0.01;  // gaussian sigma as a fraction of the map maximum

  void validate() const {
    if (kind == NoiseKind::gaussian && !(sigma_frac > 0.0))
      throw config_error("noise: gaussian sigma_frac must be > 0");
  }
};

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseKind::none;
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "poisson") return NoiseKind::poisson;
  throw config_error("noise: unknown kind '" + s + "' (none|gaussian|poisson)");
}

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    default: return "poisson";
  }
}

struct SynthModel {
  BicDispersionParams bic;
  EmitterParams emitter;
  CouplingParams coupling;
  double amplitude = 1000.0;  // global peak-height scale, counts
  double offset = 0.0;        // constant background, counts
};

// One spectrum row: a Lorentzian per branch, height amplitude * weight,
// plus the global offset. Branches with vanishing weight or width
// contribute nothing.
inline std::vector<double> synth_spectrum(const PolaritonBranch& upb,
                                          const PolaritonBranch& lpb,
                                          double weight_upb, double weight_lpb,
                                          double amplitude, double offset,
                                          std::span<const double> energies_ev) {
  std::vector<double> row(energies_ev.size(), offset);
  auto add_peak = [&](const PolaritonBranch& b, double weight) {
    double height = amplitude * weight;
    if (!(height > 0.0) || !(b.fwhm_mev > 0.0)) return;
    LorentzianPeak peak{b.energy_ev, b.fwhm_mev, height, 0.0};
    for (std::size_t i = 0; i < row.size(); ++i) row[i] += lorentzian(energies_ev[i], peak);
  };
  add_peak(upb, weight_upb);
  add_peak(lpb, weight_lpb);
  return row;
}

// Full angle-resolved map synthesis. Deterministic for a given seed: each
// row draws from its own seed-derived stream, so rows may be generated in
// any order (or concurrently) with identical results.
inline SpectralMap synth_map(const SynthModel& model,
                             std::span<const double> thetas_deg,
                             std::span<const double> energies_ev,
                             const NoiseSpec& noise, std::uint64_t seed) {
  model.bic.validate();
  model.emitter.validate();
  model.coupling.validate();
  noise.validate();
  if (!(model.amplitude >= 0.0) || !(model.offset >= 0.0))
    throw std::invalid_argument("synth_map: amplitude and offset must be >= 0");

  SpectralMap map;
  map.thetas_deg.assign(thetas_deg.begin(), thetas_deg.end());
  map.energies_ev.assign(energies_ev.begin(), energies_ev.end());
  map.intensities.resize(map.n_theta() * map.n_energy());

  BranchCurves curves = branch_curves(model.bic, model.emitter, model.coupling, thetas_deg);
  for (std::size_t it = 0; it < map.n_theta(); ++it) {
    double kappa_bic = bic_fwhm(model.bic, map.thetas_deg[it]);
    double w_up = branch_weight(curves.upb[it], kappa_bic, model.bic.kappa_inf_mev);
    double w_lo = branch_weight(curves.lpb[it], kappa_bic, model.bic.kappa_inf_mev);
    std::vector<double> row = synth_spectrum(curves.upb[it], curves.lpb[it], w_up, w_lo,
                                             model.amplitude, model.offset, energies_ev);
    std::copy(row.begin(), row.end(), map.intensities.begin() + it * map.n_energy());
  }

  if (noise.kind == NoiseKind::gaussian) {
    double peak = *std::max_element(map.intensities.begin(), map.intensities.end());
    double sigma = noise.sigma_frac * peak;
    for (std::size_t it = 0; it < map.n_theta(); ++it) {
      RandomStream stream(derive_stream_seed(seed, it));
      for (std::size_t ie = 0; ie < map.n_energy(); ++ie) {
        double v = map.at(it, ie) + stream.normal(0.0, sigma);
        map.at(it, ie) = v < 0.0 ? 0.0 : v;  // counts cannot go negative
      }
    }
  } else if (noise.kind == NoiseKind::poisson) {
    for (std::size_t it = 0; it < map.n_theta(); ++it) {
      RandomStream stream(derive_stream_seed(seed, it));
      for (std::size_t ie = 0; ie < map.n_energy(); ++ie)
        map.at(it, ie) = static_cast<double>(stream.poisson(map.at(it, ie)));
    }
  }

  map.metadata["seed"] = std::to_string(seed);
  map.metadata["noise"] = to_string(noise.kind);
  if (noise.kind == NoiseKind::gaussian)
    map.metadata["noise_sigma_frac"] = std::to_string(noise.sigma_frac);
  map.metadata["g_mev"] = std::to_string(model.coupling.g_mev);
  map.metadata["e_spe_ev"] = std::to_string(model.emitter.e_spe_ev);
  map.metadata["kappa_spe_mev"] = std::to_string(model.emitter.kappa_spe_mev);
  map.metadata["e0_ev"] = std::to_string(model.bic.e0_ev);
  map.validate();
  return map;
}

}  // namespace polaritonkit
