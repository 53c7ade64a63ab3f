#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "polaritonkit/dispersion.hpp"
#include "polaritonkit/errors.hpp"
#include "polaritonkit/fitting.hpp"
#include "polaritonkit/polariton.hpp"
#include "polaritonkit/spectra.hpp"

namespace polaritonkit {

struct SpectraConfig {
  double theta_max_deg = 8.0;    // symmetric grid [-max, +max]
  double theta_step_deg = 0.1;
  std::optional<double> energy_center_ev;  // defaults to the BIC band energy
  double energy_halfwidth_mev = 20.0;
  double energy_step_mev = 0.1;
  double amplitude = 1000.0;
  double offset = 0.0;
  NoiseSpec noise;
};

struct FitConfig {
  FitOptions options;
  double exclusion_halfwidth_deg = 0.5;
};

struct PhotonstatsConfig {
  double tau0_ns = 2.0;  // emitter lifetime; assumption, not a measured value
  double bin_width_ps = 64.0;
  double window_ps = 12800.0;
  double census_halfwidth_mev = 2.0;
};

// The shared run configuration: one JSON file with one group per module.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  std::uint64_t seed = 12345;
  std::string output_dir = ".";
  BicDispersionParams dispersion;
  EmitterParams emitter;
  CouplingParams coupling;
  SpectraConfig spectra;
  FitConfig fit;
  PhotonstatsConfig photonstats;

  double energy_center_ev() const {
    return spectra.energy_center_ev.value_or(dispersion.e0_ev);
  }

  void validate() const {
    try {
      dispersion.validate();
      emitter.validate();
      coupling.validate();
      spectra.noise.validate();
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
    if (!(spectra.theta_max_deg > 0.0) || !(spectra.theta_step_deg > 0.0))
      throw config_error("spectra.theta_max_deg and theta_step_deg must be > 0");
    if (!(spectra.energy_halfwidth_mev > 0.0) || !(spectra.energy_step_mev > 0.0))
      throw config_error("spectra.energy_halfwidth_mev and energy_step_mev must be > 0");
    if (!(spectra.amplitude >= 0.0) || !(spectra.offset >= 0.0))
      throw config_error("spectra.amplitude and offset must be >= 0");
    if (spectra.energy_center_ev && !(*spectra.energy_center_ev > 0.0))
      throw config_error("spectra.energy_center_ev must be > 0");
    if (fit.options.max_iter <= 0) throw config_error("fit.max_iter must be > 0");
    if (!(fit.options.step_tol > 0.0) || !(fit.options.residual_tol > 0.0))
      throw config_error("fit tolerances must be > 0");
    if (!(fit.exclusion_halfwidth_deg >= 0.0))
      throw config_error("fit.exclusion_halfwidth_deg must be >= 0");
    if (!(photonstats.tau0_ns > 0.0)) throw config_error("photonstats.tau0_ns must be > 0");
    if (!(photonstats.bin_width_ps > 0.0))
      throw config_error("photonstats.bin_width_ps must be > 0");
    if (!(photonstats.window_ps > 0.0))
      throw config_error("photonstats.window_ps must be > 0");
    if (!(photonstats.census_halfwidth_mev > 0.0))
      throw config_error("photonstats.census_halfwidth_mev must be > 0");
  }

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& scope,
                                const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw config_error("config: '" + scope + "' must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.contains(it.key()))
      throw config_error("config: unknown key '" +
                         (scope.empty() ? it.key() : scope + "." + it.key()) + "'");
}

template <typename T>
void read_field(const nlohmann::json& j, const std::string& scope,
                const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error("config: bad value for key '" + scope + "." + key + "'");
  }
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  detail::reject_unknown_keys(j, "", {"seed", "output_dir", "dispersion", "emitter",
                                      "coupling", "spectra", "fit", "photonstats"});
  detail::read_field(j, "", "seed", cfg.seed);
  detail::read_field(j, "", "output_dir", cfg.output_dir);

  if (j.contains("dispersion")) {
    const auto& d = j.at("dispersion");
    detail::reject_unknown_keys(d, "dispersion",
                                {"e0_ev", "u_ev", "v_ev_um", "kappa_inf_mev", "alpha",
                                 "alpha_units", "lambda_ref_um"});
    detail::read_field(d, "dispersion", "e0_ev", cfg.dispersion.e0_ev);
    detail::read_field(d, "dispersion", "u_ev", cfg.dispersion.u_ev);
    detail::read_field(d, "dispersion", "v_ev_um", cfg.dispersion.v_ev_um);
    detail::read_field(d, "dispersion", "kappa_inf_mev", cfg.dispersion.kappa_inf_mev);
    detail::read_field(d, "dispersion", "alpha", cfg.dispersion.alpha);
    if (d.contains("alpha_units")) {
      std::string units = d.at("alpha_units").get<std::string>();
      if (units == "meV")
        cfg.dispersion.alpha_units = AlphaUnits::mev_um2;
      else if (units == "eV")
        cfg.dispersion.alpha_units = AlphaUnits::ev_um2;
      else
        throw config_error("config: dispersion.alpha_units must be 'meV' or 'eV'");
    }
    if (d.contains("lambda_ref_um"))
      detail::read_field(d, "dispersion", "lambda_ref_um", cfg.dispersion.lambda_ref_um);
    else if (d.contains("e0_ev"))
      cfg.dispersion.lambda_ref_um = constants::hc_ev_um / cfg.dispersion.e0_ev;
  }

  if (j.contains("emitter")) {
    const auto& e = j.at("emitter");
    detail::reject_unknown_keys(e, "emitter", {"e_spe_ev", "kappa_spe_mev"});
    detail::read_field(e, "emitter", "e_spe_ev", cfg.emitter.e_spe_ev);
    detail::read_field(e, "emitter", "kappa_spe_mev", cfg.emitter.kappa_spe_mev);
  }

  if (j.contains("coupling")) {
    const auto& c = j.at("coupling");
    detail::reject_unknown_keys(c, "coupling", {"g_mev"});
    detail::read_field(c, "coupling", "g_mev", cfg.coupling.g_mev);
  }

  if (j.contains("spectra")) {
    const auto& s = j.at("spectra");
    detail::reject_unknown_keys(
        s, "spectra",
        {"theta_max_deg", "theta_step_deg", "energy_center_ev", "energy_halfwidth_mev",
         "energy_step_mev", "amplitude", "offset", "noise", "noise_sigma_frac"});
    detail::read_field(s, "spectra", "theta_max_deg", cfg.spectra.theta_max_deg);
    detail::read_field(s, "spectra", "theta_step_deg", cfg.spectra.theta_step_deg);
    if (s.contains("energy_center_ev") && !s.at("energy_center_ev").is_null())
      cfg.spectra.energy_center_ev = s.at("energy_center_ev").get<double>();
    detail::read_field(s, "spectra", "energy_halfwidth_mev",
                       cfg.spectra.energy_halfwidth_mev);
    detail::read_field(s, "spectra", "energy_step_mev", cfg.spectra.energy_step_mev);
    detail::read_field(s, "spectra", "amplitude", cfg.spectra.amplitude);
    detail::read_field(s, "spectra", "offset", cfg.spectra.offset);
    if (s.contains("noise"))
      cfg.spectra.noise.kind = noise_kind_from_string(s.at("noise").get<std::string>());
    detail::read_field(s, "spectra", "noise_sigma_frac", cfg.spectra.noise.sigma_frac);
  }

  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    detail::reject_unknown_keys(
        f, "fit", {"max_iter", "step_tol", "residual_tol", "exclusion_halfwidth_deg"});
    detail::read_field(f, "fit", "max_iter", cfg.fit.options.max_iter);
    detail::read_field(f, "fit", "step_tol", cfg.fit.options.step_tol);
    detail::read_field(f, "fit", "residual_tol", cfg.fit.options.residual_tol);
    detail::read_field(f, "fit", "exclusion_halfwidth_deg", cfg.fit.exclusion_halfwidth_deg);
  }

  if (j.contains("photonstats")) {
    const auto& p = j.at("photonstats");
    detail::reject_unknown_keys(
        p, "photonstats", {"tau0_ns", "bin_width_ps", "window_ps", "census_halfwidth_mev"});
    detail::read_field(p, "photonstats", "tau0_ns", cfg.photonstats.tau0_ns);
    detail::read_field(p, "photonstats", "bin_width_ps", cfg.photonstats.bin_width_ps);
    detail::read_field(p, "photonstats", "window_ps", cfg.photonstats.window_ps);
    detail::read_field(p, "photonstats", "census_halfwidth_mev",
                       cfg.photonstats.census_halfwidth_mev);
  }

  cfg.validate();
  return cfg;
}

// Canonical form used for the output config hash. output_dir is accepted as
// a config key but deliberately not serialized: where the results land does
// not change what they are.
inline nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["dispersion"] = {{"e0_ev", dispersion.e0_ev},
                     {"u_ev", dispersion.u_ev},
                     {"v_ev_um", dispersion.v_ev_um},
                     {"kappa_inf_mev", dispersion.kappa_inf_mev},
                     {"alpha", dispersion.alpha},
                     {"alpha_units", to_string(dispersion.alpha_units)},
                     {"lambda_ref_um", dispersion.lambda_ref_um}};
  j["emitter"] = {{"e_spe_ev", emitter.e_spe_ev}, {"kappa_spe_mev", emitter.kappa_spe_mev}};
  j["coupling"] = {{"g_mev", coupling.g_mev}};
  j["spectra"] = {{"theta_max_deg", spectra.theta_max_deg},
                  {"theta_step_deg", spectra.theta_step_deg},
                  {"energy_halfwidth_mev", spectra.energy_halfwidth_mev},
                  {"energy_step_mev", spectra.energy_step_mev},
                  {"amplitude", spectra.amplitude},
                  {"offset", spectra.offset},
                  {"noise", to_string(spectra.noise.kind)},
                  {"noise_sigma_frac", spectra.noise.sigma_frac}};
  if (spectra.energy_center_ev)
    j["spectra"]["energy_center_ev"] = *spectra.energy_center_ev;
  j["fit"] = {{"max_iter", fit.options.max_iter},
              {"step_tol", fit.options.step_tol},
              {"residual_tol", fit.options.residual_tol},
              {"exclusion_halfwidth_deg", fit.exclusion_halfwidth_deg}};
  j["photonstats"] = {{"tau0_ns", photonstats.tau0_ns},
                      {"bin_width_ps", photonstats.bin_width_ps},
                      {"window_ps", photonstats.window_ps},
                      {"census_halfwidth_mev", photonstats.census_halfwidth_mev}};
  return j;
}

}  // namespace polaritonkit
