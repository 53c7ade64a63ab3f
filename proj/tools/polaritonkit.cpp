// polaritonkit: model, simulate and fit strong coupling between a single
// photon emitter and a BIC metasurface cavity.
//
// Subcommands write plot-ready CSVs plus JSON summaries into --output-dir;
// every output embeds the tool version, a hash of the effective
// configuration and the RNG seed, and re-runs are byte-identical.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polaritonkit/config.hpp"
#include "polaritonkit/io.hpp"
#include "polaritonkit/photonstats.hpp"
#include "polaritonkit/version.hpp"

namespace pk = polaritonkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiagnostic = 3;
constexpr int kExitIo = 4;

struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<double> g_mev, kappa_spe_mev, e_spe_ev, e0_ev;
  std::optional<std::string> noise;
  std::optional<double> noise_sigma_frac, amplitude, offset;
  std::optional<double> theta_max_deg, theta_step_deg;
  std::optional<double> exclusion_halfwidth_deg;
};

// Precedence: CLI flag > config file > POLARITONKIT_SEED (seed only) > default.
pk::RunConfig load_config(const CliOverrides& ov) {
  json j = json::object();
  if (ov.config_path) {
    std::string text = pk::read_text(*ov.config_path);
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw pk::config_error(std::string("config: invalid JSON: ") + e.what());
    }
  }
  pk::RunConfig cfg = pk::RunConfig::from_json(j);

  if (!j.contains("seed") && !ov.seed) {
    if (const char* env = std::getenv("POLARITONKIT_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw pk::config_error("POLARITONKIT_SEED is not an unsigned integer");
      }
    }
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.g_mev) cfg.coupling.g_mev = *ov.g_mev;
  if (ov.kappa_spe_mev) cfg.emitter.kappa_spe_mev = *ov.kappa_spe_mev;
  if (ov.e_spe_ev) cfg.emitter.e_spe_ev = *ov.e_spe_ev;
  if (ov.e0_ev) {
    cfg.dispersion.e0_ev = *ov.e0_ev;
    cfg.dispersion.lambda_ref_um = pk::constants::hc_ev_um / *ov.e0_ev;
  }
  if (ov.noise) cfg.spectra.noise.kind = pk::noise_kind_from_string(*ov.noise);
  if (ov.noise_sigma_frac) cfg.spectra.noise.sigma_frac = *ov.noise_sigma_frac;
  if (ov.amplitude) cfg.spectra.amplitude = *ov.amplitude;
  if (ov.offset) cfg.spectra.offset = *ov.offset;
  if (ov.theta_max_deg) cfg.spectra.theta_max_deg = *ov.theta_max_deg;
  if (ov.theta_step_deg) cfg.spectra.theta_step_deg = *ov.theta_step_deg;
  if (ov.exclusion_halfwidth_deg)
    cfg.fit.exclusion_halfwidth_deg = *ov.exclusion_halfwidth_deg;
  cfg.validate();
  return cfg;
}

pk::OutputStamp make_stamp(const pk::RunConfig& cfg) {
  return {pk::hash_hex(pk::fnv1a64(cfg.to_json().dump())), cfg.seed};
}

json meta_json(const pk::RunConfig& cfg) {
  pk::OutputStamp stamp = make_stamp(cfg);
  return {{"tool", "polaritonkit"},
          {"version", pk::kVersion},
          {"config_hash", stamp.config_hash},
          {"seed", stamp.seed}};
}

json fit_result_json(const pk::FitResult& fit, const std::vector<std::string>& names) {
  json p = json::object();
  json se = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    p[names[i]] = fit.params[i];
    double e = fit.std_errors[i];
    se[names[i]] = std::isfinite(e) ? json(e) : json();
  }
  return {{"params", p},
          {"std_errors", se},
          {"residual_norm", fit.residual_norm},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"diagnostics", fit.diagnostics}};
}

void write_json_atomic(const fs::path& path, const json& j) {
  pk::write_text_atomic(path, j.dump(2) + "\n");
}

int cmd_simulate(const pk::RunConfig& cfg) {
  std::vector<double> thetas =
      pk::symmetric_theta_grid(cfg.spectra.theta_max_deg, cfg.spectra.theta_step_deg);
  std::vector<double> energies = pk::energy_grid(
      cfg.energy_center_ev(), cfg.spectra.energy_halfwidth_mev, cfg.spectra.energy_step_mev);

  pk::SynthModel model{cfg.dispersion, cfg.emitter, cfg.coupling, cfg.spectra.amplitude,
                       cfg.spectra.offset};
  pk::SpectralMap map = pk::synth_map(model, thetas, energies, cfg.spectra.noise, cfg.seed);
  pk::BranchCurves curves =
      pk::branch_curves(cfg.dispersion, cfg.emitter, cfg.coupling, thetas);

  pk::OutputStamp stamp = make_stamp(cfg);
  fs::path dir = cfg.output_dir;
  pk::write_map_csv(dir / "map.csv", map, stamp);
  pk::write_branches_csv(dir / "branches.csv", curves, stamp);
  std::cout << "wrote " << (dir / "map.csv").string() << " (" << map.n_theta() << " x "
            << map.n_energy() << ") and " << (dir / "branches.csv").string() << "\n";
  return kExitOk;
}

int cmd_fit_dispersion(const pk::RunConfig& cfg, const std::string& input) {
  pk::BranchTrace trace = pk::read_trace_csv(input);
  pk::DispersionFit result =
      pk::fit_bic_dispersion(trace, cfg.dispersion.alpha_units, cfg.fit.options);

  json out = fit_result_json(result.fit, {"e0_ev", "u_ev", "v_ev_um", "kappa_inf_mev",
                                          "alpha"});
  out["_meta"] = meta_json(cfg);
  out["alpha_units"] = pk::to_string(result.params.alpha_units);
  out["lambda_ref_um"] = result.params.lambda_ref_um;

  fs::path dir = cfg.output_dir;
  write_json_atomic(dir / "dispersion_fit.json", out);

  pk::OutputStamp stamp = make_stamp(cfg);
  std::ostringstream csv;
  csv << stamp.comment_lines() << "theta_deg,energy_residual_eV,fwhm_residual_meV\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    double re = pk::bic_energy(result.params, trace.theta_deg[i]) - trace.energy_ev[i];
    double rg = pk::bic_fwhm(result.params, trace.theta_deg[i]) - trace.fwhm_mev[i];
    csv << pk::format_double(trace.theta_deg[i]) << ',' << pk::format_double(re) << ','
        << pk::format_double(rg) << '\n';
  }
  pk::write_text_atomic(dir / "dispersion_residuals.csv", csv.str());

  std::cout << "dispersion fit: e0=" << result.params.e0_ev
            << " eV, U=" << result.params.u_ev << " eV, v=" << result.params.v_ev_um
            << " eV.um, kappa_inf=" << result.params.kappa_inf_mev
            << " meV, alpha=" << result.params.alpha << " "
            << pk::to_string(result.params.alpha_units) << ".um^2 (converged="
            << (result.fit.converged ? "yes" : "no") << ")\n";
  return kExitOk;
}

int cmd_fit_polariton(const pk::RunConfig& cfg, const std::string& input) {
  pk::SpectralMap map = pk::read_map_csv(input);
  pk::ExtractOptions ex;
  ex.exclusion_halfwidth_deg = cfg.fit.exclusion_halfwidth_deg;
  ex.fit = cfg.fit.options;
  pk::ExtractedBranches branches = pk::extract_branches(map, ex);
  pk::CoupledOscillatorFit result =
      pk::fit_coupled_oscillator(branches.upb, branches.lpb, cfg.dispersion, cfg.emitter,
                                 cfg.coupling.g_mev, cfg.fit.options);

  json out = fit_result_json(result.fit, {"g_mev", "delta0_mev", "kappa_spe_mev"});
  out["_meta"] = meta_json(cfg);
  out["e_spe_ev"] = result.e_spe_ev;
  out["rabi_splitting_mev"] = result.rabi.splitting_mev;
  out["theta_star_deg"] = result.rabi.theta_deg;
  out["angles_used"] = branches.upb.size();
  out["angles_skipped"] = branches.skipped.size();

  fs::path dir = cfg.output_dir;
  write_json_atomic(dir / "polariton_fit.json", out);
  pk::OutputStamp stamp = make_stamp(cfg);
  pk::write_trace_csv(dir / "trace_upb.csv", branches.upb, stamp);
  pk::write_trace_csv(dir / "trace_lpb.csv", branches.lpb, stamp);

  std::cout << "coupled-oscillator fit: g=" << result.g_mev
            << " meV, delta0=" << result.delta0_mev
            << " meV, kappa_spe=" << result.kappa_spe_mev << " meV\n"
            << "Rabi splitting " << result.rabi.splitting_mev << " meV at |theta| = "
            << result.rabi.theta_deg << " deg\n";
  return kExitOk;
}

int cmd_power_series(const pk::RunConfig& cfg, const std::string& manifest_path,
                     std::optional<double> theta_flag) {
  json manifest;
  try {
    manifest = json::parse(pk::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw pk::config_error(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("points") ||
      !manifest.at("points").is_array() || manifest.at("points").empty())
    throw pk::config_error("manifest: need a non-empty 'points' array");
  double theta = theta_flag.value_or(
      manifest.contains("theta_deg") ? manifest.at("theta_deg").get<double>() : -2.56);

  struct Entry {
    double power;
    fs::path map_path;
  };
  std::vector<Entry> entries;
  fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& p : manifest.at("points")) {
    if (!p.contains("power_kw_cm2") || !p.contains("map"))
      throw pk::config_error("manifest: each point needs 'power_kw_cm2' and 'map'");
    fs::path mp = base / p.at("map").get<std::string>();
    if (!fs::exists(mp))
      throw pk::config_error("manifest: map file '" + mp.string() +
                             "' does not exist (manifest/maps mismatch)");
    entries.push_back({p.at("power_kw_cm2").get<double>(), mp});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.power < b.power; });

  // Peak positions at the fixed angle for every power.
  double theta_used = theta;
  std::vector<std::array<double, 3>> centers;  // power, E_lpb, E_upb
  for (const Entry& e : entries) {
    pk::SpectralMap map = pk::read_map_csv(e.map_path);
    std::size_t it = 0;
    for (std::size_t i = 1; i < map.n_theta(); ++i)
      if (std::abs(map.thetas_deg[i] - theta) < std::abs(map.thetas_deg[it] - theta))
        it = i;
    theta_used = map.thetas_deg[it];
    std::span<const double> row(map.intensities.data() + it * map.n_energy(),
                                map.n_energy());
    pk::LorentzianFit lf =
        pk::fit_lorentzian(map.energies_ev, row, 2, std::nullopt, cfg.fit.options);
    if (!lf.fit.converged)
      throw pk::diagnostic_error("power series: peak fit failed for " +
                                 e.map_path.string());
    centers.push_back({e.power, lf.peaks[0].center_ev, lf.peaks[1].center_ev});
  }

  std::vector<pk::PowerPoint> obs;
  for (const auto& c : centers)
    obs.push_back({c[0], pk::ev_to_mev(c[2] - centers[0][2]),
                   pk::ev_to_mev(c[1] - centers[0][1])});

  pk::PowerSeriesFit series = pk::fit_power_series(obs, cfg.dispersion, cfg.emitter,
                                                   cfg.coupling, theta_used,
                                                   cfg.fit.options);

  pk::OutputStamp stamp = make_stamp(cfg);
  std::ostringstream csv;
  csv << stamp.comment_lines()
      << "power_kw_cm2,delta_bic_meV,pred_upb_shift_meV,pred_lpb_shift_meV,"
         "obs_upb_shift_meV,obs_lpb_shift_meV,sum_rule_residual_meV\n";
  for (std::size_t i = 0; i < series.points.size(); ++i) {
    const pk::PowerPointFit& pt = series.points[i];
    csv << pk::format_double(pt.power_kw_cm2) << ',' << pk::format_double(pt.delta_bic_mev)
        << ',' << pk::format_double(pt.predicted.upb_mev) << ','
        << pk::format_double(pt.predicted.lpb_mev) << ','
        << pk::format_double(obs[i].upb_shift_mev) << ','
        << pk::format_double(obs[i].lpb_shift_mev) << ','
        << pk::format_double(pt.sum_rule_residual_mev) << '\n';
  }
  fs::path dir = cfg.output_dir;
  pk::write_text_atomic(dir / "power_series.csv", csv.str());
  std::cout << "power series: " << series.points.size() << " points at theta = "
            << theta_used << " deg -> " << (dir / "power_series.csv").string() << "\n";
  if (!series.converged) std::cout << "warning: " << series.diagnostics << "\n";
  return kExitOk;
}

int cmd_g2(const pk::RunConfig& cfg, const std::string& input, const std::string& kind) {
  pk::DelayTable table = pk::read_delay_csv(input);
  pk::G2Histogram hist;
  if (kind == "delays") {
    std::vector<double> delays;
    for (std::size_t i = 0; i < table.delays_ps.size(); ++i) {
      auto mult = static_cast<long>(std::llround(table.counts[i]));
      for (long k = 0; k < mult; ++k) delays.push_back(table.delays_ps[i]);
    }
    hist = pk::histogram_delays(delays, cfg.photonstats.bin_width_ps,
                                cfg.photonstats.window_ps);
  } else if (kind == "histogram") {
    if (table.delays_ps.size() < 2)
      throw pk::diagnostic_error("g2: histogram needs at least 2 bins");
    hist.bin_width_ps = table.delays_ps[1] - table.delays_ps[0];
    hist.delays_ps = table.delays_ps;
    hist.counts = table.counts;
    hist.validate();
  } else {
    throw pk::config_error("g2: --kind must be 'delays' or 'histogram'");
  }

  pk::G2Fit fit = pk::fit_g2(hist, cfg.fit.options);

  json out = fit_result_json(fit.fit, {"g2_0", "tau0_ps", "baseline"});
  out["_meta"] = meta_json(cfg);
  out["purity"] = fit.purity ? json(*fit.purity) : json();
  fs::path dir = cfg.output_dir;
  write_json_atomic(dir / "g2_fit.json", out);

  pk::OutputStamp stamp = make_stamp(cfg);
  std::ostringstream csv;
  csv << stamp.comment_lines() << "delay_ps,g2\n";
  for (double d : hist.delays_ps)
    csv << pk::format_double(d) << ',' << pk::format_double(pk::g2_model(d, fit.params))
        << '\n';
  pk::write_text_atomic(dir / "g2_curve.csv", csv.str());

  if (!fit.purity)
    std::cout << "purity: undetermined (no resolvable dip; " << fit.fit.diagnostics
              << ")\n";
  else if (*fit.purity)
    std::cout << "purity: single-photon emitter (g2(0) = " << fit.params.g2_0
              << " < 0.5)\n";
  else
    std::cout << "purity: not a single-photon emitter (g2(0) = " << fit.params.g2_0
              << " >= 0.5)\n";
  return kExitOk;
}

int cmd_check_coupling(double g_mev, double kappa_cav_mev, double kappa_spe_mev) {
  pk::CouplingCheck check = pk::strong_coupling_check(g_mev, kappa_cav_mev, kappa_spe_mev);
  std::cout << (check.strong ? "strong coupling: yes" : "strong coupling: no")
            << " (margin " << check.margin_mev << " meV, threshold |kappa_cav - kappa_spe|/2 = "
            << 0.5 * std::abs(kappa_cav_mev - kappa_spe_mev) << " meV)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "polaritonkit: coupled-oscillator model, angle-resolved PL synthesis and "
      "fitting for a single-photon emitter strongly coupled to a BIC metasurface "
      "cavity.\nOption precedence: command-line flags override --config file values; "
      "the seed falls back to POLARITONKIT_SEED, then to the built-in default."};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CliOverrides ov;
  app.add_option("--config", ov.config_path, "JSON configuration file");
  app.add_option("--seed", ov.seed, "RNG seed (overrides config)");
  app.add_option("--output-dir", ov.output_dir, "directory for output files");

  CLI::App* sim = app.add_subcommand("simulate",
                                     "synthesize an angle-resolved PL map and branch curves");
  sim->add_option("--g", ov.g_mev, "coupling strength, meV");
  sim->add_option("--kappa-spe", ov.kappa_spe_mev, "emitter linewidth, meV");
  sim->add_option("--e-spe", ov.e_spe_ev, "emitter ZPL energy, eV");
  sim->add_option("--e0", ov.e0_ev, "BIC band energy at normal incidence, eV");
  sim->add_option("--noise", ov.noise, "noise model: none|gaussian|poisson");
  sim->add_option("--noise-sigma", ov.noise_sigma_frac,
                  "gaussian sigma as a fraction of the map maximum");
  sim->add_option("--amplitude", ov.amplitude, "peak-height scale, counts");
  sim->add_option("--offset", ov.offset, "constant background, counts");
  sim->add_option("--theta-max", ov.theta_max_deg, "half-range of the angle grid, deg");
  sim->add_option("--theta-step", ov.theta_step_deg, "angle grid step, deg");

  CLI::App* fdisp = app.add_subcommand("fit-dispersion",
                                       "fit the BIC band model to a (theta, E, FWHM) trace");
  std::string fdisp_input;
  fdisp->add_option("--input", fdisp_input, "trace CSV (theta_deg,energy_eV,fwhm_meV)")
      ->required();

  CLI::App* fpol = app.add_subcommand(
      "fit-polariton", "extract branches from a map and fit the coupled-oscillator model");
  std::string fpol_input;
  fpol->add_option("--input", fpol_input, "map CSV (angle_deg,energy_eV,intensity)")
      ->required();
  fpol->add_option("--exclusion", ov.exclusion_halfwidth_deg,
                   "half-width of the dark-state angle exclusion, deg");

  CLI::App* pow = app.add_subcommand("power-series",
                                     "fit per-power cavity blueshifts from a set of maps");
  std::string pow_manifest;
  std::optional<double> pow_theta;
  pow->add_option("--manifest", pow_manifest,
                  "JSON manifest {theta_deg, points:[{power_kw_cm2, map}]}")
      ->required();
  pow->add_option("--theta", pow_theta, "extraction angle, deg (overrides manifest)");

  CLI::App* g2cmd = app.add_subcommand("g2", "fit the antibunching dip and classify purity");
  std::string g2_input, g2_kind = "histogram";
  g2cmd->add_option("--input", g2_input, "two-column CSV (delay_ps,count)")->required();
  g2cmd->add_option("--kind", g2_kind, "input kind: histogram (default) or delays");

  CLI::App* chk = app.add_subcommand("check-coupling",
                                     "evaluate the strong-coupling criterion");
  double chk_g = 0.0, chk_kcav = 0.0, chk_kspe = 0.0;
  chk->add_option("--g", chk_g, "coupling strength, meV")->required();
  chk->add_option("--kappa-cav", chk_kcav, "cavity loss, meV")->required();
  chk->add_option("--kappa-spe", chk_kspe, "emitter loss, meV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (chk->parsed()) return cmd_check_coupling(chk_g, chk_kcav, chk_kspe);
    pk::RunConfig cfg = load_config(ov);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (fdisp->parsed()) return cmd_fit_dispersion(cfg, fdisp_input);
    if (fpol->parsed()) return cmd_fit_polariton(cfg, fpol_input);
    if (pow->parsed()) return cmd_power_series(cfg, pow_manifest, pow_theta);
    if (g2cmd->parsed()) return cmd_g2(cfg, g2_input, g2_kind);
  } catch (const pk::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const pk::diagnostic_error& e) {
    std::cerr << "diagnostic: " << e.what() << "\n";
    return kExitDiagnostic;
  } catch (const pk::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiagnostic;
  }
  return kExitOk;
}
