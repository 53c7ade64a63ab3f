#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "polaritonkit/config.hpp"
#include "polaritonkit/io.hpp"

using namespace polaritonkit;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "polaritonkit_io_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults and round trip", "[config_io]") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.dispersion.e0_ev == 2.107);
  CHECK(cfg.emitter.kappa_spe_mev == 0.5);
  CHECK(cfg.coupling.g_mev == 2.0);
  CHECK(cfg.energy_center_ev() == cfg.dispersion.e0_ev);

  RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("config parsing", "[config_io]") {
  SECTION("unknown keys are rejected by name") {
    json j = {{"spectra", {{"amplitudeX", 5.0}}}};
    try {
      RunConfig::from_json(j);
      FAIL("expected config_error");
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find("spectra.amplitudeX") != std::string::npos);
    }
  }
  SECTION("top-level unknown key") {
    CHECK_THROWS_AS(RunConfig::from_json(json{{"sede", 1}}), config_error);
  }
  SECTION("type errors name the key") {
    json j = {{"coupling", {{"g_mev", "two"}}}};
    try {
      RunConfig::from_json(j);
      FAIL("expected config_error");
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find("coupling.g_mev") != std::string::npos);
    }
  }
  SECTION("out-of-range values are config errors") {
    CHECK_THROWS_AS(RunConfig::from_json(json{{"coupling", {{"g_mev", -1.0}}}}),
                    config_error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"spectra", {{"noise", "sometimes"}}}}),
                    config_error);
  }
  SECTION("alpha units flag") {
    RunConfig cfg =
        RunConfig::from_json(json{{"dispersion", {{"alpha_units", "eV"}}}});
    CHECK(cfg.dispersion.alpha_units == AlphaUnits::ev_um2);
    CHECK_THROWS_AS(
        RunConfig::from_json(json{{"dispersion", {{"alpha_units", "joule"}}}}),
        config_error);
  }
  SECTION("lambda_ref follows an overridden e0 unless pinned") {
    RunConfig cfg = RunConfig::from_json(json{{"dispersion", {{"e0_ev", 2.0}}}});
    CHECK(cfg.dispersion.lambda_ref_um == constants::hc_ev_um / 2.0);
    RunConfig pinned = RunConfig::from_json(
        json{{"dispersion", {{"e0_ev", 2.0}, {"lambda_ref_um", 0.6}}}});
    CHECK(pinned.dispersion.lambda_ref_um == 0.6);
  }
}

TEST_CASE("number formatting round-trips doubles", "[config_io]") {
  for (double v : {0.0, 1.0, -2.1074561233351e-7, 3.918967618507945, 1e300, 1.0 / 3.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("fnv1a hash is stable", "[config_io]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_hex(fnv1a64("")) == "cbf29ce484222325");
}

TEST_CASE("map CSV round trip is bit exact", "[config_io]") {
  SynthModel model;
  model.bic = BicDispersionParams::tio2_metasurface();
  model.emitter = EmitterParams{2.106, 0.5};
  model.coupling = CouplingParams{2.0};
  std::vector<double> thetas = symmetric_theta_grid(2.0, 0.5);
  std::vector<double> energies = energy_grid(2.107, 5.0, 0.5);
  SpectralMap map = synth_map(model, thetas, energies, {NoiseKind::gaussian, 0.01}, 11);

  fs::path path = temp_dir() / "map_roundtrip.csv";
  write_map_csv(path, map, OutputStamp{"deadbeef", 11});
  SpectralMap back = read_map_csv(path);
  CHECK(back.thetas_deg == map.thetas_deg);
  CHECK(back.energies_ev == map.energies_ev);
  CHECK(back.intensities == map.intensities);
  CHECK(back.metadata.at("seed") == "11");

  std::string text = read_text(path);
  CHECK(text.find("# polaritonkit") == 0);
  CHECK(text.find("# config_hash=deadbeef") != std::string::npos);
  CHECK(text.find("# seed=11") != std::string::npos);
  CHECK(text.find("angle_deg,energy_eV,intensity") != std::string::npos);
}

TEST_CASE("trace CSV round trip", "[config_io]") {
  BranchTrace trace;
  trace.push(-3.0, 2.1001, 4.25, 100.0);
  trace.push(-1.0, 2.1054321, 1.0 / 3.0, 50.0);
  trace.push(2.0, 2.10999, 2.5, 75.0);
  fs::path path = temp_dir() / "trace_roundtrip.csv";
  write_trace_csv(path, trace, OutputStamp{"00", 1});
  BranchTrace back = read_trace_csv(path);
  CHECK(back.theta_deg == trace.theta_deg);
  CHECK(back.energy_ev == trace.energy_ev);
  CHECK(back.fwhm_mev == trace.fwhm_mev);
  CHECK(back.amplitude == trace.amplitude);
}

TEST_CASE("malformed inputs are diagnostics, missing files are io errors",
          "[config_io]") {
  fs::path dir = temp_dir();
  CHECK_THROWS_AS(read_map_csv(dir / "does_not_exist.csv"), io_error);

  fs::path bad = dir / "bad_trace.csv";
  write_text_atomic(bad, "theta_deg,energy_eV,fwhm_meV\n1.0,2.1\n");
  CHECK_THROWS_AS(read_trace_csv(bad), diagnostic_error);

  fs::path bad2 = dir / "bad_number.csv";
  write_text_atomic(bad2, "theta_deg,energy_eV,fwhm_meV\n1.0,2.1,abc\n");
  CHECK_THROWS_AS(read_trace_csv(bad2), diagnostic_error);
}

TEST_CASE("atomic writes leave no temp files", "[config_io]") {
  fs::path dir = temp_dir();
  fs::path path = dir / "atomic.txt";
  write_text_atomic(path, "first\n");
  write_text_atomic(path, "second\n");
  CHECK(read_text(path) == "second\n");
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}
