#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "polaritonkit/errors.hpp"
#include "polaritonkit/fitting.hpp"
#include "polaritonkit/photonstats.hpp"
#include "polaritonkit/spectra.hpp"
#include "polaritonkit/version.hpp"

namespace polaritonkit {

// Full-precision decimal rendering; 17 significant digits round-trip a
// double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Header comment stamped into every output file: tool version, config hash,
// seed. Deliberately contains nothing time-dependent so re-runs are
// byte-identical.
struct OutputStamp {
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string comment_lines() const {
    std::ostringstream out;
    out << "# polaritonkit " << kVersion << "\n";
    out << "# config_hash=" << config_hash << "\n";
    out << "# seed=" << seed << "\n";
    return out.str();
  }
};

// Atomic write: temp file in the target directory, then rename.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory '" + dir.string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw io_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename '" + tmp.string() + "' to '" + path.string() +
                         "': " + ec.message());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw diagnostic_error("malformed number '" + s + "' in " + where);
  }
}

// Generic CSV table: '#' comment lines (returned as metadata when they look
// like '# meta k=v'), one header row, numeric cells.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> metadata;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::string text = read_text(path);
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view meta_tag = "# meta ";
      if (line.rfind(meta_tag, 0) == 0) {
        std::string kv = line.substr(meta_tag.size());
        auto eq = kv.find('=');
        if (eq != std::string::npos)
          table.metadata[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    if (!header_seen) {
      table.columns = split_csv_line(line);
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != table.columns.size())
      throw diagnostic_error("row with " + std::to_string(cells.size()) +
                             " cells (expected " + std::to_string(table.columns.size()) +
                             ") in " + path.string());
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(parse_double(c, path.string()));
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw diagnostic_error("no header row in " + path.string());
  return table;
}

}  // namespace detail

// --- SpectralMap CSV: long form, one row per (theta, energy) cell ---------

inline std::string map_to_csv(const SpectralMap& map, const OutputStamp& stamp) {
  std::ostringstream out;
  out << stamp.comment_lines();
  for (const auto& [k, v] : map.metadata) out << "# meta " << k << "=" << v << "\n";
  out << "angle_deg,energy_eV,intensity\n";
  for (std::size_t it = 0; it < map.n_theta(); ++it)
    for (std::size_t ie = 0; ie < map.n_energy(); ++ie)
      out << format_double(map.thetas_deg[it]) << ',' << format_double(map.energies_ev[ie])
          << ',' << format_double(map.at(it, ie)) << '\n';
  return out.str();
}

inline void write_map_csv(const std::filesystem::path& path, const SpectralMap& map,
                          const OutputStamp& stamp) {
  write_text_atomic(path, map_to_csv(map, stamp));
}

inline SpectralMap read_map_csv(const std::filesystem::path& path) {
  detail::CsvTable table = detail::read_csv(path);
  if (table.columns != std::vector<std::string>{"angle_deg", "energy_eV", "intensity"})
    throw diagnostic_error("unexpected map columns in " + path.string());
  SpectralMap map;
  map.metadata = table.metadata;
  for (const auto& row : table.rows) {
    if (map.thetas_deg.empty() || row[0] != map.thetas_deg.back())
      map.thetas_deg.push_back(row[0]);
    if (map.thetas_deg.size() == 1) map.energies_ev.push_back(row[1]);
    map.intensities.push_back(row[2]);
  }
  map.validate();
  return map;
}

// --- Branch curve / trace CSVs ---------------------------------------------

inline std::string branches_to_csv(const BranchCurves& curves, const OutputStamp& stamp) {
  std::ostringstream out;
  out << stamp.comment_lines();
  out << "theta_deg,branch,energy_eV,fwhm_meV,w_bic,w_spe\n";
  auto emit = [&](const PolaritonBranch& b) {
    out << format_double(b.theta_deg) << ',' << to_string(b.branch_id) << ','
        << format_double(b.energy_ev) << ',' << format_double(b.fwhm_mev) << ','
        << format_double(b.w_bic) << ',' << format_double(b.w_spe) << '\n';
  };
  for (const PolaritonBranch& b : curves.upb) emit(b);
  for (const PolaritonBranch& b : curves.lpb) emit(b);
  return out.str();
}

inline void write_branches_csv(const std::filesystem::path& path,
                               const BranchCurves& curves, const OutputStamp& stamp) {
  write_text_atomic(path, branches_to_csv(curves, stamp));
}

inline void write_trace_csv(const std::filesystem::path& path, const BranchTrace& trace,
                            const OutputStamp& stamp) {
  std::ostringstream out;
  out << stamp.comment_lines();
  out << "theta_deg,energy_eV,fwhm_meV,amplitude\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << format_double(trace.theta_deg[i]) << ',' << format_double(trace.energy_ev[i])
        << ',' << format_double(trace.fwhm_mev[i]) << ','
        << format_double(i < trace.amplitude.size() ? trace.amplitude[i] : 0.0) << '\n';
  write_text_atomic(path, out.str());
}

// Trace input: theta_deg,energy_eV,fwhm_meV with an optional amplitude
// column.
inline BranchTrace read_trace_csv(const std::filesystem::path& path) {
  detail::CsvTable table = detail::read_csv(path);
  if (table.columns.size() < 3 || table.columns[0] != "theta_deg" ||
      table.columns[1] != "energy_eV" || table.columns[2] != "fwhm_meV")
    throw diagnostic_error("unexpected trace columns in " + path.string() +
                           " (want theta_deg,energy_eV,fwhm_meV[,amplitude])");
  BranchTrace trace;
  for (const auto& row : table.rows)
    trace.push(row[0], row[1], row[2], row.size() > 3 ? row[3] : 0.0);
  trace.validate();
  return trace;
}

// --- g2 delay / histogram CSVs ---------------------------------------------

inline void write_histogram_csv(const std::filesystem::path& path, const G2Histogram& hist,
                                const OutputStamp& stamp) {
  std::ostringstream out;
  out << stamp.comment_lines();
  out << "delay_ps,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i)
    out << format_double(hist.delays_ps[i]) << ',' << format_double(hist.counts[i]) << '\n';
  write_text_atomic(path, out.str());
}

// Two-column (delay_ps, count) file. For histograms the rows are bins; for
// delay lists each row is a sample with its multiplicity (usually 1).
struct DelayTable {
  std::vector<double> delays_ps;
  std::vector<double> counts;
};

inline DelayTable read_delay_csv(const std::filesystem::path& path) {
  detail::CsvTable table = detail::read_csv(path);
  if (table.columns != std::vector<std::string>{"delay_ps", "count"})
    throw diagnostic_error("unexpected columns in " + path.string() +
                           " (want delay_ps,count)");
  DelayTable out;
  for (const auto& row : table.rows) {
    out.delays_ps.push_back(row[0]);
    out.counts.push_back(row[1]);
  }
  return out;
}

}  // namespace polaritonkit
