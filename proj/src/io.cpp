#include "qgs/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qgs/errors.hpp"

namespace qgs {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string spectrum_to_csv(const Spectrum& s) {
  std::string out = "wavelength_nm,value\n";
  for (int i = 0; i < s.grid.n_bins; ++i) {
    out += format_double(s.grid.center(i));
    out += ',';
    out += format_double(s.values[i]);
    out += '\n';
  }
  return out;
}

void write_spectrum_csv(const std::string& path, const Spectrum& s) {
  write_text_file(path, spectrum_to_csv(s));
}

Spectrum read_spectrum_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spectrum file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "wavelength_nm,value")
    throw IoError(path + ": expected header 'wavelength_nm,value'");

  std::vector<double> w, v;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected two columns");
    try {
      w.push_back(std::stod(line.substr(0, comma)));
      v.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  if (w.size() < 2) throw IoError(path + ": need at least two bins");

  const int n = static_cast<int>(w.size());
  const double step = (w.back() - w.front()) / (n - 1);
  if (!(step > 0)) throw IoError(path + ": wavelengths must be increasing");
  for (int i = 0; i < n; ++i)
    if (std::abs(w[i] - (w.front() + i * step)) > 1e-6 * std::max(1.0, std::abs(w[i])))
      throw IoError(path + ": wavelength grid is not uniform");
  try {
    return Spectrum(WavelengthGrid(w.front(), step, n), std::move(v));
  } catch (const std::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

nlohmann::json coincidence_to_json(const CoincidenceData& d) {
  nlohmann::json j;
  j["n_gates"] = d.n_gates;
  j["seed"] = d.seed;
  j["power_density_mw_mm2"] = d.power_density_mw_mm2;
  j["shift_gates"] = d.shift_gates;
  j["grid"] = {{"start_nm", d.spect_grid.start_nm},
               {"step_nm", d.spect_grid.step_nm},
               {"n_bins", d.spect_grid.n_bins}};
  j["aligned"] = d.aligned_hist;
  j["shifted"] = d.shifted_hist;
  j["singles_spect"] = d.singles_spect_hist;
  j["singles_bucket"] = d.singles_bucket;
  j["class_tally"] = {{"true_pair", d.class_tally.true_pair},
                      {"multipair_accidental", d.class_tally.multipair_accidental},
                      {"dark_involved", d.class_tally.dark_involved},
                      {"afterpulse_involved", d.class_tally.afterpulse_involved}};
  return j;
}

void write_coincidence_json(const std::string& path, const CoincidenceData& d) {
  write_text_file(path, coincidence_to_json(d).dump(2) + "\n");
}

std::string jsd_to_csv(const JointSpectralDensity& jsd) {
  std::string out = "lambda_spect_nm,lambda_bucket_nm,density\n";
  for (int i = 0; i < jsd.grid_spect.n_bins; ++i)
    for (int j = 0; j < jsd.grid_bucket.n_bins; ++j) {
      out += format_double(jsd.grid_spect.center(i));
      out += ',';
      out += format_double(jsd.grid_bucket.center(j));
      out += ',';
      out += format_double(jsd.density_at(i, j));
      out += '\n';
    }
  return out;
}

void write_jsd_csv(const std::string& path, const JointSpectralDensity& jsd) {
  write_text_file(path, jsd_to_csv(jsd));
}

std::string rpmap_to_csv(const RPMap& map) {
  std::string out = "separation_nm,noise_fraction,rp,resolvable\n";
  for (std::size_t i = 0; i < map.separations_nm.size(); ++i)
    for (std::size_t j = 0; j < map.noise_fractions.size(); ++j) {
      const double rp = map.rp_at(i, j);
      out += format_double(map.separations_nm[i]);
      out += ',';
      out += format_double(map.noise_fractions[j]);
      out += ',';
      out += format_double(rp);
      out += ',';
      out += map.resolvable[i * map.noise_fractions.size() + j] ? "true" : "false";
      out += '\n';
    }
  return out;
}

void write_rpmap_csv(const std::string& path, const RPMap& map) {
  write_text_file(path, rpmap_to_csv(map));
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace qgs
