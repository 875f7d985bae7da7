#include "qgs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "qgs/errors.hpp"

namespace qgs {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& known) {
  if (!j.is_object())
    throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(key + ": must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& j, const std::string& key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(key + ": must be an integer");
  return v.get<std::int64_t>();
}

std::vector<double> get_number_array(const json& j, const std::string& key,
                                     std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError(key + ": must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError(key + "[" + std::to_string(i) + "]: must be a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError(key + ": " + constraint);
}

PumpSpec parse_pump(const json& j) {
  reject_unknown(j, "source.pump", {"lambda_p_nm", "bandwidth_fwhm_nm", "rep_rate_hz"});
  PumpSpec p;
  p.lambda_p_nm = get_number(j, "lambda_p_nm", p.lambda_p_nm);
  p.bandwidth_fwhm_nm = get_number(j, "bandwidth_fwhm_nm", p.bandwidth_fwhm_nm);
  p.rep_rate_hz = get_number(j, "rep_rate_hz", p.rep_rate_hz);
  require(p.lambda_p_nm > 0, "source.pump.lambda_p_nm", "must be > 0");
  require(p.bandwidth_fwhm_nm > 0, "source.pump.bandwidth_fwhm_nm", "must be > 0");
  require(p.rep_rate_hz > 0, "source.pump.rep_rate_hz", "must be > 0");
  return p;
}

SourceModel parse_source(const json& j) {
  reject_unknown(j, "source",
                 {"pump", "center_spect_nm", "jsd_marginal_fwhm_nm",
                  "correlation_width_nm", "brightness_coeff"});
  SourceModel m;
  if (j.contains("pump")) m.pump = parse_pump(j.at("pump"));
  m.center_spect_nm = get_number(j, "center_spect_nm", m.center_spect_nm);
  m.jsd_marginal_fwhm_nm = get_number(j, "jsd_marginal_fwhm_nm", m.jsd_marginal_fwhm_nm);
  if (j.contains("correlation_width_nm") && !j.at("correlation_width_nm").is_null()) {
    m.correlation_width_nm = get_number(j, "correlation_width_nm", 0.0);
    require(m.correlation_width_nm > 0, "source.correlation_width_nm", "must be > 0");
  }
  m.brightness_coeff = get_number(j, "brightness_coeff", m.brightness_coeff);
  require(m.center_spect_nm > m.pump.lambda_p_nm, "source.center_spect_nm",
          "must exceed the pump wavelength");
  require(m.jsd_marginal_fwhm_nm > 0, "source.jsd_marginal_fwhm_nm", "must be > 0");
  require(m.brightness_coeff > 0, "source.brightness_coeff", "must be > 0");
  return m;
}

DetectorModel parse_detector(const json& j, const std::string& where,
                             const DetectorModel& defaults) {
  reject_unknown(j, where,
                 {"efficiency", "dark_prob_per_gate", "dead_time_gates", "afterpulse_prob"});
  DetectorModel d = defaults;
  d.efficiency = get_number(j, "efficiency", d.efficiency);
  d.dark_prob_per_gate = get_number(j, "dark_prob_per_gate", d.dark_prob_per_gate);
  d.dead_time_gates =
      static_cast<int>(get_integer(j, "dead_time_gates", d.dead_time_gates));
  d.afterpulse_prob = get_number(j, "afterpulse_prob", d.afterpulse_prob);
  require(d.efficiency > 0 && d.efficiency <= 1, where + ".efficiency",
          "must be in (0,1]");
  require(d.dark_prob_per_gate >= 0 && d.dark_prob_per_gate < 1,
          where + ".dark_prob_per_gate", "must be in [0,1)");
  require(d.dead_time_gates >= 0, where + ".dead_time_gates", "must be >= 0");
  require(d.afterpulse_prob >= 0 && d.afterpulse_prob < 1, where + ".afterpulse_prob",
          "must be in [0,1)");
  return d;
}

FilterProfile parse_filter(const json& j) {
  reject_unknown(j, "detection.filter",
                 {"center_nm", "fwhm_nm", "shape", "peak_transmission"});
  FilterProfile f;
  f.center_nm = get_number(j, "center_nm", f.center_nm);
  f.fwhm_nm = get_number(j, "fwhm_nm", f.fwhm_nm);
  f.peak_transmission = get_number(j, "peak_transmission", f.peak_transmission);
  if (j.contains("shape")) {
    const json& v = j.at("shape");
    if (!v.is_string()) throw ConfigError("detection.filter.shape: must be a string");
    const std::string s = v.get<std::string>();
    if (s == "gaussian")
      f.shape = FilterShape::gaussian;
    else if (s == "tophat")
      f.shape = FilterShape::tophat;
    else
      throw ConfigError("detection.filter.shape: must be 'gaussian' or 'tophat'");
  }
  require(f.center_nm > 0, "detection.filter.center_nm", "must be > 0");
  require(f.fwhm_nm > 0, "detection.filter.fwhm_nm", "must be > 0");
  require(f.peak_transmission > 0 && f.peak_transmission <= 1,
          "detection.filter.peak_transmission", "must be in (0,1]");
  return f;
}

WavelengthGrid parse_grid(const json& j) {
  reject_unknown(j, "detection.spect_grid", {"start_nm", "step_nm", "n_bins"});
  WavelengthGrid defaults{778.0, 0.25, 257};
  const double start = get_number(j, "start_nm", defaults.start_nm);
  const double step = get_number(j, "step_nm", defaults.step_nm);
  const int n = static_cast<int>(get_integer(j, "n_bins", defaults.n_bins));
  require(step > 0, "detection.spect_grid.step_nm", "must be > 0");
  require(n >= 2, "detection.spect_grid.n_bins", "must be >= 2");
  return WavelengthGrid(start, step, n);
}

DetectionConfig parse_detection(const json& j) {
  reject_unknown(j, "detection", {"bucket", "spect", "filter", "spect_grid", "shift_gates"});
  DetectionConfig d;
  if (j.contains("bucket")) d.bucket = parse_detector(j.at("bucket"), "detection.bucket", d.bucket);
  if (j.contains("spect")) d.spect = parse_detector(j.at("spect"), "detection.spect", d.spect);
  if (j.contains("filter")) d.filter = parse_filter(j.at("filter"));
  if (j.contains("spect_grid")) d.spect_grid = parse_grid(j.at("spect_grid"));
  d.shift_gates = static_cast<int>(get_integer(j, "shift_gates", d.shift_gates));
  require(d.shift_gates >= 1, "detection.shift_gates", "must be >= 1");
  require(d.shift_gates <= 4096, "detection.shift_gates", "must be <= 4096");
  return d;
}

AnalysisConfig parse_analysis(const json& j) {
  reject_unknown(j, "analysis",
                 {"sg_window", "sg_order", "tail_start", "car_min_threshold",
                  "separations_nm", "noise_fractions", "peak_fwhm_nm"});
  AnalysisConfig a;
  a.sg_window = static_cast<int>(get_integer(j, "sg_window", a.sg_window));
  a.sg_order = static_cast<int>(get_integer(j, "sg_order", a.sg_order));
  a.tail_start = get_number(j, "tail_start", a.tail_start);
  a.car_min_threshold = get_number(j, "car_min_threshold", a.car_min_threshold);
  a.separations_nm = get_number_array(j, "separations_nm", a.separations_nm);
  a.noise_fractions = get_number_array(j, "noise_fractions", a.noise_fractions);
  a.peak_fwhm_nm = get_number(j, "peak_fwhm_nm", a.peak_fwhm_nm);
  require(a.sg_window % 2 == 1, "analysis.sg_window", "must be odd");
  require(a.sg_window >= 3, "analysis.sg_window", "must be >= 3");
  require(a.sg_order >= 0, "analysis.sg_order", "must be >= 0");
  require(a.sg_window >= a.sg_order + 2, "analysis.sg_window", "must be >= sg_order + 2");
  require(a.tail_start >= 0, "analysis.tail_start", "must be >= 0");
  require(a.car_min_threshold > 0, "analysis.car_min_threshold", "must be > 0");
  for (std::size_t i = 0; i < a.separations_nm.size(); ++i)
    require(a.separations_nm[i] > 0,
            "analysis.separations_nm[" + std::to_string(i) + "]", "must be > 0");
  for (std::size_t i = 0; i < a.noise_fractions.size(); ++i)
    require(a.noise_fractions[i] >= 0 && a.noise_fractions[i] <= 1,
            "analysis.noise_fractions[" + std::to_string(i) + "]",
            "must be in [0,1]");
  require(a.peak_fwhm_nm > 0, "analysis.peak_fwhm_nm", "must be > 0");
  return a;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::string trimmed = text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
  json j;
  if (trimmed.empty()) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  reject_unknown(j, "config",
                 {"source", "detection", "power_densities", "n_gates", "seed", "analysis"});
  RunConfig cfg;
  if (j.contains("source")) cfg.source = parse_source(j.at("source"));
  if (j.contains("detection")) cfg.detection = parse_detection(j.at("detection"));
  cfg.power_densities = get_number_array(j, "power_densities", cfg.power_densities);
  for (std::size_t i = 0; i < cfg.power_densities.size(); ++i)
    require(cfg.power_densities[i] >= 0,
            "power_densities[" + std::to_string(i) + "]", "must be >= 0");
  const std::int64_t ng = get_integer(j, "n_gates", static_cast<std::int64_t>(cfg.n_gates));
  require(ng >= 1, "n_gates", "must be >= 1");
  cfg.n_gates = static_cast<std::uint64_t>(ng);
  const std::int64_t sd = get_integer(j, "seed", static_cast<std::int64_t>(cfg.seed));
  require(sd >= 0, "seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(sd);
  if (j.contains("analysis")) cfg.analysis = parse_analysis(j.at("analysis"));

  // cross-checks the engine relies on
  const double sig_m = fwhm_to_sigma(cfg.source.jsd_marginal_fwhm_nm);
  require(cfg.detection.spect_grid.min_edge() <= cfg.source.center_spect_nm - 3 * sig_m &&
              cfg.detection.spect_grid.max_edge() >= cfg.source.center_spect_nm + 3 * sig_m,
          "detection.spect_grid", "must cover the source marginal +-3 sigma");
  require(cfg.detection.spect_grid.min_edge() > cfg.source.pump.lambda_p_nm,
          "detection.spect_grid.start_nm", "must lie above the pump wavelength");
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json j;
  j["source"] = {
      {"pump",
       {{"lambda_p_nm", cfg.source.pump.lambda_p_nm},
        {"bandwidth_fwhm_nm", cfg.source.pump.bandwidth_fwhm_nm},
        {"rep_rate_hz", cfg.source.pump.rep_rate_hz}}},
      {"center_spect_nm", cfg.source.center_spect_nm},
      {"jsd_marginal_fwhm_nm", cfg.source.jsd_marginal_fwhm_nm},
      {"correlation_width_nm", cfg.source.effective_correlation_width_nm()},
      {"brightness_coeff", cfg.source.brightness_coeff}};
  auto det = [](const DetectorModel& d) {
    return json{{"efficiency", d.efficiency},
                {"dark_prob_per_gate", d.dark_prob_per_gate},
                {"dead_time_gates", d.dead_time_gates},
                {"afterpulse_prob", d.afterpulse_prob}};
  };
  j["detection"] = {
      {"bucket", det(cfg.detection.bucket)},
      {"spect", det(cfg.detection.spect)},
      {"filter",
       {{"center_nm", cfg.detection.filter.center_nm},
        {"fwhm_nm", cfg.detection.filter.fwhm_nm},
        {"shape", cfg.detection.filter.shape == FilterShape::tophat ? "tophat" : "gaussian"},
        {"peak_transmission", cfg.detection.filter.peak_transmission}}},
      {"spect_grid",
       {{"start_nm", cfg.detection.spect_grid.start_nm},
        {"step_nm", cfg.detection.spect_grid.step_nm},
        {"n_bins", cfg.detection.spect_grid.n_bins}}},
      {"shift_gates", cfg.detection.shift_gates}};
  j["power_densities"] = cfg.power_densities;
  j["n_gates"] = cfg.n_gates;
  j["seed"] = cfg.seed;
  j["analysis"] = {{"sg_window", cfg.analysis.sg_window},
                   {"sg_order", cfg.analysis.sg_order},
                   {"tail_start", cfg.analysis.tail_start},
                   {"car_min_threshold", cfg.analysis.car_min_threshold},
                   {"separations_nm", cfg.analysis.separations_nm},
                   {"noise_fractions", cfg.analysis.noise_fractions},
                   {"peak_fwhm_nm", cfg.analysis.peak_fwhm_nm}};
  return j;
}

}  // namespace qgs
