#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgs/detection.hpp"
#include "qgs/source.hpp"

namespace qgs {

struct AnalysisConfig {
  int sg_window = 11;
  int sg_order = 3;
  double tail_start = 20.0;          // mW/mm^2
  double car_min_threshold = 6.5;
  std::vector<double> separations_nm = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> noise_fractions = {0.0,  0.05, 0.1,  0.15, 0.2, 0.25,
                                         0.3,  0.35, 0.4,  0.45, 0.5};
  double peak_fwhm_nm = 2.8;
};

struct RunConfig {
  SourceModel source;
  DetectionConfig detection;
  std::vector<double> power_densities = {0.1,  0.2,  0.4,  0.8,   1.6,  3.2,
                                         6.4,  12.8, 25.6, 31.58, 51.2, 100.0};
  std::uint64_t n_gates = 1000000;
  std::uint64_t seed = 42;
  AnalysisConfig analysis;
};

// Strict parse: unknown keys are rejected, every violated constraint is
// reported with its key path. An empty document yields the defaults.
RunConfig parse_config(const std::string& text);

RunConfig load_config_file(const std::string& path);

// Fully-resolved configuration; parse_config(dump) round-trips.
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace qgs
