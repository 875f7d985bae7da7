#pragma once

#include <stdexcept>

namespace qgs {

// Error families; the CLI maps them onto exit codes
// (config = 1, simulation = 2, analysis = 3, io = 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qgs
