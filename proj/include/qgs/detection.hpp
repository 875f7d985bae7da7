#pragma once

#include <cstdint>
#include <vector>

#include "qgs/rng.hpp"
#include "qgs/source.hpp"
#include "qgs/spectral.hpp"

namespace qgs {

enum class FilterShape { gaussian, tophat };

struct FilterProfile {
  double center_nm = 1550.0;
  double fwhm_nm = 10.0;
  FilterShape shape = FilterShape::gaussian;
  double peak_transmission = 0.9;

  void validate() const;
};

double filter_transmission(const FilterProfile& f, double lambda_nm);

struct DetectorModel {
  double efficiency = 0.9;
  double dark_prob_per_gate = 1e-4;
  int dead_time_gates = 0;
  double afterpulse_prob = 0.0;

  void validate(const char* what) const;
};

struct DetectionConfig {
  DetectorModel bucket;
  DetectorModel spect;
  FilterProfile filter;  // bucket arm
  WavelengthGrid spect_grid{778.0, 0.25, 257};
  int shift_gates = 1;

  void validate() const;
};

enum class ClickCause : std::uint8_t { none, pair, dark, afterpulse };

// Root of a click. Afterpulse clicks keep the origin of the click that
// spawned them, so coincidences can be attributed through afterpulse chains.
struct ClickOrigin {
  ClickCause root = ClickCause::none;  // pair or dark
  std::uint64_t gate = 0;
  int pair_index = -1;
};

struct Click {
  bool fired = false;
  ClickCause cause = ClickCause::none;
  ClickOrigin origin{};
  int pixel = -1;  // spectrometer arm only
};

struct GateOutcome {
  Click bucket;
  Click spect;
};

// Dead-time / afterpulse state carried between consecutive gates.
struct DetectorState {
  int dead_remaining = 0;
  bool afterpulse_pending = false;
  ClickOrigin pending_origin{};
  int pending_pixel = -1;
};

struct ClassTally {
  std::uint64_t true_pair = 0;
  std::uint64_t multipair_accidental = 0;
  std::uint64_t dark_involved = 0;
  std::uint64_t afterpulse_involved = 0;

  std::uint64_t sum() const {
    return true_pair + multipair_accidental + dark_involved + afterpulse_involved;
  }
};

struct CoincidenceData {
  WavelengthGrid spect_grid;
  std::vector<std::uint64_t> aligned_hist;       // both arms click in the same gate
  std::vector<std::uint64_t> shifted_hist;       // spect at gate k, bucket at k+shift
  std::vector<std::uint64_t> singles_spect_hist;
  std::uint64_t singles_bucket = 0;
  std::uint64_t n_gates = 0;
  std::uint64_t seed = 0;
  double power_density_mw_mm2 = 0.0;
  int shift_gates = 1;
  ClassTally class_tally;

  std::uint64_t aligned_total() const;
  std::uint64_t shifted_total() const;
};

// One pump gate. Draw order is fixed per gate (pair samples and detection
// trials first, then darks, then afterpulse trials); dead-time masking is
// applied after all draws so that outcomes of other gates never shift.
// Within a gate the first accepted event wins: pair photons in emission
// order, then a pending afterpulse, then the dark count.
GateOutcome simulate_gate(const SourceModel& src, const JointSpectralDensity& jsd,
                          const DetectionConfig& cfg, double mu,
                          std::uint64_t gate_index, DetectorState& bucket_state,
                          DetectorState& spect_state, RandomStream& rng);

// Monte Carlo over n_gates pump gates. Gates are processed in fixed-size
// shards; each gate owns a counter-derived stream, shards re-establish
// detector state by replaying a short warm-up window from idle, and shifted
// pairs crossing a shard boundary are completed by recomputing the next
// shard's first gates under the same rule. Results are therefore
// byte-identical for any worker count. workers <= 0 selects the hardware
// concurrency.
CoincidenceData run_experiment(const SourceModel& src, const DetectionConfig& cfg,
                               double power_density_mw_mm2, std::uint64_t n_gates,
                               std::uint64_t seed, int workers = 1);

}  // namespace qgs
