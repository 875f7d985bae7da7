#pragma once

#include <cstdint>
#include <vector>

#include "qgs/rng.hpp"
#include "qgs/spectral.hpp"

namespace qgs {

// Pump and pair-spectrum parameters mapping pump power density to per-pulse
// pair statistics and to a sampling density over the two arm wavelengths.
//
// Arm naming: the spectrometer arm is the visible one (default 810 nm), the
// bucket arm is the near-infrared one behind the filter (default 1550 nm).
struct SourceModel {
  PumpSpec pump;
  double center_spect_nm = 810.0;
  double jsd_marginal_fwhm_nm = 25.0;
  // Conditional spread (FWHM, spectrometer-arm nm) of the spectrometer-arm
  // wavelength given the bucket-arm one; <= 0 selects the pump-bandwidth
  // value, convert_bandwidth(pump.bandwidth_fwhm_nm, lambda_p, center_spect).
  double correlation_width_nm = 0.0;
  double brightness_coeff = 0.01;  // pairs*mm^2 / (pulse*mW)

  double effective_correlation_width_nm() const;
  void validate() const;
};

// Discretized two-arm sampling density. density is row-major over
// (spect bin, bucket bin) in probability per nm^2; cdf holds cumulative cell
// masses for inverse-CDF sampling.
struct JointSpectralDensity {
  WavelengthGrid grid_spect;
  WavelengthGrid grid_bucket;
  std::vector<double> density;
  std::vector<double> cdf;

  double density_at(int i_spect, int j_bucket) const {
    return density[static_cast<std::size_t>(i_spect) * grid_bucket.n_bins + j_bucket];
  }
  double cell_mass(int i_spect, int j_bucket) const {
    return density_at(i_spect, j_bucket) * grid_spect.step_nm * grid_bucket.step_nm;
  }
};

enum class Arm { spect, bucket };

// Bucket-arm grid that covers the image of the spectrometer grid under the
// partner-wavelength map, padded for the conditional spread.
WavelengthGrid derive_bucket_grid(const SourceModel& model,
                                  const WavelengthGrid& grid_spect);

// Gaussian marginal on the spectrometer axis times, per column, a Gaussian
// on the bucket axis centered at the partner wavelength (energy
// anti-correlation). Throws ConfigError when more than 1% of the density
// mass falls outside the grids.
JointSpectralDensity build_jsd(const SourceModel& model,
                               const WavelengthGrid& grid_spect,
                               const WavelengthGrid& grid_bucket);

// mu = brightness_coeff * power_density; exactly linear.
double mean_pairs_per_pulse(double power_density_mw_mm2, const SourceModel& model);

// Poisson(mu) by single-uniform inversion; deterministic given the stream.
int sample_pair_count(double mu, RandomStream& rng);

struct PairSample {
  double lambda_spect_nm = 0.0;
  double lambda_bucket_nm = 0.0;
  int bin_spect = -1;
  int bin_bucket = -1;
};

// Inverse-CDF draw over the flattened cells, uniformly jittered within the
// cell on both axes.
PairSample sample_pair_wavelengths(const JointSpectralDensity& jsd, RandomStream& rng);

// Normalized marginal density on the requested axis.
Spectrum source_marginal(const JointSpectralDensity& jsd, Arm arm);

}  // namespace qgs
