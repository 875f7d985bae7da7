#pragma once

#include <vector>

namespace qgs {

inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2*sqrt(2*ln 2)

inline double fwhm_to_sigma(double fwhm) { return fwhm / kFwhmPerSigma; }
inline double sigma_to_fwhm(double sigma) { return sigma * kFwhmPerSigma; }

// Uniform wavelength axis; bin i is centered at start_nm + i*step_nm.
struct WavelengthGrid {
  double start_nm = 0.0;
  double step_nm = 1.0;
  int n_bins = 2;

  WavelengthGrid() = default;
  WavelengthGrid(double start, double step, int n);

  double center(int i) const { return start_nm + i * step_nm; }
  double lo_edge(int i) const { return start_nm + (i - 0.5) * step_nm; }
  double hi_edge(int i) const { return start_nm + (i + 0.5) * step_nm; }
  double min_edge() const { return lo_edge(0); }
  double max_edge() const { return hi_edge(n_bins - 1); }
  double span_nm() const { return step_nm * n_bins; }

  // index of the bin containing lambda, -1 when outside the axis
  int bin_of(double lambda_nm) const;

  bool same_as(const WavelengthGrid& o, double rel_tol = 1e-9) const;
};

enum class SpectrumKind { counts, density };

// Wavelength-binned non-negative values; the common currency of the toolkit.
struct Spectrum {
  WavelengthGrid grid;
  std::vector<double> values;
  SpectrumKind kind = SpectrumKind::counts;

  Spectrum() = default;
  Spectrum(WavelengthGrid g, std::vector<double> v,
           SpectrumKind k = SpectrumKind::counts);

  double area() const;  // sum(values) * step
  int argmax() const;   // first bin holding the maximum value
};

struct PumpSpec {
  double lambda_p_nm = 532.0;
  double bandwidth_fwhm_nm = 0.23;
  double rep_rate_hz = 4.0e7;

  void validate() const;
};

// Wavelength of the partner photon under energy conservation:
// 1/lambda_partner = 1/lambda_pump - 1/lambda.
double partner_wavelength(double lambda_nm, double lambda_p_nm);

// First-order width conversion between the two arms,
// |d lambda_to / d lambda_from| = (lambda_to / lambda_from)^2.
double convert_bandwidth(double delta_nm, double lambda_from_nm, double lambda_to_nm);

// Savitzky-Golay smoothing. Interior bins use the standard symmetric kernel;
// the first and last (window-1)/2 bins are fitted on the one-sided truncated
// window (polynomial degree capped by the available points). Output is
// clamped at zero since spectra are count-like.
Spectrum savgol_smooth(const Spectrum& s, int window, int order);

// Full width at half maximum via linear interpolation of the half-max
// crossings nearest the (first) global maximum bin.
double empirical_fwhm(const Spectrum& s);

// Rescale so that sum(values)*step == 1; result kind is density.
Spectrum normalize_area(const Spectrum& s);

// Unit-area Gaussian sampled at the bin centers.
Spectrum gaussian_spectrum(const WavelengthGrid& grid, double center_nm, double fwhm_nm);

}  // namespace qgs
