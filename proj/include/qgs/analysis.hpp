#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qgs/detection.hpp"
#include "qgs/spectral.hpp"

namespace qgs {

struct CarPoint {
  double power_density = 0.0;
  double car = 0.0;
  double car_err = 0.0;  // independent-Poisson propagation
  std::uint64_t n_cc = 0;
  std::uint64_t n_acc = 0;
};

// car = total aligned / total shifted; err = car*sqrt(1/N_cc + 1/N_acc).
// Throws AnalysisError ("CAR unbounded") when there are no shifted counts.
CarPoint compute_car(const CoincidenceData& data);

struct ExpDecayFit {
  double A = 0.0;
  double P0 = 0.0;       // +inf when the tail does not decay
  double car_min = 0.0;  // A/e, by definition
  std::array<std::array<double, 2>, 2> covariance{};  // of (A, P0)
  bool decaying = true;
  int n_points_used = 0;
};

// Weighted least squares of ln(car) against power over points with
// power >= tail_start. Weights come from the relative CAR errors; if any
// point lacks an error the fit falls back to uniform weights.
ExpDecayFit fit_exp_decay(const std::vector<CarPoint>& points, double tail_start);

struct GhostOptions {
  bool subtract_accidentals = false;
  int sg_window = 11;  // < 3 disables smoothing
  int sg_order = 3;
  bool map_to_bucket_arm = false;
  double lambda_p_nm = 532.0;
};

// Aligned counts, optionally minus shifted counts (clamped at zero),
// smoothed and normalized; optionally remapped onto the bucket arm.
Spectrum reconstruct_ghost(const CoincidenceData& data, const GhostOptions& opts);

// Conservative rebinning of a density onto the partner-wavelength axis:
// bin edges are mapped through partner_wavelength and each bin's area is
// deposited by overlap, so total area is preserved exactly.
Spectrum map_spectrum_to_partner_axis(const Spectrum& s, double lambda_p_nm);

struct GaussianPeak {
  double amplitude = 0.0;
  double center_nm = 0.0;
  double sigma_nm = 0.0;
};

struct GaussianFitResult {
  double offset = 0.0;
  std::vector<GaussianPeak> peaks;  // ordered by center
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct FitInit {
  double offset = 0.0;
  std::vector<GaussianPeak> peaks;
};

// Model value and analytic gradient at x for the parameter layout
// [offset, (amplitude, center, sigma) per peak].
double gauss_peaks_eval(const std::vector<double>& params, double x);
std::vector<double> gauss_peaks_gradient(const std::vector<double>& params, double x);

struct GaussianFitOptions {
  std::optional<FitInit> init;
  // Keep the offset at its init value. Used when the spectrum carries no
  // additive background, e.g. fitting normalized densities.
  bool fix_offset = false;
  std::vector<double>* residual_trace = nullptr;  // accepted residual norms
};

// Damped least squares for offset + n_peaks Gaussians (shared offset).
// Damping grows when a step raises the residual and shrinks on acceptance;
// convergence on relative residual change < 1e-10 or step norm < 1e-12,
// capped at 500 iterations. Without an init, several deterministic starting
// points are tried (largest local maxima of the smoothed spectrum, split and
// stacked variants) and the lowest final residual wins; coincident init
// centers are split by one bin.
GaussianFitResult fit_gaussians(const Spectrum& s, int n_peaks,
                                const GaussianFitOptions& opts);
GaussianFitResult fit_gaussians(const Spectrum& s, int n_peaks,
                                const std::optional<FitInit>& init = std::nullopt,
                                std::vector<double>* residual_trace = nullptr);

// (c2 - c1) / (sigma1 + sigma2) over the two fitted peaks.
double resolving_power(const GaussianFitResult& fit);

struct RPMap {
  std::vector<double> separations_nm;
  std::vector<double> noise_fractions;
  std::vector<double> rp;            // row-major [separation][fraction]; NaN = no fit
  std::vector<std::uint8_t> resolvable;  // rp > 1
  int n_nonconverged = 0;

  double rp_at(std::size_t i_sep, std::size_t j_frac) const {
    return rp[i_sep * noise_fractions.size() + j_frac];
  }
};

// For every (separation, fraction): two equal Gaussians of width
// peak_fwhm_nm centered +-separation/2 around the source peak, mixed with
// the source by mix_colored, then refitted with two Gaussians.
RPMap sweep_resolving_power(const std::vector<double>& separations_nm,
                            const std::vector<double>& noise_fractions,
                            double peak_fwhm_nm, const Spectrum& source,
                            const WavelengthGrid& grid);

}  // namespace qgs
