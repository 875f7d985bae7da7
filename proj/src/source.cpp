#include "qgs/source.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qgs/errors.hpp"

namespace qgs {

double SourceModel::effective_correlation_width_nm() const {
  if (correlation_width_nm > 0.0) return correlation_width_nm;
  return convert_bandwidth(pump.bandwidth_fwhm_nm, pump.lambda_p_nm, center_spect_nm);
}

void SourceModel::validate() const {
  pump.validate();
  if (!(center_spect_nm > pump.lambda_p_nm))
    throw std::invalid_argument("SourceModel: center_spect_nm must exceed the pump wavelength");
  if (!(jsd_marginal_fwhm_nm > 0.0))
    throw std::invalid_argument("SourceModel: jsd_marginal_fwhm_nm must be > 0");
  if (!(brightness_coeff > 0.0))
    throw std::invalid_argument("SourceModel: brightness_coeff must be > 0");
  // both arms must sit below the pump photon energy
  partner_wavelength(center_spect_nm, pump.lambda_p_nm);
}

WavelengthGrid derive_bucket_grid(const SourceModel& model,
                                  const WavelengthGrid& grid_spect) {
  const double lp = model.pump.lambda_p_nm;
  if (!(grid_spect.min_edge() > lp))
    throw ConfigError("spectrometer grid reaches below the pump wavelength");
  // partner map is decreasing: low spect edge -> high bucket edge
  const double hi = partner_wavelength(grid_spect.min_edge(), lp);
  const double lo = partner_wavelength(grid_spect.max_edge(), lp);
  // widest conditional spread on the bucket axis occurs at the largest
  // Jacobian, i.e. at the low spectrometer edge
  const double sig_c_spect = fwhm_to_sigma(model.effective_correlation_width_nm());
  const double jac_max = (hi / grid_spect.min_edge()) * (hi / grid_spect.min_edge());
  const double pad = 4.0 * sig_c_spect * jac_max;
  const int n = grid_spect.n_bins;
  const double step = (hi - lo + 2.0 * pad) / n;
  return WavelengthGrid(lo - pad + 0.5 * step, step, n);
}

JointSpectralDensity build_jsd(const SourceModel& model,
                               const WavelengthGrid& grid_spect,
                               const WavelengthGrid& grid_bucket) {
  model.validate();
  const double lp = model.pump.lambda_p_nm;
  const double c_spect = model.center_spect_nm;
  const double sig_m = fwhm_to_sigma(model.jsd_marginal_fwhm_nm);
  const double sig_c_spect = fwhm_to_sigma(model.effective_correlation_width_nm());

  if (grid_spect.min_edge() > c_spect - 3.0 * sig_m ||
      grid_spect.max_edge() < c_spect + 3.0 * sig_m)
    throw ConfigError("spectrometer grid must cover the source marginal +-3 sigma");
  {
    const double c_bucket = partner_wavelength(c_spect, lp);
    const double hi_b = partner_wavelength(c_spect - 3.0 * sig_m, lp);
    const double lo_b = partner_wavelength(c_spect + 3.0 * sig_m, lp);
    const double sig_cb = sig_c_spect * (c_bucket / c_spect) * (c_bucket / c_spect);
    if (grid_bucket.min_edge() > lo_b - 3.0 * sig_cb ||
        grid_bucket.max_edge() < hi_b + 3.0 * sig_cb)
      throw ConfigError("bucket grid must cover the partner band +-3 sigma");
  }

  const int ns = grid_spect.n_bins, nb = grid_bucket.n_bins;
  const double ds = grid_spect.step_nm, db = grid_bucket.step_nm;

  JointSpectralDensity jsd;
  jsd.grid_spect = grid_spect;
  jsd.grid_bucket = grid_bucket;
  jsd.density.assign(static_cast<std::size_t>(ns) * nb, 0.0);

  // exact per-cell Gaussian masses via the normal CDF; valid for any bin
  // width, including bins much wider or much narrower than the widths
  const auto phi = [](double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); };

  double total = 0.0;
  for (int i = 0; i < ns; ++i) {
    const double ls = grid_spect.center(i);
    if (!(ls > lp)) throw ConfigError("spectrometer grid reaches below the pump wavelength");
    const double gm = phi((grid_spect.hi_edge(i) - c_spect) / sig_m) -
                      phi((grid_spect.lo_edge(i) - c_spect) / sig_m);
    const double lb0 = partner_wavelength(ls, lp);
    const double sig_cb = sig_c_spect * (lb0 / ls) * (lb0 / ls);

    for (int j = 0; j < nb; ++j) {
      const double cm = phi((grid_bucket.hi_edge(j) - lb0) / sig_cb) -
                        phi((grid_bucket.lo_edge(j) - lb0) / sig_cb);
      const double cell = gm * cm;
      jsd.density[static_cast<std::size_t>(i) * nb + j] = cell;
      total += cell;
    }
  }

  if (total < 0.99)
    throw ConfigError("jsd grids leave more than 1% of the density mass uncovered");

  jsd.cdf.resize(jsd.density.size());
  double run = 0.0;
  const double cell_area = ds * db;
  for (std::size_t k = 0; k < jsd.density.size(); ++k) {
    jsd.density[k] /= total;          // cell masses, normalized
    run += jsd.density[k];
    jsd.cdf[k] = run;
    jsd.density[k] /= cell_area;      // store as density per nm^2
  }
  return jsd;
}

double mean_pairs_per_pulse(double power_density_mw_mm2, const SourceModel& model) {
  if (!(power_density_mw_mm2 >= 0.0))
    throw std::domain_error("mean_pairs_per_pulse: power density must be >= 0");
  return model.brightness_coeff * power_density_mw_mm2;
}

int sample_pair_count(double mu, RandomStream& rng) {
  if (!(mu >= 0.0)) throw std::domain_error("sample_pair_count: mu must be >= 0");
  const double u = rng.next_double();
  if (mu == 0.0) return 0;
  double p = std::exp(-mu);
  double cum = p;
  int k = 0;
  while (u >= cum && k < 1024) {
    ++k;
    p *= mu / k;
    cum += p;
  }
  return k;
}

PairSample sample_pair_wavelengths(const JointSpectralDensity& jsd, RandomStream& rng) {
  const double u = rng.next_double() * jsd.cdf.back();
  const auto it = std::upper_bound(jsd.cdf.begin(), jsd.cdf.end(), u);
  std::size_t k = static_cast<std::size_t>(it - jsd.cdf.begin());
  if (k >= jsd.cdf.size()) k = jsd.cdf.size() - 1;
  const int nb = jsd.grid_bucket.n_bins;
  PairSample ps;
  ps.bin_spect = static_cast<int>(k / nb);
  ps.bin_bucket = static_cast<int>(k % nb);
  ps.lambda_spect_nm = jsd.grid_spect.center(ps.bin_spect) +
                       (rng.next_double() - 0.5) * jsd.grid_spect.step_nm;
  ps.lambda_bucket_nm = jsd.grid_bucket.center(ps.bin_bucket) +
                        (rng.next_double() - 0.5) * jsd.grid_bucket.step_nm;
  return ps;
}

Spectrum source_marginal(const JointSpectralDensity& jsd, Arm arm) {
  const int ns = jsd.grid_spect.n_bins, nb = jsd.grid_bucket.n_bins;
  if (arm == Arm::spect) {
    std::vector<double> v(ns, 0.0);
    for (int i = 0; i < ns; ++i) {
      double s = 0.0;
      for (int j = 0; j < nb; ++j) s += jsd.density_at(i, j);
      v[i] = s * jsd.grid_bucket.step_nm;
    }
    return normalize_area(Spectrum(jsd.grid_spect, std::move(v), SpectrumKind::density));
  }
  std::vector<double> v(nb, 0.0);
  for (int j = 0; j < nb; ++j) {
    double s = 0.0;
    for (int i = 0; i < ns; ++i) s += jsd.density_at(i, j);
    v[j] = s * jsd.grid_spect.step_nm;
  }
  return normalize_area(Spectrum(jsd.grid_bucket, std::move(v), SpectrumKind::density));
}

}  // namespace qgs
