#include "qgs/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qgs {

WavelengthGrid::WavelengthGrid(double start, double step, int n)
    : start_nm(start), step_nm(step), n_bins(n) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(step))
    throw std::invalid_argument("WavelengthGrid: step_nm must be finite and > 0");
  if (n < 2) throw std::invalid_argument("WavelengthGrid: n_bins must be >= 2");
}

int WavelengthGrid::bin_of(double lambda_nm) const {
  const double t = (lambda_nm - min_edge()) / step_nm;
  if (t < 0.0) return -1;
  const int i = static_cast<int>(t);
  return i < n_bins ? i : -1;
}

bool WavelengthGrid::same_as(const WavelengthGrid& o, double rel_tol) const {
  const double scale = std::max({std::abs(start_nm), std::abs(o.start_nm), 1.0});
  return n_bins == o.n_bins && std::abs(start_nm - o.start_nm) <= rel_tol * scale &&
         std::abs(step_nm - o.step_nm) <= rel_tol * std::max(step_nm, o.step_nm);
}

Spectrum::Spectrum(WavelengthGrid g, std::vector<double> v, SpectrumKind k)
    : grid(g), values(std::move(v)), kind(k) {
  if (static_cast<int>(values.size()) != grid.n_bins)
    throw std::invalid_argument("Spectrum: values length must equal n_bins");
  for (double x : values)
    if (!std::isfinite(x) || x < 0.0)
      throw std::invalid_argument("Spectrum: values must be finite and non-negative");
}

double Spectrum::area() const {
  double s = 0.0;
  for (double x : values) s += x;
  return s * grid.step_nm;
}

int Spectrum::argmax() const {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

void PumpSpec::validate() const {
  if (!(lambda_p_nm > 0.0)) throw std::invalid_argument("PumpSpec: lambda_p_nm must be > 0");
  if (!(bandwidth_fwhm_nm > 0.0))
    throw std::invalid_argument("PumpSpec: bandwidth_fwhm_nm must be > 0");
  if (!(rep_rate_hz > 0.0)) throw std::invalid_argument("PumpSpec: rep_rate_hz must be > 0");
}

double partner_wavelength(double lambda_nm, double lambda_p_nm) {
  if (!(lambda_p_nm > 0.0))
    throw std::domain_error("partner_wavelength: pump wavelength must be > 0");
  if (!(lambda_nm > lambda_p_nm))
    throw std::domain_error("partner_wavelength: wavelength must exceed the pump wavelength");
  return 1.0 / (1.0 / lambda_p_nm - 1.0 / lambda_nm);
}

double convert_bandwidth(double delta_nm, double lambda_from_nm, double lambda_to_nm) {
  if (!(delta_nm > 0.0) || !(lambda_from_nm > 0.0) || !(lambda_to_nm > 0.0))
    throw std::domain_error("convert_bandwidth: all arguments must be > 0");
  const double ratio = lambda_to_nm / lambda_from_nm;
  return delta_nm * ratio * ratio;
}

namespace {

// Least-squares polynomial smoothing weights: fit degree-`order` polynomial to
// the window samples at integer offsets `off`, evaluate the fit at offset 0.
std::vector<double> savgol_weights(const std::vector<int>& off, int order) {
  const int npts = static_cast<int>(off.size());
  const int p = std::min(order, npts - 1);
  Eigen::MatrixXd a(npts, p + 1);
  for (int r = 0; r < npts; ++r) {
    double pw = 1.0;
    for (int c = 0; c <= p; ++c) {
      a(r, c) = pw;
      pw *= static_cast<double>(off[r]);
    }
  }
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p + 1);
  e0(0) = 1.0;
  const Eigen::VectorXd y = (a.transpose() * a).ldlt().solve(e0);
  const Eigen::VectorXd c = a * y;
  return std::vector<double>(c.data(), c.data() + npts);
}

}  // namespace

Spectrum savgol_smooth(const Spectrum& s, int window, int order) {
  const int n = s.grid.n_bins;
  if (window % 2 == 0 || window < 1)
    throw std::invalid_argument("savgol_smooth: window must be odd");
  if (order < 0) throw std::invalid_argument("savgol_smooth: order must be >= 0");
  if (window < order + 2)
    throw std::invalid_argument("savgol_smooth: window must be >= order + 2");
  if (window > n) throw std::invalid_argument("savgol_smooth: window must be <= n_bins");

  const int h = window / 2;
  std::vector<int> sym(window);
  for (int j = 0; j < window; ++j) sym[j] = j - h;
  const std::vector<double> kern = savgol_weights(sym, order);

  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - h);
    const int hi = std::min(n - 1, i + h);
    double v = 0.0;
    if (hi - lo + 1 == window) {
      for (int j = 0; j < window; ++j) v += kern[j] * s.values[lo + j];
    } else {
      std::vector<int> off(hi - lo + 1);
      for (int j = lo; j <= hi; ++j) off[j - lo] = j - i;
      const std::vector<double> w = savgol_weights(off, order);
      for (int j = lo; j <= hi; ++j) v += w[j - lo] * s.values[j];
    }
    out[i] = std::max(0.0, v);
  }
  return Spectrum(s.grid, std::move(out), s.kind);
}

double empirical_fwhm(const Spectrum& s) {
  const int n = s.grid.n_bins;
  const int peak = s.argmax();
  const double vmax = s.values[peak];
  if (peak == 0 || peak == n - 1)
    throw std::domain_error("empirical_fwhm: maximum sits on the grid boundary");
  if (!(vmax > 0.0)) throw std::domain_error("empirical_fwhm: spectrum is all zero");
  const double half = 0.5 * vmax;

  double x_left = 0.0, x_right = 0.0;
  bool found_left = false, found_right = false;
  for (int j = peak; j >= 1; --j) {
    if (s.values[j - 1] < half && s.values[j] >= half) {
      x_left = s.grid.center(j - 1) +
               s.grid.step_nm * (half - s.values[j - 1]) / (s.values[j] - s.values[j - 1]);
      found_left = true;
      break;
    }
  }
  for (int j = peak; j <= n - 2; ++j) {
    if (s.values[j] >= half && s.values[j + 1] < half) {
      x_right = s.grid.center(j) +
                s.grid.step_nm * (s.values[j] - half) / (s.values[j] - s.values[j + 1]);
      found_right = true;
      break;
    }
  }
  if (!found_left || !found_right)
    throw std::domain_error("empirical_fwhm: no half-maximum crossing on one side");
  return x_right - x_left;
}

Spectrum normalize_area(const Spectrum& s) {
  const double a = s.area();
  if (!(a > 0.0)) throw std::domain_error("normalize_area: spectrum has zero area");
  std::vector<double> v(s.values);
  for (double& x : v) x /= a;
  return Spectrum(s.grid, std::move(v), SpectrumKind::density);
}

Spectrum gaussian_spectrum(const WavelengthGrid& grid, double center_nm, double fwhm_nm) {
  if (!(fwhm_nm > 0.0)) throw std::invalid_argument("gaussian_spectrum: fwhm must be > 0");
  const double sig = fwhm_to_sigma(fwhm_nm);
  const double norm = 1.0 / (sig * std::sqrt(2.0 * M_PI));
  std::vector<double> v(grid.n_bins);
  for (int i = 0; i < grid.n_bins; ++i) {
    const double z = (grid.center(i) - center_nm) / sig;
    v[i] = norm * std::exp(-0.5 * z * z);
  }
  return Spectrum(grid, std::move(v), SpectrumKind::density);
}

}  // namespace qgs
