#include "qgs/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qgs/errors.hpp"
#include "qgs/noise.hpp"

namespace qgs {

CarPoint compute_car(const CoincidenceData& data) {
  CarPoint p;
  p.power_density = data.power_density_mw_mm2;
  p.n_cc = data.aligned_total();
  p.n_acc = data.shifted_total();
  if (p.n_acc == 0)
    throw AnalysisError("CAR unbounded: no shifted-window counts (N_cc = " +
                        std::to_string(p.n_cc) + ")");
  p.car = static_cast<double>(p.n_cc) / static_cast<double>(p.n_acc);
  p.car_err = p.n_cc == 0 ? 0.0
                          : p.car * std::sqrt(1.0 / static_cast<double>(p.n_cc) +
                                              1.0 / static_cast<double>(p.n_acc));
  return p;
}

ExpDecayFit fit_exp_decay(const std::vector<CarPoint>& points, double tail_start) {
  std::vector<const CarPoint*> tail;
  for (const CarPoint& p : points)
    if (p.power_density >= tail_start) tail.push_back(&p);
  if (tail.size() < 3)
    throw AnalysisError("fit_exp_decay: fewer than 3 points with power >= tail_start");

  bool weighted = true;
  for (const CarPoint* p : tail) {
    if (!(p->car > 0.0))
      throw AnalysisError("fit_exp_decay: non-positive CAR in the tail");
    if (!(p->car_err > 0.0)) weighted = false;
  }

  // ln(car) = a + b*power, weights = 1/sigma_ln^2 with sigma_ln = err/car
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (const CarPoint* p : tail) {
    const double x = p->power_density;
    const double y = std::log(p->car);
    const double sl = p->car_err / p->car;
    const double w = weighted ? 1.0 / (sl * sl) : 1.0;
    sw += w;
    swx += w * x;
    swy += w * y;
    swxx += w * x * x;
    swxy += w * x * y;
  }
  const double det = sw * swxx - swx * swx;
  if (!(det > 0.0)) throw AnalysisError("fit_exp_decay: degenerate abscissa");
  const double a = (swxx * swy - swx * swxy) / det;
  const double b = (sw * swxy - swx * swy) / det;
  // covariance of (a, b) under the declared weights
  const double var_a = swxx / det;
  const double var_b = sw / det;
  const double cov_ab = -swx / det;

  ExpDecayFit fit;
  fit.n_points_used = static_cast<int>(tail.size());
  fit.A = std::exp(a);
  fit.car_min = fit.A * std::exp(-1.0);
  if (b < 0.0) {
    fit.P0 = -1.0 / b;
    fit.decaying = true;
  } else {
    fit.P0 = std::numeric_limits<double>::infinity();
    fit.decaying = false;
  }
  // delta method: A = e^a, P0 = -1/b
  const double dA = fit.A;
  const double dP = fit.decaying ? 1.0 / (b * b) : 0.0;
  fit.covariance[0][0] = dA * dA * var_a;
  fit.covariance[0][1] = dA * dP * cov_ab;
  fit.covariance[1][0] = fit.covariance[0][1];
  fit.covariance[1][1] = dP * dP * var_b;
  return fit;
}

Spectrum map_spectrum_to_partner_axis(const Spectrum& s, double lambda_p_nm) {
  const WavelengthGrid& g = s.grid;
  const int n = g.n_bins;
  std::vector<double> mapped(n + 1);
  for (int i = 0; i <= n; ++i)
    mapped[i] = partner_wavelength(g.min_edge() + i * g.step_nm, lambda_p_nm);
  // partner map is decreasing: mapped[0] is the high edge
  const double lo = mapped[n], hi = mapped[0];
  const double step_t = (hi - lo) / n;
  WavelengthGrid tg(lo + 0.5 * step_t, step_t, n);

  std::vector<double> mass(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double a = mapped[i + 1], b = mapped[i];  // a < b
    const double area = s.values[i] * g.step_nm;
    if (!(b > a) || area == 0.0) continue;
    int j0 = std::clamp(static_cast<int>((a - lo) / step_t), 0, n - 1);
    int j1 = std::clamp(static_cast<int>((b - lo) / step_t), 0, n - 1);
    for (int j = j0; j <= j1; ++j) {
      const double cell_lo = lo + j * step_t;
      const double overlap = std::min(b, cell_lo + step_t) - std::max(a, cell_lo);
      if (overlap > 0.0) mass[j] += area * overlap / (b - a);
    }
  }
  for (int j = 0; j < n; ++j) mass[j] /= step_t;
  return Spectrum(tg, std::move(mass), s.kind);
}

Spectrum reconstruct_ghost(const CoincidenceData& data, const GhostOptions& opts) {
  if (data.aligned_total() == 0)
    throw AnalysisError("reconstruct_ghost: no aligned coincidences");
  const int n = data.spect_grid.n_bins;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    double x = static_cast<double>(data.aligned_hist[i]);
    if (opts.subtract_accidentals)
      x -= static_cast<double>(data.shifted_hist[i]);
    v[i] = std::max(0.0, x);
  }
  Spectrum s(data.spect_grid, std::move(v), SpectrumKind::counts);
  if (opts.sg_window >= 3) s = savgol_smooth(s, opts.sg_window, opts.sg_order);
  s = normalize_area(s);
  if (opts.map_to_bucket_arm) s = map_spectrum_to_partner_axis(s, opts.lambda_p_nm);
  return s;
}

double gauss_peaks_eval(const std::vector<double>& params, double x) {
  double v = params[0];
  for (std::size_t p = 1; p + 2 < params.size(); p += 3) {
    const double a = params[p], c = params[p + 1], s = params[p + 2];
    const double z = (x - c) / s;
    v += a * std::exp(-0.5 * z * z);
  }
  return v;
}

std::vector<double> gauss_peaks_gradient(const std::vector<double>& params, double x) {
  std::vector<double> g(params.size(), 0.0);
  g[0] = 1.0;
  for (std::size_t p = 1; p + 2 < params.size(); p += 3) {
    const double a = params[p], c = params[p + 1], s = params[p + 2];
    const double z = (x - c) / s;
    const double e = std::exp(-0.5 * z * z);
    g[p] = e;
    g[p + 1] = a * e * z / s;
    g[p + 2] = a * e * z * z / s;
  }
  return g;
}

namespace {

// Linear least squares for the offset and amplitudes with centers and sigmas
// held fixed; leaves the init untouched when the solve goes degenerate.
void refine_amplitudes(const Spectrum& s, FitInit& init, bool fix_offset) {
  const int n = s.grid.n_bins;
  const int np = static_cast<int>(init.peaks.size());
  const int m = (fix_offset ? 0 : 1) + np;
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x = s.grid.center(i);
    int col = 0;
    if (!fix_offset) a(i, col++) = 1.0;
    for (int k = 0; k < np; ++k, ++col) {
      const double z = (x - init.peaks[k].center_nm) / init.peaks[k].sigma_nm;
      a(i, col) = std::exp(-0.5 * z * z);
    }
    y(i) = s.values[i] - (fix_offset ? init.offset : 0.0);
  }
  const Eigen::VectorXd c = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  if (!c.allFinite()) return;
  const int amp0 = fix_offset ? 0 : 1;
  for (int k = 0; k < np; ++k)
    if (!(c(amp0 + k) > 0.0)) return;
  if (!fix_offset) init.offset = c(0);
  for (int k = 0; k < np; ++k) init.peaks[k].amplitude = c(amp0 + k);
}

// Deterministic starting points: the largest local maxima of the smoothed
// spectrum, plus split variants of the tallest one when two peaks are
// requested (merged peaks show a single maximum).
std::vector<FitInit> candidate_inits(const Spectrum& s, int n_peaks, bool fix_offset) {
  const int n = s.grid.n_bins;
  Spectrum sm = s;
  {
    int w = std::min(11, n);
    if (w % 2 == 0) --w;
    if (w >= 3) sm = savgol_smooth(s, w, std::min(3, w - 2));
  }
  const double step = s.grid.step_nm;

  std::vector<int> maxima;
  for (int i = 1; i + 1 < n; ++i)
    if (sm.values[i] > sm.values[i - 1] && sm.values[i] >= sm.values[i + 1])
      maxima.push_back(i);
  std::sort(maxima.begin(), maxima.end(),
            [&](int a, int b) { return sm.values[a] > sm.values[b]; });
  if (maxima.empty()) maxima.push_back(sm.argmax());

  const double offset =
      fix_offset ? 0.0 : *std::min_element(sm.values.begin(), sm.values.end());

  auto width_at = [&](int peak) {
    const double half = offset + 0.5 * (sm.values[peak] - offset);
    int l = peak, r = peak;
    while (l > 0 && sm.values[l] > half) --l;
    while (r + 1 < n && sm.values[r] > half) ++r;
    const double hwhm = 0.5 * (r - l) * step;
    return hwhm > 0.0 ? hwhm / 1.1774 : 2.0 * step;  // hwhm = 1.1774 sigma
  };

  auto peak_at = [&](int i) {
    return GaussianPeak{std::max(sm.values[i] - offset, 1e-12), s.grid.center(i),
                        width_at(i)};
  };

  std::vector<FitInit> out;
  if (n_peaks == 1) {
    out.push_back({offset, {peak_at(maxima[0])}});
  } else {
    if (maxima.size() >= 2)
      out.push_back({offset, {peak_at(maxima[0]), peak_at(maxima[1])}});
    // split variants of the tallest maximum; cover merged double peaks
    const GaussianPeak top = peak_at(maxima[0]);
    for (double frac : {0.50, 0.25}) {
      const double d = frac * sigma_to_fwhm(top.sigma_nm);
      FitInit split;
      split.offset = offset;
      split.peaks = {{0.6 * top.amplitude, top.center_nm - d, 0.8 * top.sigma_nm},
                     {0.6 * top.amplitude, top.center_nm + d, 0.8 * top.sigma_nm}};
      out.push_back(split);
    }
    // narrow-plus-broad variant; covers a peak riding on a wide background
    FitInit stacked;
    stacked.offset = offset;
    stacked.peaks = {{0.8 * top.amplitude, top.center_nm, top.sigma_nm},
                     {0.2 * top.amplitude, top.center_nm, 4.0 * top.sigma_nm}};
    out.push_back(stacked);
  }
  for (FitInit& init : out) refine_amplitudes(s, init, fix_offset);
  return out;
}

GaussianFitResult lm_solve(const Spectrum& s, const FitInit& start, int n_peaks,
                           bool fix_offset, std::vector<double>* residual_trace) {
  const int n = s.grid.n_bins;
  const int m = 1 + 3 * n_peaks;
  std::vector<double> theta(m);
  theta[0] = start.offset;
  for (int k = 0; k < n_peaks; ++k) {
    theta[1 + 3 * k] = start.peaks[k].amplitude;
    theta[2 + 3 * k] = start.peaks[k].center_nm;
    theta[3 + 3 * k] = start.peaks[k].sigma_nm;
  }

  auto sse = [&](const std::vector<double>& p) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = gauss_peaks_eval(p, s.grid.center(i)) - s.values[i];
      acc += r * r;
    }
    return acc;
  };

  double S = sse(theta);
  if (residual_trace) residual_trace->push_back(std::sqrt(S));
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;

  Eigen::MatrixXd jtj(m, m);
  Eigen::VectorXd jtr(m);
  for (; iter < 500 && !converged; ++iter) {
    jtj.setZero();
    jtr.setZero();
    for (int i = 0; i < n; ++i) {
      const double x = s.grid.center(i);
      const double r = gauss_peaks_eval(theta, x) - s.values[i];
      const std::vector<double> g = gauss_peaks_gradient(theta, x);
      for (int a = 0; a < m; ++a) {
        jtr(a) += g[a] * r;
        for (int b = a; b < m; ++b) jtj(a, b) += g[a] * g[b];
      }
    }
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < a; ++b) jtj(a, b) = jtj(b, a);
    if (fix_offset) {
      jtj.row(0).setZero();
      jtj.col(0).setZero();
      jtj(0, 0) = 1.0;
      jtr(0) = 0.0;
    }

    Eigen::MatrixXd damped = jtj;
    for (int a = 0; a < m; ++a)
      damped(a, a) += lambda * std::max(jtj(a, a), 1e-30);
    const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);

    std::vector<double> trial(theta);
    for (int a = 0; a < m; ++a) trial[a] += delta(a);

    // peaks are positive features: reject steps leaving the feasible region
    bool feasible = true;
    for (int k = 0; k < n_peaks; ++k)
      if (!(trial[3 + 3 * k] > 0.0) || !(trial[1 + 3 * k] > 0.0)) feasible = false;

    const double S2 = feasible ? sse(trial) : std::numeric_limits<double>::infinity();
    if (S2 <= S) {
      const double drop = S - S2;
      double step2 = 0.0, tn2 = 0.0;
      for (int a = 0; a < m; ++a) {
        step2 += delta(a) * delta(a);
        tn2 += trial[a] * trial[a];
      }
      theta = std::move(trial);
      S = S2;
      if (residual_trace) residual_trace->push_back(std::sqrt(S));
      lambda = std::max(lambda * 0.1, 1e-14);
      if (drop <= 1e-10 * std::max(S, std::numeric_limits<double>::min()) ||
          std::sqrt(step2) <= 1e-12 * (1.0 + std::sqrt(tn2)))
        converged = true;
    } else {
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }
  }

  GaussianFitResult out;
  out.offset = theta[0];
  for (int k = 0; k < n_peaks; ++k)
    out.peaks.push_back({theta[1 + 3 * k], theta[2 + 3 * k], theta[3 + 3 * k]});
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const GaussianPeak& a, const GaussianPeak& b) {
              return a.center_nm < b.center_nm;
            });
  out.residual_norm = std::sqrt(S);
  out.converged = converged;
  out.iterations = iter;
  return out;
}

}  // namespace

GaussianFitResult fit_gaussians(const Spectrum& s, int n_peaks,
                                const GaussianFitOptions& opts) {
  if (n_peaks != 1 && n_peaks != 2)
    throw AnalysisError("fit_gaussians: n_peaks must be 1 or 2");
  const int n = s.grid.n_bins;
  if (n < 4 * n_peaks + 1)
    throw AnalysisError("fit_gaussians: spectrum too short for the requested peaks");

  std::vector<FitInit> starts;
  if (opts.init) {
    FitInit start = *opts.init;
    if (static_cast<int>(start.peaks.size()) != n_peaks)
      throw AnalysisError("fit_gaussians: init must provide one entry per peak");
    for (const GaussianPeak& p : start.peaks) {
      if (!(p.sigma_nm > 0.0))
        throw AnalysisError("fit_gaussians: init sigma must be > 0");
      if (p.center_nm < s.grid.min_edge() || p.center_nm > s.grid.max_edge())
        throw AnalysisError("fit_gaussians: init center outside the grid");
    }
    if (n_peaks == 2 &&
        std::abs(start.peaks[0].center_nm - start.peaks[1].center_nm) < s.grid.step_nm) {
      start.peaks[0].center_nm -= s.grid.step_nm;
      start.peaks[1].center_nm += s.grid.step_nm;
    }
    starts.push_back(std::move(start));
  } else {
    starts = candidate_inits(s, n_peaks, opts.fix_offset);
  }

  GaussianFitResult best;
  std::vector<double> best_trace;
  bool have = false;
  for (const FitInit& start : starts) {
    std::vector<double> trace;
    const GaussianFitResult r = lm_solve(s, start, n_peaks, opts.fix_offset,
                                         opts.residual_trace ? &trace : nullptr);
    if (!have || r.residual_norm < best.residual_norm) {
      best = r;
      best_trace = std::move(trace);
      have = true;
    }
  }
  if (opts.residual_trace) *opts.residual_trace = std::move(best_trace);
  return best;
}

GaussianFitResult fit_gaussians(const Spectrum& s, int n_peaks,
                                const std::optional<FitInit>& init,
                                std::vector<double>* residual_trace) {
  GaussianFitOptions opts;
  opts.init = init;
  opts.residual_trace = residual_trace;
  return fit_gaussians(s, n_peaks, opts);
}

double resolving_power(const GaussianFitResult& fit) {
  if (fit.peaks.size() != 2)
    throw AnalysisError("resolving_power: exactly two fitted peaks required");
  const double s1 = fit.peaks[0].sigma_nm, s2 = fit.peaks[1].sigma_nm;
  if (!(s1 > 0.0) || !(s2 > 0.0))
    throw AnalysisError("resolving_power: fitted sigmas must be > 0");
  return std::abs(fit.peaks[1].center_nm - fit.peaks[0].center_nm) / (s1 + s2);
}

RPMap sweep_resolving_power(const std::vector<double>& separations_nm,
                            const std::vector<double>& noise_fractions,
                            double peak_fwhm_nm, const Spectrum& source,
                            const WavelengthGrid& grid) {
  if (!(peak_fwhm_nm > 0.0))
    throw AnalysisError("sweep_resolving_power: peak_fwhm_nm must be > 0");
  const Spectrum src = normalize_area(source);
  if (!src.grid.same_as(grid))
    throw AnalysisError("sweep_resolving_power: source must live on the sweep grid");
  const double center = grid.center(src.argmax());

  RPMap map;
  map.separations_nm = separations_nm;
  map.noise_fractions = noise_fractions;
  map.rp.assign(separations_nm.size() * noise_fractions.size(),
                std::numeric_limits<double>::quiet_NaN());
  map.resolvable.assign(map.rp.size(), 0);

  for (std::size_t i = 0; i < separations_nm.size(); ++i) {
    const double d = separations_nm[i];
    if (!(d > 0.0) || d >= grid.span_nm())
      throw AnalysisError("sweep_resolving_power: separation outside (0, grid span)");
    const Spectrum left = gaussian_spectrum(grid, center - 0.5 * d, peak_fwhm_nm);
    const Spectrum right = gaussian_spectrum(grid, center + 0.5 * d, peak_fwhm_nm);
    std::vector<double> v(grid.n_bins);
    for (int b = 0; b < grid.n_bins; ++b)
      v[b] = 0.5 * (left.values[b] + right.values[b]);
    const Spectrum ghost =
        normalize_area(Spectrum(grid, std::move(v), SpectrumKind::density));

    for (std::size_t j = 0; j < noise_fractions.size(); ++j) {
      const Spectrum mixed = mix_colored(ghost, src, noise_fractions[j]);
      // the mixture is a pure density: the noise admixture is spectrum, not
      // baseline, so the offset stays at zero and the fitted widths carry it
      GaussianFitOptions fopts;
      fopts.fix_offset = true;
      const GaussianFitResult fit = fit_gaussians(mixed, 2, fopts);
      const std::size_t cell = i * noise_fractions.size() + j;
      if (fit.converged) {
        map.rp[cell] = resolving_power(fit);
        map.resolvable[cell] = map.rp[cell] > 1.0 ? 1 : 0;
      } else {
        ++map.n_nonconverged;
      }
    }
  }
  return map;
}

}  // namespace qgs
