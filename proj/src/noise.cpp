#include "qgs/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qgs/analysis.hpp"
#include "qgs/errors.hpp"

namespace qgs {

Spectrum NoiseMix::apply(const Spectrum& ghost) const {
  return kind == NoiseKind::white ? mix_white(ghost, fraction)
                                  : mix_colored(ghost, reference, fraction);
}

Spectrum mix_colored(const Spectrum& ghost, const Spectrum& source, double n) {
  if (!(n >= 0.0) || n > 1.0)
    throw std::invalid_argument("mix_colored: fraction must be in [0,1]");
  if (!ghost.grid.same_as(source.grid))
    throw std::invalid_argument("mix_colored: ghost and source grids differ");
  const Spectrum g = normalize_area(ghost);
  const Spectrum s = normalize_area(source);
  std::vector<double> v(g.values.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = (1.0 - n) * g.values[i] + n * s.values[i];
  return Spectrum(g.grid, std::move(v), SpectrumKind::density);
}

Spectrum mix_white(const Spectrum& ghost, double n) {
  if (!(n >= 0.0) || n > 1.0)
    throw std::invalid_argument("mix_white: fraction must be in [0,1]");
  const Spectrum g = normalize_area(ghost);
  const double uniform = 1.0 / g.grid.span_nm();
  std::vector<double> v(g.values.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = (1.0 - n) * g.values[i] + n * uniform;
  return Spectrum(g.grid, std::move(v), SpectrumKind::density);
}

Spectrum noise_spectrum(const CoincidenceData& data, int sg_window, int sg_order) {
  if (data.shifted_total() == 0)
    throw AnalysisError("noise_spectrum: shifted-window histogram is empty");
  std::vector<double> v(data.shifted_hist.begin(), data.shifted_hist.end());
  Spectrum s(data.spect_grid, std::move(v), SpectrumKind::counts);
  int w = std::min(sg_window, data.spect_grid.n_bins);
  if (w % 2 == 0) --w;
  if (w >= 3) s = savgol_smooth(s, w, std::min(sg_order, w - 2));
  return normalize_area(s);
}

NoiseClassification classify_noise(const CoincidenceData& data,
                                   double car_min_threshold) {
  NoiseClassification out;
  const std::uint64_t n_cc = data.aligned_total();
  const std::uint64_t n_acc = data.shifted_total();
  if (n_acc == 0) {
    out.car = std::numeric_limits<double>::infinity();
    out.car_err = 0.0;
  } else {
    const CarPoint cp = compute_car(data);
    out.car = cp.car;
    out.car_err = cp.car_err;
  }
  if (n_cc > 0) {
    out.n_white = static_cast<double>(data.class_tally.dark_involved) /
                  static_cast<double>(n_cc);
    out.n_colored = static_cast<double>(data.class_tally.multipair_accidental) /
                    static_cast<double>(n_cc);
  }
  if (out.car >= car_min_threshold)
    out.regime = NoiseRegime::negligible;
  else
    out.regime = data.class_tally.dark_involved > data.class_tally.multipair_accidental
                     ? NoiseRegime::white
                     : NoiseRegime::colored;
  return out;
}

const char* to_string(NoiseRegime r) {
  switch (r) {
    case NoiseRegime::white: return "white";
    case NoiseRegime::colored: return "colored";
    default: return "negligible";
  }
}

double flatness(const Spectrum& s) {
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= static_cast<double>(s.values.size());
  if (!(mean > 0.0)) throw AnalysisError("flatness: spectrum has zero mean");
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  return (*hi - *lo) / mean;
}

double l1_distance(const Spectrum& a, const Spectrum& b) {
  if (!a.grid.same_as(b.grid))
    throw std::invalid_argument("l1_distance: grids differ");
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    d += std::abs(a.values[i] - b.values[i]);
  return d * a.grid.step_nm;
}

}  // namespace qgs
