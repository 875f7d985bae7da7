#pragma once

#include "qgs/detection.hpp"
#include "qgs/spectral.hpp"

namespace qgs {

enum class NoiseKind { white, colored };

// Declarative description of a noise admixture; `reference` is the source
// spectrum for colored noise and is ignored for white noise.
struct NoiseMix {
  NoiseKind kind = NoiseKind::white;
  double fraction = 0.0;
  Spectrum reference;

  Spectrum apply(const Spectrum& ghost) const;
};

// Area-normalized convex mixture (1-n)*ghost + n*source; n is the fraction
// of detected coincidences attributable to accidentals.
Spectrum mix_colored(const Spectrum& ghost, const Spectrum& source, double n);

// Convex mixture of the ghost with the uniform density on its grid.
Spectrum mix_white(const Spectrum& ghost, double n);

// Normalized, smoothed shifted-window histogram: the accidental spectrum.
// The window is clamped to the histogram length; below 3 bins no smoothing
// is applied.
Spectrum noise_spectrum(const CoincidenceData& data, int sg_window = 11,
                        int sg_order = 3);

enum class NoiseRegime { white, colored, negligible };

struct NoiseClassification {
  NoiseRegime regime = NoiseRegime::negligible;
  double n_white = 0.0;    // dark-involved fraction of aligned coincidences
  double n_colored = 0.0;  // multipair fraction of aligned coincidences
  double car = 0.0;        // +inf when no shifted counts
  double car_err = 0.0;
};

// negligible when CAR >= threshold; otherwise white when dark-involved
// coincidences dominate the multipair ones, colored otherwise.
NoiseClassification classify_noise(const CoincidenceData& data,
                                   double car_min_threshold = 6.5);

const char* to_string(NoiseRegime r);

// (max - min) / mean of the values; spectral flatness metric.
double flatness(const Spectrum& s);

// sum |a - b| * step over a shared grid; in [0,2] for unit-area densities.
double l1_distance(const Spectrum& a, const Spectrum& b);

}  // namespace qgs
