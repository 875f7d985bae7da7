#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "qgs/errors.hpp"
#include "qgs/rng.hpp"
#include "qgs/source.hpp"

using namespace qgs;

namespace {

SourceModel default_model() { return SourceModel{}; }

// default grids used across the cases below
WavelengthGrid default_spect_grid() { return WavelengthGrid(778.0, 0.25, 257); }

JointSpectralDensity default_jsd() {
  const SourceModel m = default_model();
  const WavelengthGrid gs = default_spect_grid();
  return build_jsd(m, gs, derive_bucket_grid(m, gs));
}

}  // namespace

TEST_SUITE_BEGIN("source");

TEST_CASE("random stream determinism and splitting") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RandomStream g0 = RandomStream::for_gate(7, 0);
  RandomStream g1 = RandomStream::for_gate(7, 1);
  CHECK(g0.next_u64() != g1.next_u64());

  RandomStream idx(5);
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t v = idx.next_index(7);
    CHECK(v < 7);
  }
}

TEST_CASE("correlation width defaults to the pump bandwidth image") {
  const SourceModel m = default_model();
  CHECK(m.effective_correlation_width_nm() ==
        doctest::Approx(convert_bandwidth(0.23, 532.0, 810.0)).epsilon(1e-12));
  SourceModel w = m;
  w.correlation_width_nm = 1.5;
  CHECK(w.effective_correlation_width_nm() == 1.5);
}

TEST_CASE("jsd ridge follows the partner wavelength") {
  const JointSpectralDensity jsd = default_jsd();
  const Spectrum marg = source_marginal(jsd, Arm::spect);
  const double mass_max =
      *std::max_element(marg.values.begin(), marg.values.end());
  for (int i = 0; i < jsd.grid_spect.n_bins; ++i) {
    if (marg.values[i] < 0.01 * mass_max) continue;
    int jbest = 0;
    for (int j = 1; j < jsd.grid_bucket.n_bins; ++j)
      if (jsd.density_at(i, j) > jsd.density_at(i, jbest)) jbest = j;
    const double expected = partner_wavelength(jsd.grid_spect.center(i), 532.0);
    CHECK(std::abs(jsd.grid_bucket.center(jbest) - expected) <=
          jsd.grid_bucket.step_nm);
  }
}

TEST_CASE("conditional on the bucket arm is centered at the partner") {
  const JointSpectralDensity jsd = default_jsd();
  const Spectrum marg = source_marginal(jsd, Arm::bucket);
  const double mass_max = *std::max_element(marg.values.begin(), marg.values.end());
  for (int j = 0; j < jsd.grid_bucket.n_bins; ++j) {
    if (marg.values[j] < 0.01 * mass_max) continue;
    int ibest = 0;
    for (int i = 1; i < jsd.grid_spect.n_bins; ++i)
      if (jsd.density_at(i, j) > jsd.density_at(ibest, j)) ibest = i;
    const double expected = partner_wavelength(jsd.grid_bucket.center(j), 532.0);
    CHECK(std::abs(jsd.grid_spect.center(ibest) - expected) <= jsd.grid_spect.step_nm);
  }
}

TEST_CASE("jsd marginals") {
  const JointSpectralDensity jsd = default_jsd();
  const Spectrum ms = source_marginal(jsd, Arm::spect);
  CHECK(ms.area() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(empirical_fwhm(ms) == doctest::Approx(25.0).epsilon(0.3 / 25.0));

  const Spectrum mb = source_marginal(jsd, Arm::bucket);
  CHECK(mb.area() == doctest::Approx(1.0).epsilon(1e-9));
  // Jacobian conversion oracle; the nonlinear map distorts the shape a bit
  CHECK(empirical_fwhm(mb) ==
        doctest::Approx(convert_bandwidth(25.0, 810.0, 1550.0)).epsilon(0.03));
}

TEST_CASE("jsd grid coverage errors") {
  const SourceModel m = default_model();
  const WavelengthGrid narrow(795.0, 0.25, 81);  // covers only +-10 nm
  CHECK_THROWS_AS(build_jsd(m, narrow, derive_bucket_grid(m, narrow)), ConfigError);
}

TEST_CASE("perfect anti-correlation limit collapses columns") {
  SourceModel m = default_model();
  m.correlation_width_nm = 1e-6;
  const WavelengthGrid gs = default_spect_grid();
  const JointSpectralDensity jsd = build_jsd(m, gs, derive_bucket_grid(m, gs));
  for (int i = 0; i < gs.n_bins; ++i) {
    int nonzero = 0;
    for (int j = 0; j < jsd.grid_bucket.n_bins; ++j)
      if (jsd.density_at(i, j) > 0.0) ++nonzero;
    CHECK(nonzero <= 1);
  }
  // and each draw lands within one bucket bin of the partner wavelength
  RandomStream rng(7);
  for (int k = 0; k < 2000; ++k) {
    const PairSample ps = sample_pair_wavelengths(jsd, rng);
    const double partner = partner_wavelength(ps.lambda_spect_nm, 532.0);
    CHECK(std::abs(ps.lambda_bucket_nm - partner) <= 1.5 * jsd.grid_bucket.step_nm);
  }
}

TEST_CASE("marginal of a product density is the factor") {
  WavelengthGrid gs(0.0, 1.0, 8), gb(100.0, 2.0, 5);
  std::vector<double> f = {1, 2, 3, 4, 4, 3, 2, 1};
  std::vector<double> h = {1, 1, 2, 1, 1};
  double fs = 0, hs = 0;
  for (double x : f) fs += x;
  for (double x : h) hs += x;
  JointSpectralDensity jsd;
  jsd.grid_spect = gs;
  jsd.grid_bucket = gb;
  jsd.density.resize(40);
  jsd.cdf.resize(40);
  double run = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 5; ++j) {
      const double mass = (f[i] / fs) * (h[j] / hs);
      run += mass;
      jsd.cdf[i * 5 + j] = run;
      jsd.density[i * 5 + j] = mass / (gs.step_nm * gb.step_nm);
    }
  const Spectrum ms = source_marginal(jsd, Arm::spect);
  for (int i = 0; i < 8; ++i)
    CHECK(ms.values[i] == doctest::Approx(f[i] / fs / gs.step_nm).epsilon(1e-12));

  // degenerate density: all mass in one cell -> every draw lands there
  JointSpectralDensity deg = jsd;
  std::fill(deg.density.begin(), deg.density.end(), 0.0);
  std::fill(deg.cdf.begin(), deg.cdf.end(), 0.0);
  deg.density[17] = 1.0 / (gs.step_nm * gb.step_nm);
  for (std::size_t k = 17; k < deg.cdf.size(); ++k) deg.cdf[k] = 1.0;
  RandomStream rng(3);
  for (int k = 0; k < 500; ++k) {
    const PairSample ps = sample_pair_wavelengths(deg, rng);
    CHECK(ps.bin_spect == 3);
    CHECK(ps.bin_bucket == 2);
  }
}

TEST_CASE("mean pairs per pulse is exactly linear") {
  const SourceModel m = default_model();
  CHECK(mean_pairs_per_pulse(0.0, m) == 0.0);
  CHECK(mean_pairs_per_pulse(31.58, m) == doctest::Approx(0.3158).epsilon(1e-15));
  RandomStream rng(11);
  for (int i = 0; i < 100; ++i) {
    const double p = 100.0 * rng.next_double();
    CHECK(mean_pairs_per_pulse(2.0 * p, m) == 2.0 * mean_pairs_per_pulse(p, m));
  }
  CHECK_THROWS_AS(mean_pairs_per_pulse(-1.0, m), std::domain_error);
}

TEST_CASE("pair count sampling moments") {
  RandomStream z(1);
  for (int i = 0; i < 1000; ++i) CHECK(sample_pair_count(0.0, z) == 0);

  RandomStream rng(20240601);
  const int n = 1000000;
  double sum = 0;
  long n1 = 0, n2plus = 0;
  for (int i = 0; i < n; ++i) {
    const int k = sample_pair_count(0.1, rng);
    sum += k;
    if (k == 1) ++n1;
    if (k >= 2) ++n2plus;
  }
  CHECK(sum / n == doctest::Approx(0.1).epsilon(0.001 / 0.1));
  CHECK(static_cast<double>(n2plus) / n1 == doctest::Approx(0.05).epsilon(0.005 / 0.05));

  // identical seeds give identical sequences
  RandomStream a(77), b(77);
  for (int i = 0; i < 1000; ++i)
    CHECK(sample_pair_count(0.3, a) == sample_pair_count(0.3, b));
}

TEST_CASE("pair count Fano factor") {
  RandomStream rng(5150);
  const int n = 1000000;
  const double mu = 0.3;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const int k = sample_pair_count(mu, rng);
    s1 += k;
    s2 += static_cast<double>(k) * k;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(var / mean - 1.0) <= 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("wavelength sampling matches the marginal (chi-squared)") {
  const JointSpectralDensity jsd = default_jsd();
  const int ns = jsd.grid_spect.n_bins;
  std::vector<double> expected(ns, 0.0);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < jsd.grid_bucket.n_bins; ++j)
      expected[i] += jsd.cell_mass(i, j);

  const int n = 200000;
  std::vector<int> hist(ns, 0);
  RandomStream rng(909);
  for (int k = 0; k < n; ++k) ++hist[sample_pair_wavelengths(jsd, rng).bin_spect];

  double chi2 = 0.0;
  int dof = 0;
  double tail_exp = 0.0;
  int tail_obs = 0;
  for (int i = 0; i < ns; ++i) {
    const double e = expected[i] * n;
    if (e >= 5.0) {
      chi2 += (hist[i] - e) * (hist[i] - e) / e;
      ++dof;
    } else {
      tail_exp += e;
      tail_obs += hist[i];
    }
  }
  if (tail_exp >= 5.0) {
    chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
    ++dof;
  }
  --dof;
  // Wilson-Hilferty critical value at p = 0.001
  const double z = 3.0902;
  const double crit =
      dof * std::pow(1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof)), 3.0);
  CHECK(chi2 < crit);
}

TEST_CASE("model validation") {
  SourceModel m = default_model();
  m.jsd_marginal_fwhm_nm = -1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = default_model();
  m.center_spect_nm = 500.0;  // below the pump
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = default_model();
  m.brightness_coeff = 0.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_SUITE_END();
