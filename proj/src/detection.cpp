#include "qgs/detection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qgs/errors.hpp"

namespace qgs {

void FilterProfile::validate() const {
  if (!(center_nm > 0.0)) throw std::invalid_argument("FilterProfile: center_nm must be > 0");
  if (!(fwhm_nm > 0.0)) throw std::invalid_argument("FilterProfile: fwhm_nm must be > 0");
  if (!(peak_transmission > 0.0) || peak_transmission > 1.0)
    throw std::invalid_argument("FilterProfile: peak_transmission must be in (0,1]");
}

double filter_transmission(const FilterProfile& f, double lambda_nm) {
  if (!(lambda_nm > 0.0))
    throw std::domain_error("filter_transmission: wavelength must be > 0");
  if (f.shape == FilterShape::tophat)
    return std::abs(lambda_nm - f.center_nm) <= 0.5 * f.fwhm_nm ? f.peak_transmission : 0.0;
  const double sig = fwhm_to_sigma(f.fwhm_nm);
  const double z = (lambda_nm - f.center_nm) / sig;
  return f.peak_transmission * std::exp(-0.5 * z * z);
}

void DetectorModel::validate(const char* what) const {
  if (!(efficiency > 0.0) || efficiency > 1.0)
    throw std::invalid_argument(std::string(what) + ": efficiency must be in (0,1]");
  if (dark_prob_per_gate < 0.0 || dark_prob_per_gate >= 1.0)
    throw std::invalid_argument(std::string(what) + ": dark_prob_per_gate must be in [0,1)");
  if (dead_time_gates < 0)
    throw std::invalid_argument(std::string(what) + ": dead_time_gates must be >= 0");
  if (afterpulse_prob < 0.0 || afterpulse_prob >= 1.0)
    throw std::invalid_argument(std::string(what) + ": afterpulse_prob must be in [0,1)");
}

void DetectionConfig::validate() const {
  bucket.validate("bucket detector");
  spect.validate("spect detector");
  filter.validate();
  if (shift_gates < 1)
    throw std::invalid_argument("DetectionConfig: shift_gates must be >= 1");
  // shards overlap by shift_gates; keep it well below the shard size
  if (shift_gates > 4096)
    throw std::invalid_argument("DetectionConfig: shift_gates must be <= 4096");
}

std::uint64_t CoincidenceData::aligned_total() const {
  std::uint64_t s = 0;
  for (auto v : aligned_hist) s += v;
  return s;
}

std::uint64_t CoincidenceData::shifted_total() const {
  std::uint64_t s = 0;
  for (auto v : shifted_hist) s += v;
  return s;
}

namespace {

constexpr std::uint64_t kShardGates = 65536;

int poisson_inverse(double mu, double exp_neg_mu, RandomStream& rng) {
  const double u = rng.next_double();
  if (mu == 0.0) return 0;
  double p = exp_neg_mu;
  double cum = p;
  int k = 0;
  while (u >= cum && k < 1024) {
    ++k;
    p *= mu / k;
    cum += p;
  }
  return k;
}

struct GateSim {
  const JointSpectralDensity* jsd;
  const DetectionConfig* cfg;
  double mu;
  double exp_neg_mu;

  GateOutcome step(std::uint64_t g, DetectorState& bs, DetectorState& ss,
                   RandomStream& rng) const {
    GateOutcome out;
    const bool bucket_dead = bs.dead_remaining > 0;
    const bool spect_dead = ss.dead_remaining > 0;

    const int k = poisson_inverse(mu, exp_neg_mu, rng);

    int bucket_pair = -1;
    int spect_pair = -1, spect_px = -1;
    for (int i = 0; i < k; ++i) {
      const PairSample ps = sample_pair_wavelengths(*jsd, rng);
      const double u_eta_b = rng.next_double();
      const double u_filter = rng.next_double();
      const double u_eta_s = rng.next_double();
      if (bucket_pair < 0 && u_eta_b < cfg->bucket.efficiency &&
          u_filter < filter_transmission(cfg->filter, ps.lambda_bucket_nm))
        bucket_pair = i;
      if (spect_pair < 0 && u_eta_s < cfg->spect.efficiency) {
        spect_pair = i;
        spect_px = ps.bin_spect;
      }
    }

    bool bucket_dark = false, spect_dark = false;
    int dark_px = -1;
    if (cfg->bucket.dark_prob_per_gate > 0.0)
      bucket_dark = rng.next_double() < cfg->bucket.dark_prob_per_gate;
    if (cfg->spect.dark_prob_per_gate > 0.0) {
      spect_dark = rng.next_double() < cfg->spect.dark_prob_per_gate;
      if (spect_dark)
        dark_px = static_cast<int>(
            rng.next_index(static_cast<std::uint32_t>(cfg->spect_grid.n_bins)));
    }
    bool bucket_ap = false, spect_ap = false;
    if (cfg->bucket.afterpulse_prob > 0.0)
      bucket_ap = rng.next_double() < cfg->bucket.afterpulse_prob;
    if (cfg->spect.afterpulse_prob > 0.0)
      spect_ap = rng.next_double() < cfg->spect.afterpulse_prob;

    if (!bucket_dead) {
      if (bucket_pair >= 0)
        out.bucket = {true, ClickCause::pair, {ClickCause::pair, g, bucket_pair}, -1};
      else if (bs.afterpulse_pending && bucket_ap)
        out.bucket = {true, ClickCause::afterpulse, bs.pending_origin, -1};
      else if (bucket_dark)
        out.bucket = {true, ClickCause::dark, {ClickCause::dark, g, -1}, -1};
    }
    if (!spect_dead) {
      if (spect_pair >= 0)
        out.spect = {true, ClickCause::pair, {ClickCause::pair, g, spect_pair}, spect_px};
      else if (ss.afterpulse_pending && spect_ap)
        out.spect = {true, ClickCause::afterpulse, ss.pending_origin, ss.pending_pixel};
      else if (spect_dark)
        out.spect = {true, ClickCause::dark, {ClickCause::dark, g, -1}, dark_px};
    }

    advance(bs, out.bucket, cfg->bucket.dead_time_gates);
    advance(ss, out.spect, cfg->spect.dead_time_gates);
    return out;
  }

  static void advance(DetectorState& st, const Click& c, int dead_gates) {
    if (st.dead_remaining > 0) --st.dead_remaining;
    if (c.fired) {
      st.dead_remaining = dead_gates;
      st.afterpulse_pending = true;
      st.pending_origin = c.origin;
      st.pending_pixel = c.pixel;
    } else {
      st.afterpulse_pending = false;
    }
  }
};

struct Accum {
  std::vector<std::uint64_t> aligned, shifted, singles_spect;
  std::uint64_t singles_bucket = 0;
  ClassTally tally;

  explicit Accum(int n_px)
      : aligned(n_px, 0), shifted(n_px, 0), singles_spect(n_px, 0) {}

  void merge(const Accum& o) {
    for (std::size_t i = 0; i < aligned.size(); ++i) {
      aligned[i] += o.aligned[i];
      shifted[i] += o.shifted[i];
      singles_spect[i] += o.singles_spect[i];
    }
    singles_bucket += o.singles_bucket;
    tally.true_pair += o.tally.true_pair;
    tally.multipair_accidental += o.tally.multipair_accidental;
    tally.dark_involved += o.tally.dark_involved;
    tally.afterpulse_involved += o.tally.afterpulse_involved;
  }
};

void classify_coincidence(const Click& b, const Click& s, ClassTally& t) {
  const bool same_pair =
      b.origin.root == ClickCause::pair && s.origin.root == ClickCause::pair &&
      b.origin.gate == s.origin.gate && b.origin.pair_index == s.origin.pair_index;
  if (b.cause == ClickCause::pair && s.cause == ClickCause::pair && same_pair) {
    ++t.true_pair;
    return;
  }
  if (b.origin.root == ClickCause::dark || s.origin.root == ClickCause::dark) {
    ++t.dark_involved;
    return;
  }
  if (same_pair) {
    // same pair echoed through an afterpulse chain: not a true coincidence
    ++t.afterpulse_involved;
    return;
  }
  ++t.multipair_accidental;
}

// Simulate one shard: gates [begin, end) are owned. Detector state enters
// through a warm-up replay from idle; the shifted pairs whose bucket gate
// lies past `end` are completed by recomputing those gates under the next
// shard's own warm-up rule, so both shards agree on them.
void simulate_shard(const GateSim& sim, std::uint64_t seed, std::uint64_t n_gates,
                    std::uint64_t begin, std::uint64_t end, Accum& acc) {
  const int shift = sim.cfg->shift_gates;
  const std::uint64_t warmup = static_cast<std::uint64_t>(
      std::max({1, sim.cfg->bucket.dead_time_gates, sim.cfg->spect.dead_time_gates}));

  DetectorState bs{}, ss{};
  for (std::uint64_t g = begin > warmup ? begin - warmup : 0; g < begin; ++g) {
    RandomStream rng = RandomStream::for_gate(seed, g);
    sim.step(g, bs, ss, rng);
  }

  // ring[g % shift] holds the spect click pixel of gate g - shift (-1 if none)
  std::vector<int> ring(static_cast<std::size_t>(shift), -1);

  for (std::uint64_t g = begin; g < end; ++g) {
    RandomStream rng = RandomStream::for_gate(seed, g);
    const GateOutcome o = sim.step(g, bs, ss, rng);

    if (o.bucket.fired) ++acc.singles_bucket;
    if (o.spect.fired) ++acc.singles_spect[o.spect.pixel];
    if (o.bucket.fired && o.spect.fired) {
      ++acc.aligned[o.spect.pixel];
      classify_coincidence(o.bucket, o.spect, acc.tally);
    }
    if (o.bucket.fired) {
      const int px = ring[g % shift];
      if (px >= 0) ++acc.shifted[px];
    }
    ring[g % shift] = o.spect.fired ? o.spect.pixel : -1;
  }

  if (end < n_gates) {
    DetectorState bs2{}, ss2{};
    for (std::uint64_t g = end > warmup ? end - warmup : 0; g < end; ++g) {
      RandomStream rng = RandomStream::for_gate(seed, g);
      sim.step(g, bs2, ss2, rng);
    }
    const std::uint64_t stop = std::min(end + static_cast<std::uint64_t>(shift), n_gates);
    for (std::uint64_t g = end; g < stop; ++g) {
      RandomStream rng = RandomStream::for_gate(seed, g);
      const GateOutcome o = sim.step(g, bs2, ss2, rng);
      if (o.bucket.fired && g >= begin + static_cast<std::uint64_t>(shift)) {
        const int px = ring[g % shift];
        if (px >= 0) ++acc.shifted[px];
      }
    }
  }
}

}  // namespace

GateOutcome simulate_gate(const SourceModel& /*src*/, const JointSpectralDensity& jsd,
                          const DetectionConfig& cfg, double mu,
                          std::uint64_t gate_index, DetectorState& bucket_state,
                          DetectorState& spect_state, RandomStream& rng) {
  if (!(mu >= 0.0)) throw std::domain_error("simulate_gate: mu must be >= 0");
  const GateSim sim{&jsd, &cfg, mu, std::exp(-mu)};
  return sim.step(gate_index, bucket_state, spect_state, rng);
}

CoincidenceData run_experiment(const SourceModel& src, const DetectionConfig& cfg,
                               double power_density_mw_mm2, std::uint64_t n_gates,
                               std::uint64_t seed, int workers) {
  if (n_gates < 1) throw SimulationError("run_experiment: n_gates must be >= 1");
  src.validate();
  cfg.validate();

  const WavelengthGrid bucket_grid = derive_bucket_grid(src, cfg.spect_grid);
  const JointSpectralDensity jsd = build_jsd(src, cfg.spect_grid, bucket_grid);
  const double mu = mean_pairs_per_pulse(power_density_mw_mm2, src);
  const GateSim sim{&jsd, &cfg, mu, std::exp(-mu)};

  const std::uint64_t n_shards = (n_gates + kShardGates - 1) / kShardGates;
  int n_workers = workers;
  if (n_workers <= 0)
    n_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_workers = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(n_workers), n_shards));

  const int n_px = cfg.spect_grid.n_bins;
  Accum total(n_px);

  if (n_workers == 1) {
    for (std::uint64_t s = 0; s < n_shards; ++s) {
      const std::uint64_t begin = s * kShardGates;
      const std::uint64_t end = std::min(begin + kShardGates, n_gates);
      simulate_shard(sim, seed, n_gates, begin, end, total);
    }
  } else {
    std::vector<Accum> local(static_cast<std::size_t>(n_workers), Accum(n_px));
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (;;) {
            const std::uint64_t s = next.fetch_add(1);
            if (s >= n_shards || failed.load()) break;
            const std::uint64_t begin = s * kShardGates;
            const std::uint64_t end = std::min(begin + kShardGates, n_gates);
            simulate_shard(sim, seed, n_gates, begin, end, local[w]);
          }
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    // element-wise integer addition: identical totals for any merge order
    for (const Accum& a : local) total.merge(a);
  }

  CoincidenceData out;
  out.spect_grid = cfg.spect_grid;
  out.aligned_hist = std::move(total.aligned);
  out.shifted_hist = std::move(total.shifted);
  out.singles_spect_hist = std::move(total.singles_spect);
  out.singles_bucket = total.singles_bucket;
  out.n_gates = n_gates;
  out.seed = seed;
  out.power_density_mw_mm2 = power_density_mw_mm2;
  out.shift_gates = cfg.shift_gates;
  out.class_tally = total.tally;
  return out;
}

}  // namespace qgs
