// Command-line front end: car-sweep, ghost, noise-spectrum, resolve-sweep, fit.
// All outputs are plain CSV/JSON files; every command is deterministic under a
// fixed (config, seed) and embeds the fully-resolved config in its JSON report.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qgs/analysis.hpp"
#include "qgs/config.hpp"
#include "qgs/detection.hpp"
#include "qgs/errors.hpp"
#include "qgs/io.hpp"
#include "qgs/noise.hpp"
#include "qgs/source.hpp"

namespace {

using nlohmann::json;

// exit-code families: 1 config, 2 simulation, 3 analysis, 4 i/o
int code_for(const std::exception& e, int phase_default) {
  if (dynamic_cast<const qgs::ConfigError*>(&e)) return 1;
  if (dynamic_cast<const qgs::SimulationError*>(&e)) return 2;
  if (dynamic_cast<const qgs::AnalysisError*>(&e)) return 3;
  if (dynamic_cast<const qgs::IoError*>(&e)) return 4;
  return phase_default;
}

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_workers = true) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--seed", o.seed, "override the configured seed");
  if (with_workers)
    cmd->add_option("--workers", o.workers, "simulation worker count (0 = all cores)");
  cmd->add_option("--out", o.out_dir, "output directory");
}

qgs::RunConfig resolve_config(const CommonOpts& o) {
  qgs::RunConfig cfg =
      o.config_path.empty() ? qgs::parse_config("") : qgs::load_config_file(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

std::string out_path(const CommonOpts& o, const std::string& name) {
  std::filesystem::create_directories(o.out_dir);
  return (std::filesystem::path(o.out_dir) / name).string();
}

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json classification_report(const qgs::CoincidenceData& data, const qgs::RunConfig& cfg) {
  const qgs::NoiseClassification cls =
      qgs::classify_noise(data, cfg.analysis.car_min_threshold);
  json r;
  r["car"] = number_or_null(cls.car);
  r["car_err"] = cls.car_err;
  r["regime"] = qgs::to_string(cls.regime);
  r["n_white"] = cls.n_white;
  r["n_colored"] = cls.n_colored;
  if (data.shifted_total() > 0) {
    const qgs::Spectrum noise =
        qgs::noise_spectrum(data, cfg.analysis.sg_window, cfg.analysis.sg_order);
    const qgs::WavelengthGrid bg =
        qgs::derive_bucket_grid(cfg.source, cfg.detection.spect_grid);
    const qgs::JointSpectralDensity jsd =
        qgs::build_jsd(cfg.source, cfg.detection.spect_grid, bg);
    r["flatness"] = qgs::flatness(noise);
    r["source_distance_l1"] =
        qgs::l1_distance(noise, qgs::source_marginal(jsd, qgs::Arm::spect));
  } else {
    r["flatness"] = nullptr;
    r["source_distance_l1"] = nullptr;
  }
  return r;
}

int cmd_car_sweep(const CommonOpts& o) {
  int phase = 1;
  try {
    const qgs::RunConfig cfg = resolve_config(o);

    phase = 2;
    std::vector<qgs::CoincidenceData> runs;
    for (double p : cfg.power_densities)
      runs.push_back(
          qgs::run_experiment(cfg.source, cfg.detection, p, cfg.n_gates, cfg.seed, o.workers));

    phase = 3;
    std::string csv = "power_density_mw_mm2,car,car_err,n_cc,n_acc,regime\n";
    std::vector<qgs::CarPoint> points;
    json jpoints = json::array();
    for (const auto& data : runs) {
      const qgs::NoiseClassification cls =
          qgs::classify_noise(data, cfg.analysis.car_min_threshold);
      qgs::CarPoint cp;
      cp.power_density = data.power_density_mw_mm2;
      cp.n_cc = data.aligned_total();
      cp.n_acc = data.shifted_total();
      if (cp.n_acc > 0) {
        cp = qgs::compute_car(data);
        points.push_back(cp);
      } else {
        cp.car = std::numeric_limits<double>::infinity();
        cp.car_err = 0.0;
      }
      csv += qgs::format_double(cp.power_density) + ',' + qgs::format_double(cp.car) +
             ',' + qgs::format_double(cp.car_err) + ',' + std::to_string(cp.n_cc) + ',' +
             std::to_string(cp.n_acc) + ',' + qgs::to_string(cls.regime) + '\n';
      jpoints.push_back({{"power_density_mw_mm2", cp.power_density},
                         {"car", number_or_null(cp.car)},
                         {"car_err", cp.car_err},
                         {"n_cc", cp.n_cc},
                         {"n_acc", cp.n_acc},
                         {"regime", qgs::to_string(cls.regime)},
                         {"n_white", cls.n_white},
                         {"n_colored", cls.n_colored}});
    }

    json report;
    report["config"] = qgs::config_to_json(cfg);
    report["points"] = jpoints;
    try {
      const qgs::ExpDecayFit fit = qgs::fit_exp_decay(points, cfg.analysis.tail_start);
      report["fit"] = {{"A", fit.A},
                       {"P0", number_or_null(fit.P0)},
                       {"car_min", fit.car_min},
                       {"decaying", fit.decaying},
                       {"n_points_used", fit.n_points_used},
                       {"covariance",
                        {{fit.covariance[0][0], fit.covariance[0][1]},
                         {fit.covariance[1][0], fit.covariance[1][1]}}}};
    } catch (const qgs::AnalysisError& e) {
      report["fit"] = nullptr;
      report["fit_skipped"] = e.what();
    }

    phase = 4;
    qgs::write_text_file(out_path(o, "car_sweep.csv"), csv);
    qgs::write_text_file(out_path(o, "car_sweep_report.json"), report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "car-sweep: " << e.what() << "\n";
    return code_for(e, phase);
  }
}

int cmd_ghost(const CommonOpts& o, std::optional<double> power, bool subtract,
              bool map_axis, const std::string& dump_jsd,
              const std::string& dump_coinc) {
  int phase = 1;
  try {
    const qgs::RunConfig cfg = resolve_config(o);
    double p;
    if (power)
      p = *power;
    else if (!cfg.power_densities.empty())
      p = cfg.power_densities.front();
    else
      throw qgs::ConfigError("ghost: no --power-density given and none configured");
    if (!(p >= 0)) throw qgs::ConfigError("ghost: power density must be >= 0");

    phase = 2;
    const qgs::CoincidenceData data =
        qgs::run_experiment(cfg.source, cfg.detection, p, cfg.n_gates, cfg.seed, o.workers);

    phase = 3;
    qgs::GhostOptions opts;
    opts.subtract_accidentals = subtract;
    opts.sg_window = cfg.analysis.sg_window;
    opts.sg_order = cfg.analysis.sg_order;
    opts.map_to_bucket_arm = map_axis;
    opts.lambda_p_nm = cfg.source.pump.lambda_p_nm;
    const qgs::Spectrum ghost = qgs::reconstruct_ghost(data, opts);

    json report;
    report["config"] = qgs::config_to_json(cfg);
    report["power_density_mw_mm2"] = p;
    report["subtract_accidentals"] = subtract;
    report["map_to_bucket_arm"] = map_axis;
    report["classification"] = classification_report(data, cfg);
    try {
      report["ghost_fwhm_nm"] = qgs::empirical_fwhm(ghost);
    } catch (const std::exception&) {
      report["ghost_fwhm_nm"] = nullptr;
    }

    phase = 4;
    qgs::write_spectrum_csv(out_path(o, "ghost.csv"), ghost);
    qgs::write_text_file(out_path(o, "ghost_report.json"), report.dump(2) + "\n");
    if (!dump_coinc.empty()) qgs::write_coincidence_json(dump_coinc, data);
    if (!dump_jsd.empty()) {
      const qgs::WavelengthGrid bg =
          qgs::derive_bucket_grid(cfg.source, cfg.detection.spect_grid);
      qgs::write_jsd_csv(dump_jsd, qgs::build_jsd(cfg.source, cfg.detection.spect_grid, bg));
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ghost: " << e.what() << "\n";
    return code_for(e, phase);
  }
}

int cmd_noise_spectrum(const CommonOpts& o, std::optional<double> power) {
  int phase = 1;
  try {
    const qgs::RunConfig cfg = resolve_config(o);
    double p;
    if (power)
      p = *power;
    else if (!cfg.power_densities.empty())
      p = cfg.power_densities.front();
    else
      throw qgs::ConfigError("noise-spectrum: no --power-density given and none configured");

    phase = 2;
    const qgs::CoincidenceData data =
        qgs::run_experiment(cfg.source, cfg.detection, p, cfg.n_gates, cfg.seed, o.workers);

    phase = 3;
    const qgs::Spectrum noise =
        qgs::noise_spectrum(data, cfg.analysis.sg_window, cfg.analysis.sg_order);
    json report;
    report["config"] = qgs::config_to_json(cfg);
    report["power_density_mw_mm2"] = p;
    report["classification"] = classification_report(data, cfg);

    phase = 4;
    qgs::write_spectrum_csv(out_path(o, "noise_spectrum.csv"), noise);
    qgs::write_text_file(out_path(o, "noise_report.json"), report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "noise-spectrum: " << e.what() << "\n";
    return code_for(e, phase);
  }
}

int cmd_resolve_sweep(const CommonOpts& o) {
  int phase = 1;
  try {
    const qgs::RunConfig cfg = resolve_config(o);

    phase = 3;
    const qgs::WavelengthGrid& grid = cfg.detection.spect_grid;
    const qgs::Spectrum source = qgs::normalize_area(qgs::gaussian_spectrum(
        grid, cfg.source.center_spect_nm, cfg.source.jsd_marginal_fwhm_nm));
    const qgs::RPMap map = qgs::sweep_resolving_power(
        cfg.analysis.separations_nm, cfg.analysis.noise_fractions,
        cfg.analysis.peak_fwhm_nm, source, grid);

    json summary = json::array();
    for (std::size_t i = 0; i < map.separations_nm.size(); ++i) {
      json row;
      row["separation_nm"] = map.separations_nm[i];
      row["n_star"] = nullptr;
      row["status"] = "resolved_throughout";
      for (std::size_t j = 0; j < map.noise_fractions.size(); ++j) {
        const double rp = map.rp_at(i, j);
        if (std::isnan(rp)) continue;
        if (rp <= 1.0) {
          if (j == 0) {
            row["status"] = "unresolved_at_zero";
            row["n_star"] = 0.0;
          } else {
            const double rp0 = map.rp_at(i, j - 1);
            const double n0 = map.noise_fractions[j - 1];
            const double n1 = map.noise_fractions[j];
            row["status"] = "crosses";
            row["n_star"] = n0 + (rp0 - 1.0) * (n1 - n0) / (rp0 - rp);
          }
          break;
        }
      }
      summary.push_back(row);
    }

    json report;
    report["config"] = qgs::config_to_json(cfg);
    report["n_nonconverged"] = map.n_nonconverged;
    report["fitter"] = {{"max_iterations", 500},
                        {"residual_tolerance", 1e-10},
                        {"step_tolerance", 1e-12}};
    report["n_star"] = summary;

    phase = 4;
    qgs::write_rpmap_csv(out_path(o, "rp_map.csv"), map);
    qgs::write_text_file(out_path(o, "rp_report.json"), report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "resolve-sweep: " << e.what() << "\n";
    return code_for(e, phase);
  }
}

int cmd_fit(const CommonOpts& o, const std::string& spectrum_path, int n_peaks) {
  int phase = 4;
  try {
    const qgs::Spectrum s = qgs::read_spectrum_csv(spectrum_path);

    phase = 3;
    const qgs::GaussianFitResult fit = qgs::fit_gaussians(s, n_peaks);
    json report;
    report["input"] = spectrum_path;
    report["n_peaks"] = n_peaks;
    report["offset"] = fit.offset;
    json jp = json::array();
    for (const auto& pk : fit.peaks)
      jp.push_back({{"amplitude", pk.amplitude},
                    {"center_nm", pk.center_nm},
                    {"sigma_nm", pk.sigma_nm},
                    {"fwhm_nm", qgs::sigma_to_fwhm(pk.sigma_nm)}});
    report["peaks"] = jp;
    report["residual_norm"] = fit.residual_norm;
    report["converged"] = fit.converged;
    report["iterations"] = fit.iterations;
    if (n_peaks == 2) report["resolving_power"] = qgs::resolving_power(fit);

    phase = 4;
    qgs::write_text_file(out_path(o, "fit_report.json"), report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return code_for(e, phase);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum ghost spectroscopy simulator and analysis toolkit"};
  app.require_subcommand(1);

  CommonOpts car_o, ghost_o, noise_o, sweep_o, fit_o;
  std::optional<double> ghost_power, noise_power;
  bool ghost_subtract = false, ghost_map = false;
  std::string ghost_dump_jsd, ghost_dump_coinc;
  std::string fit_spectrum;
  int fit_peaks = 1;

  CLI::App* car = app.add_subcommand("car-sweep",
                                     "coincidence-to-accidental ratio vs pump power");
  add_common(car, car_o);

  CLI::App* ghost = app.add_subcommand("ghost", "reconstruct the ghost spectrum");
  add_common(ghost, ghost_o);
  ghost->add_option("--power-density", ghost_power, "pump power density (mW/mm^2)");
  ghost->add_flag("--subtract", ghost_subtract, "subtract shifted-window accidentals");
  ghost->add_flag("--map-bucket-arm", ghost_map, "remap onto the bucket-arm axis");
  ghost->add_option("--dump-jsd", ghost_dump_jsd, "write the sampling density CSV");
  ghost->add_option("--dump-coincidences", ghost_dump_coinc,
                    "write the raw coincidence histograms JSON");

  CLI::App* noise = app.add_subcommand("noise-spectrum",
                                       "extract and classify the accidental spectrum");
  add_common(noise, noise_o);
  noise->add_option("--power-density", noise_power, "pump power density (mW/mm^2)");

  CLI::App* sweep = app.add_subcommand("resolve-sweep",
                                       "two-peak resolving power vs separation and noise");
  add_common(sweep, sweep_o, /*with_workers=*/false);

  CLI::App* fit = app.add_subcommand("fit", "fit Gaussian peaks to a spectrum CSV");
  add_common(fit, fit_o, /*with_workers=*/false);
  fit->add_option("--spectrum", fit_spectrum, "input spectrum CSV")->required();
  fit->add_option("--peaks", fit_peaks, "number of peaks (1 or 2)")
      ->check(CLI::Range(1, 2));

  CLI11_PARSE(app, argc, argv);

  if (car->parsed()) return cmd_car_sweep(car_o);
  if (ghost->parsed())
    return cmd_ghost(ghost_o, ghost_power, ghost_subtract, ghost_map, ghost_dump_jsd,
                     ghost_dump_coinc);
  if (noise->parsed()) return cmd_noise_spectrum(noise_o, noise_power);
  if (sweep->parsed()) return cmd_resolve_sweep(sweep_o);
  if (fit->parsed()) return cmd_fit(fit_o, fit_spectrum, fit_peaks);
  return 1;
}
