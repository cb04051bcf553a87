// evsim: event-vision pixel simulation and S-curve characterization CLI.
//
// Subcommands: calibrate-noise, scurve, estimate, dark-current, ingest, plot.
// Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "evs/config.hpp"
#include "evs/fit.hpp"
#include "evs/inference.hpp"
#include "evs/io.hpp"
#include "evs/runner.hpp"
#include "evs/scurve.hpp"
#include "evs/svg.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string out_dir = "out";
  uint64_t seed = 1;
  int jobs = 1;
  bool seed_given = false;
  bool out_given = false;
  bool jobs_given = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--out", f.out_dir, "output directory")
      ->each([&](const std::string&) { f.out_given = true; });
  cmd->add_option("--seed", f.seed, "base RNG seed")
      ->each([&](const std::string&) { f.seed_given = true; });
  cmd->add_option("--jobs", f.jobs, "worker threads")
      ->check(CLI::PositiveNumber)
      ->each([&](const std::string&) { f.jobs_given = true; });
}

evs::config::ExperimentConfig load_config_or_preset(const std::string& config_path,
                                                    const std::string& preset_name,
                                                    const CommonFlags& common) {
  evs::config::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = evs::config::load_experiment_file(config_path);
  } else if (!preset_name.empty()) {
    cfg = evs::config::preset(evs::config::parse_kind(preset_name));
  } else {
    throw std::invalid_argument("need --config <file> or --preset <kind>");
  }
  if (common.seed_given) cfg.base_seed = common.seed;
  if (common.out_given) cfg.out_dir = common.out_dir;
  if (common.jobs_given) cfg.jobs = common.jobs;
  return cfg;
}

int run_experiment_cmd(const evs::config::ExperimentConfig& cfg) {
  auto summary = evs::runner::run_experiment(cfg);
  std::cout << summary.text;
  for (const auto& p : summary.artifacts) std::cout << "wrote " << p << "\n";
  return summary.all_pass ? 0 : 2;
}

std::string polarity_name(evs::Polarity p) {
  return p == evs::Polarity::on ? "on" : "off";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-vision pixel simulator and S-curve characterization toolkit"};
  app.require_subcommand(1);

  // ---- calibrate-noise ----
  auto* cal_cmd = app.add_subcommand(
      "calibrate-noise", "find noise sigma matching target background activity");
  CommonFlags cal_common;
  std::vector<double> cal_f3db = {2000.0, 200.0, 50.0};
  std::vector<double> cal_targets = {0.5, 0.02};
  evs::CalibrationOptions cal_opt;
  add_common(cal_cmd, cal_common);
  cal_cmd->add_option("--f3db", cal_f3db, "filter corner frequencies, Hz")->delimiter(',');
  cal_cmd->add_option("--target", cal_targets, "background activity targets, Hz")
      ->delimiter(',');
  cal_cmd->add_option("--run-duration", cal_opt.run_duration_s, "seconds per run");
  cal_cmd->add_option("--n-runs", cal_opt.n_runs, "runs averaged per evaluation");
  cal_cmd->add_option("--tolerance", cal_opt.rel_tolerance, "relative BA tolerance");
  double cal_refr_us = cal_opt.refractory_s * 1e6;
  cal_cmd->add_option("--refractory-us", cal_refr_us, "refractory period, microseconds");

  // ---- scurve ----
  auto* sc_cmd = app.add_subcommand("scurve", "run a configured S-curve experiment");
  CommonFlags sc_common;
  std::string sc_config, sc_preset;
  bool sc_record = false, sc_no_svg = false;
  add_common(sc_cmd, sc_common);
  sc_cmd->add_option("--config", sc_config, "experiment config file")
      ->check(CLI::ExistingFile);
  sc_cmd->add_option("--preset", sc_preset,
                     "ideal|noise|mismatch|refractory|robustness|dark-current|custom");
  sc_cmd->add_flag("--record", sc_record, "also export events.csv + schedule.csv (rptp)");
  sc_cmd->add_flag("--no-svg", sc_no_svg, "skip plot output");

  // ---- estimate ----
  auto* est_cmd = app.add_subcommand("estimate", "estimate thresholds from an S-curve CSV");
  std::string est_curve, est_out;
  double est_epsilon = 0.01;
  est_cmd->add_option("--curve", est_curve, "S-curve CSV path")
      ->required()
      ->check(CLI::ExistingFile);
  est_cmd->add_option("--epsilon", est_epsilon, "plateau tolerance");
  est_cmd->add_option("--out", est_out, "estimate CSV output path (default: print only)");

  // ---- dark-current ----
  auto* dark_cmd =
      app.add_subcommand("dark-current", "dark-current inference from an S-curve family");
  CommonFlags dark_common;
  std::string dark_config;
  std::vector<double> dark_baselines;
  double dark_planted = -1.0, dark_reference = -1.0;
  add_common(dark_cmd, dark_common);
  dark_cmd->add_option("--config", dark_config, "experiment config file")
      ->check(CLI::ExistingFile);
  dark_cmd->add_option("--baselines-lux", dark_baselines, "family baselines, lux")
      ->delimiter(',');
  dark_cmd->add_option("--planted-fa", dark_planted, "simulated dark current, fA");
  dark_cmd->add_option("--reference-lux", dark_reference, "theta_ref curve baseline, lux");

  // ---- ingest ----
  auto* ing_cmd =
      app.add_subcommand("ingest", "build an S-curve from recorded events + schedule");
  CommonFlags ing_common;
  evs::io::RecordedDataset ds;
  std::string ing_polarity = "on";
  double ing_epsilon = 0.01;
  bool ing_estimate = false;
  add_common(ing_cmd, ing_common);
  ing_cmd->add_option("--events", ds.events_path, "event CSV (t_us,pixel_id,polarity)")
      ->required()
      ->check(CLI::ExistingFile);
  ing_cmd
      ->add_option("--schedule", ds.schedule_path,
                   "pulse schedule CSV (pulse_index,t_start_us,t_end_us,...)")
      ->required()
      ->check(CLI::ExistingFile);
  ing_cmd->add_option("--n-pixels", ds.n_pixels, "ROI pixel count (default: max id + 1)");
  ing_cmd->add_option("--polarity", ing_polarity, "counted polarity: on|off");
  ing_cmd->add_option("--slack-s", ds.slack_s, "allowed event time outside schedule span");
  ing_cmd->add_option("--refractory-note", ds.refractory_note,
                      "opaque camera refractory setting, kept in metadata");
  ing_cmd->add_flag("--estimate", ing_estimate, "also fit thresholds");
  ing_cmd->add_option("--epsilon", ing_epsilon, "plateau tolerance for --estimate");

  // ---- plot ----
  auto* plot_cmd = app.add_subcommand("plot", "render S-curve CSVs to one SVG");
  std::vector<std::string> plot_curves;
  std::string plot_out = "plot.svg", plot_title = "event response probability";
  double plot_epsilon = 0.01;
  bool plot_no_markers = false;
  plot_cmd->add_option("--curve", plot_curves, "S-curve CSV (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "SVG output path");
  plot_cmd->add_option("--title", plot_title, "chart title");
  plot_cmd->add_flag("--no-markers", plot_no_markers, "omit nct/theta_100 markers");
  plot_cmd->add_option("--epsilon", plot_epsilon, "plateau tolerance for markers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(cal_cmd)) {
      cal_opt.refractory_s = cal_refr_us * 1e-6;
      cal_opt.base_seed = cal_common.seed;
      std::vector<std::pair<double, double>> grid;
      for (double f : cal_f3db)
        for (double t : cal_targets) grid.emplace_back(f, t);
      std::vector<evs::NoiseCalibration> rows(grid.size());
      const size_t n_threads =
          std::min<size_t>(static_cast<size_t>(std::max(1, cal_common.jobs)), grid.size());
      if (n_threads <= 1) {
        for (size_t i = 0; i < grid.size(); ++i)
          rows[i] = evs::calibrate_noise(grid[i].first, grid[i].second, cal_opt);
      } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(n_threads);
        for (size_t t = 0; t < n_threads; ++t)
          pool.emplace_back([&, t] {
            try {
              for (size_t i = t; i < grid.size(); i += n_threads)
                rows[i] = evs::calibrate_noise(grid[i].first, grid[i].second, cal_opt);
            } catch (...) {
              errs[t] = std::current_exception();
            }
          });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
          if (e) std::rethrow_exception(e);
      }
      fs::create_directories(cal_common.out_dir);
      const std::string out = (fs::path(cal_common.out_dir) / "calibration.csv").string();
      evs::io::write_calibration_csv(out, rows);
      for (const auto& r : rows)
        std::printf("f3db %8g Hz  target %5g Hz  sigma %.6g  achieved %.4g Hz\n",
                    r.f3db_hz, r.target_ba_hz, r.calibrated_sigma, r.achieved_ba_hz);
      std::cout << "wrote " << out << "\n";
      return 0;
    }

    if (app.got_subcommand(sc_cmd)) {
      auto cfg = load_config_or_preset(sc_config, sc_preset, sc_common);
      if (sc_record) cfg.record_events = true;
      if (sc_no_svg) cfg.emit_svg = false;
      return run_experiment_cmd(cfg);
    }

    if (app.got_subcommand(dark_cmd)) {
      auto cfg = dark_config.empty()
                     ? evs::config::preset(evs::config::ExperimentKind::dark_current)
                     : evs::config::load_experiment_file(dark_config);
      if (cfg.kind != evs::config::ExperimentKind::dark_current)
        throw std::invalid_argument("dark-current: config must have kind = dark-current");
      if (dark_common.seed_given) cfg.base_seed = dark_common.seed;
      if (dark_common.out_given) cfg.out_dir = dark_common.out_dir;
      if (dark_common.jobs_given) cfg.jobs = dark_common.jobs;
      if (!dark_baselines.empty()) cfg.dark_baselines_lux = dark_baselines;
      if (dark_planted >= 0.0) cfg.dark_planted_fa = dark_planted;
      if (dark_reference > 0.0) cfg.dark_reference_lux = dark_reference;
      return run_experiment_cmd(cfg);
    }

    if (app.got_subcommand(est_cmd)) {
      evs::SCurve curve = evs::io::read_scurve_csv(est_curve);
      evs::ThresholdEstimate est = evs::estimate_thresholds(curve, est_epsilon);
      std::printf("polarity=%s nct_50=%.6g gauss_mu=%.6g gauss_sigma=%.6g theta_100=%.6g"
                  " epsilon=%.3g flags=%s\n",
                  polarity_name(curve.polarity).c_str(), est.nct_50, est.gauss_mu,
                  est.gauss_sigma, est.theta_100, est.epsilon,
                  evs::io::estimate_flags(est).c_str());
      if (!est_out.empty())
        evs::io::write_estimate_csv(est_out, {{polarity_name(curve.polarity), est}});
      return 0;
    }

    if (app.got_subcommand(ing_cmd)) {
      if (ing_polarity == "on")
        ds.polarity = evs::Polarity::on;
      else if (ing_polarity == "off")
        ds.polarity = evs::Polarity::off;
      else
        throw std::invalid_argument("--polarity must be on or off");
      evs::CountingRule rule{evs::CountingRule::Mode::rptp_window, 0.040};
      evs::SCurve curve = evs::io::ingest_recorded(ds, rule);
      fs::create_directories(ing_common.out_dir);
      const std::string out =
          (fs::path(ing_common.out_dir) / "scurve_recorded.csv").string();
      evs::io::write_scurve_csv(out, curve);
      std::cout << "wrote " << out << " (" << curve.points.size() << " contrast levels)\n";
      for (const auto& n : curve.notes) std::cout << n << "\n";
      if (ing_estimate) {
        evs::ThresholdEstimate est = evs::estimate_thresholds(curve, ing_epsilon);
        const std::string est_path =
            (fs::path(ing_common.out_dir) / "estimate_recorded.csv").string();
        evs::io::write_estimate_csv(est_path, {{polarity_name(curve.polarity), est}});
        std::printf("nct_50=%.6g theta_100=%.6g flags=%s\n", est.nct_50, est.theta_100,
                    evs::io::estimate_flags(est).c_str());
        std::cout << "wrote " << est_path << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(plot_cmd)) {
      std::vector<evs::SCurve> curves;
      std::vector<evs::ThresholdEstimate> estimates;
      for (const auto& p : plot_curves) {
        curves.push_back(evs::io::read_scurve_csv(p));
        if (!plot_no_markers)
          estimates.push_back(evs::estimate_thresholds(curves.back(), plot_epsilon));
      }
      evs::svg::PlotOptions opt;
      opt.title = plot_title;
      evs::svg::emit_plots(plot_out, curves, estimates, opt);
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
