#pragma once
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "fit.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "scurve.hpp"
#include "svg.hpp"

namespace evs::runner {

struct RunSummary {
  config::ExperimentKind kind = config::ExperimentKind::custom;
  std::vector<std::pair<std::string, SCurve>> curves;  // label -> curve
  std::vector<std::pair<std::string, ThresholdEstimate>> estimates;  // parallel to curves
  std::vector<NoiseCalibration> calibrations;
  DarkCurrentEstimate dark;
  bool has_dark = false;
  std::vector<std::string> checks;  // "PASS: ..." / "FAIL: ..."
  bool all_pass = true;
  std::vector<std::string> artifacts;
  std::string text;  // rendered summary
};

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline double grid_step(const SCurve& curve) {
  double step = 0.0;
  for (size_t i = 1; i < curve.points.size(); ++i)
    step = std::max(step, curve.points[i].log_contrast - curve.points[i - 1].log_contrast);
  return step;
}

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ' ' || c == '/' || c == '\\') c = '_';
  return s;
}

struct Recording {
  std::vector<io::EventRecord> events;
  std::vector<io::ScheduleRow> schedule;
};

// Replays the rptp sweep with the measurement seeds and lays the per-contrast
// trains end to end on a shared microsecond clock, producing the recorded-data
// file pair that ingest_recorded() accepts.
inline Recording record_rptp_sweep(const config::ExperimentConfig& cfg) {
  Recording rec;
  const auto& proto = cfg.stimulus.rptp;
  const int64_t dt_us = llround(cfg.pixel.dt_s * 1e6);
  int64_t offset_us = 0, pulse_index = 0;
  for (double c : cfg.sweep.linear_contrasts) {
    auto plan = ::evs::detail::plan_rptp(proto, c, cfg.estimator.polarity, cfg.pixel.dt_s,
                                         cfg.pixel.warmup_s, cfg.rule.window_s);
    auto current = to_photocurrent(plan.lux, cfg.photometry);
    std::vector<EventStream> streams;
    if (cfg.use_array) {
      streams = simulate_array(current, cfg.array).streams;
    } else {
      streams.push_back(simulate_pixel(current, cfg.pixel));
    }
    for (const auto& st : streams)
      for (const auto& ev : st.events)
        rec.events.push_back({::evs::detail::to_us(ev.t_s) + offset_us, st.pixel_id,
                              ev.polarity == Polarity::on ? 1 : 0});
    for (const auto& w : plan.windows)
      rec.schedule.push_back({pulse_index++, w.start_us + offset_us, w.end_us + offset_us,
                              c, proto.baseline_lux});
    offset_us += plan.lux.total_samples() * dt_us;
  }
  return rec;
}

}  // namespace detail

inline RunSummary run_experiment(config::ExperimentConfig cfg) {
  using config::ExperimentKind;
  cfg.validate();
  if (cfg.record_events && cfg.stimulus.type != config::StimulusConfig::Type::rptp)
    throw std::invalid_argument(
        "record_events: only the rptp stimulus has a pulse schedule to export");
  if (cfg.record_events && cfg.kind == ExperimentKind::dark_current)
    throw std::invalid_argument("record_events: not supported for the dark-current sweep");

  RunSummary out;
  out.kind = cfg.kind;

  // --- calibration stage -------------------------------------------------
  if (cfg.target_ba_hz > 0.0) {
    CalibrationOptions opt = cfg.calib;
    opt.base_seed = cfg.base_seed;
    opt.dt_s = cfg.pixel.dt_s;
    opt.warmup_s = cfg.pixel.warmup_s;
    NoiseCalibration cal = calibrate_noise(cfg.pixel.f3db_hz, cfg.target_ba_hz, opt);
    cfg.pixel.noise_sigma = cal.calibrated_sigma;
    out.calibrations.push_back(cal);
  }
  cfg.pixel.seed = cfg.base_seed;
  cfg.array.base_seed = cfg.base_seed;
  cfg.array.base = cfg.pixel;

  const Polarity pol = cfg.estimator.polarity;
  const double th_true = pol == Polarity::on ? cfg.pixel.theta_on : cfg.pixel.theta_off;

  auto measure_sw = [&](const SquareWaveProtocol& proto) {
    CountingRule rule{CountingRule::Mode::square_wave_per_edge, cfg.rule.window_s};
    return cfg.use_array ? measure_scurve(cfg.sweep, proto, cfg.array, pol, cfg.photometry,
                                          rule, cfg.jobs)
                         : measure_scurve(cfg.sweep, proto, cfg.pixel, pol, cfg.photometry,
                                          rule, cfg.jobs);
  };
  auto measure_rptp = [&](const RpTpProtocol& proto) {
    CountingRule rule{CountingRule::Mode::rptp_window, cfg.rule.window_s};
    return cfg.use_array ? measure_scurve(cfg.sweep, proto, cfg.array, pol, cfg.photometry,
                                          rule, cfg.jobs)
                         : measure_scurve(cfg.sweep, proto, cfg.pixel, pol, cfg.photometry,
                                          rule, cfg.jobs);
  };

  auto add_curve = [&](const std::string& label, SCurve curve) {
    out.estimates.emplace_back(label, estimate_thresholds(curve, cfg.estimator.epsilon));
    out.curves.emplace_back(label, std::move(curve));
  };
  auto check = [&](bool ok, const std::string& what) {
    out.checks.push_back(std::string(ok ? "PASS: " : "FAIL: ") + what);
    if (!ok) out.all_pass = false;
  };

  // --- measurement stage --------------------------------------------------
  switch (cfg.kind) {
    case ExperimentKind::robustness: {
      add_curve("sw", measure_sw(cfg.stimulus.sw));
      add_curve("rptp", measure_rptp(cfg.stimulus.rptp));
      break;
    }
    case ExperimentKind::dark_current: {
      std::vector<double> baselines = cfg.dark_baselines_lux;
      baselines.push_back(cfg.dark_reference_lux);
      cfg.pixel.dark_current_a = cfg.dark_planted_fa * 1e-15;
      cfg.array.base = cfg.pixel;
      for (double lux : baselines) {
        RpTpProtocol proto = cfg.stimulus.rptp;
        proto.baseline_lux = lux;
        add_curve(detail::sanitize(detail::fmt("%g", lux) + "lx"), measure_rptp(proto));
      }
      break;
    }
    default: {
      if (cfg.stimulus.type == config::StimulusConfig::Type::square_wave)
        add_curve("sw", measure_sw(cfg.stimulus.sw));
      else
        add_curve("rptp", measure_rptp(cfg.stimulus.rptp));
      break;
    }
  }

  // --- inference + expectations --------------------------------------------
  if (cfg.kind == ExperimentKind::dark_current) {
    const auto& ref_est = out.estimates.back().second;
    if (ref_est.never_reaches_one || !std::isfinite(ref_est.theta_100))
      throw std::runtime_error("dark-current: the reference curve never plateaus; "
                               "widen the sweep or add trials");
    const double theta_ref = ref_est.theta_100;
    std::vector<std::pair<double, double>> family;
    for (size_t i = 0; i + 1 < out.estimates.size(); ++i) {
      const auto& e = out.estimates[i].second;
      if (e.never_reaches_one || !std::isfinite(e.theta_100))
        throw std::runtime_error("dark-current: curve '" + out.estimates[i].first +
                                 "' never plateaus; widen the sweep or add trials");
      family.emplace_back(cfg.dark_baselines_lux[i], e.theta_100);
    }
    out.dark = infer_dark_current(family, theta_ref, cfg.photometry);
    out.has_dark = true;
    if (cfg.dark_planted_fa > 0.0) {
      const double rel = std::abs(out.dark.mean_a * 1e15 - cfg.dark_planted_fa) /
                         cfg.dark_planted_fa;
      check(rel <= 0.10, "recovered dark current " +
                             detail::fmt("%.3g", out.dark.mean_a * 1e15) +
                             " fA within 10% of planted " +
                             detail::fmt("%.3g", cfg.dark_planted_fa) + " fA");
    }
  } else {
    const auto& est = out.estimates.front().second;
    const SCurve& curve = out.curves.front().second;
    switch (cfg.kind) {
      case ExperimentKind::ideal: {
        const double step = detail::grid_step(curve);
        check(std::isfinite(est.theta_100) && std::abs(est.theta_100 - th_true) <= step,
              "theta_100 " + detail::fmt("%.4f", est.theta_100) +
                  " within one grid step of " + detail::fmt("%.2f", th_true));
        check(std::isfinite(est.nct_50) && std::abs(est.nct_50 - th_true) <= step,
              "nct_50 " + detail::fmt("%.4f", est.nct_50) + " within one grid step of " +
                  detail::fmt("%.2f", th_true));
        break;
      }
      case ExperimentKind::noise:
        check(std::isfinite(est.nct_50) && est.nct_50 < th_true,
              "nct_50 " + detail::fmt("%.4f", est.nct_50) + " shifted left of theta " +
                  detail::fmt("%.2f", th_true));
        break;
      case ExperimentKind::mismatch:
        check(std::isfinite(est.theta_100) && est.theta_100 > th_true,
              "theta_100 " + detail::fmt("%.4f", est.theta_100) +
                  " overshoots theta " + detail::fmt("%.2f", th_true) +
                  " at short refractory");
        break;
      case ExperimentKind::refractory:
        check(std::isfinite(est.theta_100) && std::abs(est.theta_100 - th_true) <= 0.03,
              "theta_100 " + detail::fmt("%.4f", est.theta_100) + " within 0.03 of theta " +
                  detail::fmt("%.2f", th_true));
        break;
      case ExperimentKind::robustness: {
        const auto& sw = out.estimates[0].second;
        const auto& rp = out.estimates[1].second;
        const double err_sw = std::abs(sw.theta_100 - th_true);
        const double err_rp = std::abs(rp.theta_100 - th_true);
        check(err_sw <= err_rp, "square-wave error " + detail::fmt("%.4f", err_sw) +
                                    " <= rptp error " + detail::fmt("%.4f", err_rp));
        check(err_sw <= 0.05 && err_rp <= 0.05,
              "both errors within 0.05 of theta " + detail::fmt("%.2f", th_true));
        break;
      }
      default:
        break;
    }
  }

  detail::Recording rec;
  if (cfg.record_events) rec = detail::record_rptp_sweep(cfg);

  // --- write stage (nothing is written until all computation succeeded) ----
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto emit = [&](const std::string& name) {
    std::string p = (fs::path(cfg.out_dir) / name).string();
    out.artifacts.push_back(p);
    return p;
  };

  for (size_t i = 0; i < out.curves.size(); ++i) {
    io::write_scurve_csv(emit("scurve_" + out.curves[i].first + ".csv"),
                         out.curves[i].second);
    io::write_estimate_csv(
        emit("estimate_" + out.curves[i].first + ".csv"),
        {{out.curves[i].second.polarity == Polarity::on ? "on" : "off",
          out.estimates[i].second}});
  }
  if (!out.calibrations.empty())
    io::write_calibration_csv(emit("calibration.csv"), out.calibrations);
  if (out.has_dark) io::write_dark_report_csv(emit("dark_report.csv"), out.dark);
  if (cfg.record_events) {
    io::write_event_records_csv(emit("events.csv"), rec.events);
    io::write_schedule_csv(emit("schedule.csv"), rec.schedule);
  }
  if (cfg.emit_svg) {
    std::vector<SCurve> cs;
    std::vector<ThresholdEstimate> es;
    svg::PlotOptions opt;
    opt.title = std::string("response probability: ") + config::kind_name(cfg.kind);
    for (const auto& [label, c] : out.curves) {
      cs.push_back(c);
      opt.labels.push_back(label);
    }
    for (const auto& [label, e] : out.estimates) es.push_back(e);
    svg::emit_plots(emit("plot.svg"), cs, es, opt);
  }

  // --- summary --------------------------------------------------------------
  std::ostringstream ss;
  ss << "experiment: " << config::kind_name(cfg.kind) << "\n";
  ss << "seed: " << cfg.base_seed << "\n";
  for (const auto& cal : out.calibrations)
    ss << "calibrated sigma " << detail::fmt("%.6g", cal.calibrated_sigma) << " for BA "
       << detail::fmt("%.3g", cal.target_ba_hz) << " Hz at f3db "
       << detail::fmt("%g", cal.f3db_hz) << " Hz (achieved "
       << detail::fmt("%.4g", cal.achieved_ba_hz) << " Hz)\n";
  for (size_t i = 0; i < out.curves.size(); ++i) {
    const auto& e = out.estimates[i].second;
    ss << out.curves[i].first << ": nct_50=" << detail::fmt("%.4f", e.nct_50)
       << " theta_100=" << detail::fmt("%.4f", e.theta_100)
       << " epsilon=" << detail::fmt("%.3g", e.epsilon);
    const std::string flags = io::estimate_flags(e);
    if (!flags.empty()) ss << " flags=" << flags;
    ss << "\n";
  }
  if (out.has_dark)
    ss << "dark current: mean " << detail::fmt("%.4g", out.dark.mean_a * 1e15)
       << " fA, std " << detail::fmt("%.3g", out.dark.std_a * 1e15) << " fA (theta_ref "
       << detail::fmt("%.4f", out.dark.theta_ref) << ")\n";
  for (const auto& line : out.checks) ss << line << "\n";
  if (!out.checks.empty())
    ss << (out.all_pass ? "ALL CHECKS PASSED" : "SOME CHECKS FAILED") << "\n";
  out.text = ss.str();

  {
    std::string p = emit("summary.txt");
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot open for writing: " + p);
    f << out.text;
  }
  return out;
}

}  // namespace evs::runner
