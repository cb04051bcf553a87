#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pixel.hpp"
#include "rng.hpp"
#include "time_series.hpp"
#include "units.hpp"

namespace evs {

struct NoiseCalibration {
  double f3db_hz = 0.0;
  double target_ba_hz = 0.0;
  double calibrated_sigma = 0.0;
  double achieved_ba_hz = 0.0;
  int n_runs = 0;
  double run_duration_s = 0.0;
};

struct CalibrationOptions {
  double run_duration_s = 100.0;
  int n_runs = 30;
  double rel_tolerance = 0.1;   // on |achieved - target| / target
  double dt_s = 1e-5;
  double refractory_s = 1e-4;
  double theta_on = 0.3;
  double theta_off = 0.3;
  double warmup_s = 0.1;
  double dc_input_a = 1e-9;     // arbitrary: BA is invariant to the DC level
  uint64_t base_seed = 1;
  double bracket_lo = 1e-4;     // sigma search bracket, log units
  double bracket_hi = 1.0;
  int max_expansions = 12;      // upper bracket doublings allowed
  int max_iterations = 200;
};

// Find the per-sample noise sigma whose DC background activity matches the
// target rate.  BA(sigma) is measured as the mean over n_runs independent DC
// simulations; runs reuse the same per-run seeds at every probed sigma
// (common random numbers), which makes the measured curve a fixed, effectively
// monotone function of sigma and the geometric bisection deterministic.
inline NoiseCalibration calibrate_noise(double f3db_hz, double target_ba_hz,
                                        const CalibrationOptions& opt = {}) {
  if (!(target_ba_hz > 0.0))
    throw std::invalid_argument("calibrate_noise: target_ba_hz must be > 0");
  if (!(opt.run_duration_s > opt.warmup_s))
    throw std::invalid_argument("calibrate_noise: run duration must exceed warm-up");
  if (opt.n_runs < 1) throw std::invalid_argument("calibrate_noise: n_runs must be >= 1");
  if (!(opt.bracket_lo > 0.0) || !(opt.bracket_hi > opt.bracket_lo))
    throw std::invalid_argument("calibrate_noise: invalid sigma bracket");

  PixelConfig pc;
  pc.theta_on = opt.theta_on;
  pc.theta_off = opt.theta_off;
  pc.f3db_hz = f3db_hz;
  pc.refractory_s = opt.refractory_s;
  pc.dt_s = opt.dt_s;
  pc.warmup_s = opt.warmup_s;
  pc.validate();

  PiecewiseSeries dc;
  dc.dt_s = opt.dt_s;
  dc.unit = SignalUnit::ampere;
  dc.runs.push_back({opt.dc_input_a, llround(opt.run_duration_s / opt.dt_s)});

  const double denom =
      static_cast<double>(opt.n_runs) * (opt.run_duration_s - opt.warmup_s);
  auto measure_ba = [&](double sigma) {
    int64_t count = 0;
    PixelConfig run_cfg = pc;
    run_cfg.noise_sigma = sigma;
    for (int r = 0; r < opt.n_runs; ++r) {
      run_cfg.seed =
          mix_seed(opt.base_seed, seed_stream::calibration, static_cast<uint64_t>(r));
      simulate_pixel_sink(dc, run_cfg, [&](int64_t, Polarity) { ++count; });
    }
    return static_cast<double>(count) / denom;
  };

  auto within = [&](double ba) {
    return std::abs(ba - target_ba_hz) <= opt.rel_tolerance * target_ba_hz;
  };
  auto result = [&](double sigma, double ba) {
    return NoiseCalibration{f3db_hz, target_ba_hz, sigma, ba, opt.n_runs,
                            opt.run_duration_s};
  };

  double lo = opt.bracket_lo, hi = opt.bracket_hi;
  const double ba_lo = measure_ba(lo);
  if (within(ba_lo)) return result(lo, ba_lo);
  if (ba_lo > target_ba_hz)
    throw std::runtime_error("calibrate_noise: BA at the lower bracket already exceeds "
                             "the target; no bracket");
  double ba_hi = measure_ba(hi);
  int expansions = 0;
  while (ba_hi < target_ba_hz && !within(ba_hi)) {
    if (++expansions > opt.max_expansions)
      throw std::runtime_error("calibrate_noise: BA stayed below target after expanding "
                               "the bracket to sigma = " + std::to_string(hi));
    hi *= 2.0;
    ba_hi = measure_ba(hi);
  }
  if (within(ba_hi)) return result(hi, ba_hi);

  for (int it = 0; it < opt.max_iterations; ++it) {
    const double mid = std::sqrt(lo * hi);  // geometric: the bracket spans decades
    if (!(mid > lo) || !(mid < hi))
      throw std::runtime_error(
          "calibrate_noise: sigma bracket collapsed before the measured rate "
          "entered the tolerance band; the rate resolution (1 event / total "
          "simulated time) is too coarse - increase n_runs or run_duration_s");
    const double ba = measure_ba(mid);
    if (within(ba)) return result(mid, ba);
    if (ba < target_ba_hz)
      lo = mid;
    else
      hi = mid;
  }
  throw std::runtime_error("calibrate_noise: bisection did not reach tolerance");
}

struct DarkCurrentEstimate {
  struct Curve {
    double baseline_lux = 0.0;
    double theta_100_c = 0.0;  // measured 100% intercept, log-contrast units
    double i_pho1_a = 0.0;
    double i_dark_a = 0.0;
  };
  std::vector<Curve> per_curve;
  double mean_a = std::numeric_limits<double>::quiet_NaN();
  double std_a = std::numeric_limits<double>::quiet_NaN();
  double theta_ref = 0.0;
};

// Invert the ON-event condition log((I2 + Id)/(I1 + Id)) = theta at each
// curve's measured 100% intercept C:  Id = I1 (e^C - e^theta) / (e^theta - 1).
// theta_ref should come from a curve far above the dark-current limit.
inline DarkCurrentEstimate infer_dark_current(
    const std::vector<std::pair<double, double>>& family_lux_c, double theta_ref,
    const PhotometryConfig& pm = {}) {
  if (family_lux_c.empty())
    throw std::invalid_argument("infer_dark_current: empty curve family");
  if (!(theta_ref > 0.0))
    throw std::invalid_argument("infer_dark_current: theta_ref must be > 0");

  DarkCurrentEstimate est;
  est.theta_ref = theta_ref;
  const double e_theta = std::exp(theta_ref);
  for (const auto& [lux, c] : family_lux_c) {
    if (!(c > theta_ref))
      throw std::invalid_argument(
          "infer_dark_current: curve at " + std::to_string(lux) +
          " lx has C <= theta_ref (no dark-current signal; inversion would be <= 0)");
    const double i1 = lux_to_photocurrent(lux, pm);
    const double id = i1 * (std::exp(c) - e_theta) / (e_theta - 1.0);
    est.per_curve.push_back({lux, c, i1, id});
  }

  double sum = 0.0;
  for (const auto& cu : est.per_curve) sum += cu.i_dark_a;
  est.mean_a = sum / static_cast<double>(est.per_curve.size());
  if (est.per_curve.size() >= 2) {
    double ss = 0.0;
    for (const auto& cu : est.per_curve) {
      const double d = cu.i_dark_a - est.mean_a;
      ss += d * d;
    }
    est.std_a = std::sqrt(ss / static_cast<double>(est.per_curve.size() - 1));
  }
  return est;
}

// Dark current from the low-light cutoff spec point: a 100% linear contrast
// step (I2 = 2 I1) that exactly meets theta_on at the cutoff illuminance.
inline double llco_dark_current(double llco_lux, double theta_on,
                                const PhotometryConfig& pm = {}) {
  if (!(llco_lux > 0.0)) throw std::invalid_argument("llco: illuminance must be > 0");
  if (!(theta_on > 0.0)) throw std::invalid_argument("llco: theta_on must be > 0");
  if (!(theta_on < std::log(2.0)))
    throw std::invalid_argument(
        "llco: theta_on >= ln 2; a doubling step could never trigger at any illuminance");
  const double e_theta = std::exp(theta_on);
  return lux_to_photocurrent(llco_lux, pm) * (2.0 - e_theta) / (e_theta - 1.0);
}

// Fraction of a step the first-order low-pass reaches within the window.
inline double bandwidth_attenuation(double f3db_hz, double window_s) {
  if (!(f3db_hz > 0.0) || !(window_s > 0.0))
    throw std::invalid_argument("bandwidth_attenuation: arguments must be > 0");
  return 1.0 - std::exp(-2.0 * M_PI * f3db_hz * window_s);
}

}  // namespace evs
