#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"
#include "time_series.hpp"

namespace evs {

enum class Polarity : uint8_t { off = 0, on = 1 };

inline const char* to_string(Polarity p) { return p == Polarity::on ? "on" : "off"; }

struct Event {
  double t_s = 0.0;
  Polarity polarity = Polarity::on;
};

struct EventStream {
  std::vector<Event> events;
  double duration_s = 0.0;
  int64_t pixel_id = 0;
};

struct PixelConfig {
  double theta_on = 0.3;        // log-contrast units
  double theta_off = 0.3;
  double f3db_hz = 2000.0;      // source-follower low-pass corner
  double noise_sigma = 0.0;     // per-sample Gaussian sigma, log units, pre-filter
  double refractory_s = 1e-4;
  double dark_current_a = 0.0;
  double dt_s = 1e-5;
  double warmup_s = 0.1;        // events inside the warm-up are discarded
  uint64_t seed = 1;

  double tau_s() const { return 1.0 / (2.0 * M_PI * f3db_hz); }

  void validate() const {
    if (!(theta_on > 0.0) || !(theta_off > 0.0))
      throw std::invalid_argument("pixel: thresholds must be > 0");
    if (!(f3db_hz > 0.0)) throw std::invalid_argument("pixel: f3db_hz must be > 0");
    if (!(dt_s > 0.0)) throw std::invalid_argument("pixel: dt_s must be > 0");
    if (!(dt_s * 2.0 * M_PI * f3db_hz < 1.0))
      throw std::invalid_argument("pixel: dt_s * 2*pi*f3db must be < 1 (Euler stability)");
    if (noise_sigma < 0.0) throw std::invalid_argument("pixel: noise_sigma must be >= 0");
    if (refractory_s < 0.0) throw std::invalid_argument("pixel: refractory_s must be >= 0");
    if (dark_current_a < 0.0) throw std::invalid_argument("pixel: dark_current_a must be >= 0");
    if (warmup_s < 0.0) throw std::invalid_argument("pixel: warmup_s must be >= 0");
  }
};

// Single Euler step of the first-order low-pass: v += (dt/tau)(v_in - v).
inline double lowpass_step(double v_prev, double v_in, double dt_s, double tau_s) {
  if (!(dt_s > 0.0) || !(dt_s < tau_s))
    throw std::invalid_argument("lowpass_step: requires 0 < dt_s < tau_s");
  return v_prev + dt_s / tau_s * (v_in - v_prev);
}

namespace detail {

// The pixel chain, shared by every public entry point: per sample, take the
// log-domain level, add white Gaussian noise, low-pass, and compare to the
// memorized reference.  After an event the next `R` samples are skipped and
// the reference is re-memorized from the *filtered* value at the first
// post-refractory sample -- the filter keeps integrating throughout, which is
// what makes a short refractory period memorize mid-transient levels.
//
// level_fn is called once per sample, in order, and returns the noiseless
// log-domain input; sink(sample_index, polarity) receives post-warm-up events.
template <class LevelFn, class Sink>
void run_pixel_chain(int64_t n_total, LevelFn&& level_fn, const PixelConfig& cfg,
                     Sink&& sink) {
  const double alpha = cfg.dt_s * 2.0 * M_PI * cfg.f3db_hz;
  const double sigma = cfg.noise_sigma;
  const bool noisy = sigma > 0.0;
  const int64_t refr_n = llround(cfg.refractory_s / cfg.dt_s);
  const int64_t warmup_n = llround(cfg.warmup_s / cfg.dt_s);

  Rng rng(mix_seed(cfg.seed, seed_stream::pixel_noise));
  double vf = 0.0, ref = 0.0;
  bool first = true, ref_pending = false;
  int64_t resume_at = 0;

  for (int64_t n = 0; n < n_total; ++n) {
    double x = level_fn();
    if (noisy) x += sigma * rng.gauss();
    if (first) {
      vf = x;
      ref = x;  // pixel starts settled on its first sample
      first = false;
      continue;
    }
    vf += alpha * (x - vf);
    if (n < resume_at) continue;  // held in reset
    if (ref_pending) {
      ref = vf;
      ref_pending = false;
      continue;
    }
    const double d = vf - ref;
    if (d > cfg.theta_on) {
      if (n >= warmup_n) sink(n, Polarity::on);
      resume_at = n + 1 + refr_n;
      ref_pending = true;
    } else if (-d > cfg.theta_off) {
      if (n >= warmup_n) sink(n, Polarity::off);
      resume_at = n + 1 + refr_n;
      ref_pending = true;
    }
  }
}

inline void check_input_common(SignalUnit unit, double input_dt, const PixelConfig& cfg) {
  cfg.validate();
  if (unit != SignalUnit::ampere)
    throw std::invalid_argument("simulate_pixel: input must be photocurrent (ampere)");
  if (input_dt != cfg.dt_s)
    throw std::invalid_argument("simulate_pixel: input.dt_s must equal cfg.dt_s");
}

}  // namespace detail

// Event-sink variants: no event storage, suitable for counting-only callers.
template <class Sink>
void simulate_pixel_sink(const PiecewiseSeries& input, const PixelConfig& cfg, Sink&& sink) {
  input.validate();
  detail::check_input_common(input.unit, input.dt_s, cfg);
  struct LogRun {
    double log_level;
    int64_t n;
  };
  std::vector<LogRun> lruns;
  lruns.reserve(input.runs.size());
  for (const auto& r : input.runs) {
    const double arg = r.value + cfg.dark_current_a;
    if (!(arg > 0.0))
      throw std::invalid_argument("simulate_pixel: sample + dark current must be > 0");
    lruns.push_back({std::log(arg), r.n_samples});
  }
  size_t ri = 0;
  int64_t left = lruns.empty() ? 0 : lruns[0].n;
  auto level_fn = [&]() {
    while (left == 0) left = lruns[++ri].n;
    --left;
    return lruns[ri].log_level;
  };
  detail::run_pixel_chain(input.total_samples(), level_fn, cfg, sink);
}

template <class Sink>
void simulate_pixel_sink(const TimeSeries& input, const PixelConfig& cfg, Sink&& sink) {
  input.validate();
  detail::check_input_common(input.unit, input.dt_s, cfg);
  for (double v : input.samples)
    if (!(v + cfg.dark_current_a > 0.0))
      throw std::invalid_argument("simulate_pixel: sample + dark current must be > 0");
  size_t i = 0;
  auto level_fn = [&]() { return std::log(input.samples[i++] + cfg.dark_current_a); };
  detail::run_pixel_chain(static_cast<int64_t>(input.samples.size()), level_fn, cfg, sink);
}

template <class Input>
EventStream simulate_pixel(const Input& input, const PixelConfig& cfg, int64_t pixel_id = 0) {
  EventStream out;
  out.pixel_id = pixel_id;
  out.duration_s = input.duration_s();
  simulate_pixel_sink(input, cfg, [&](int64_t n, Polarity p) {
    out.events.push_back({input.t0_s + static_cast<double>(n) * cfg.dt_s, p});
  });
  return out;
}

// Mean event rate in events/pixel/second, both polarities counted.
inline double background_activity_rate(const std::vector<EventStream>& streams,
                                       double duration_s, int64_t n_pixels) {
  if (!(duration_s > 0.0))
    throw std::invalid_argument("background_activity_rate: duration_s must be > 0");
  if (n_pixels < 1)
    throw std::invalid_argument("background_activity_rate: n_pixels must be >= 1");
  int64_t total = 0;
  for (const auto& s : streams) total += static_cast<int64_t>(s.events.size());
  return static_cast<double>(total) / (duration_s * static_cast<double>(n_pixels));
}

}  // namespace evs
