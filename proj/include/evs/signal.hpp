#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "time_series.hpp"
#include "units.hpp"

namespace evs {

struct SquareWaveSpec {
  double baseline = 100.0;        // lux
  double linear_contrast = 0.3;   // peak = baseline * (1 + c)
  double frequency_hz = 5.0;
  double duty = 0.5;              // fraction of the period spent at the peak
  double duration_s = 1.0;

  void validate() const {
    if (!(baseline > 0.0)) throw std::invalid_argument("square wave: baseline must be > 0");
    if (linear_contrast < 0.0)
      throw std::invalid_argument("square wave: linear_contrast must be >= 0");
    if (!(frequency_hz > 0.0))
      throw std::invalid_argument("square wave: frequency_hz must be > 0");
    if (!(duty > 0.0 && duty < 1.0))
      throw std::invalid_argument("square wave: duty must be in (0, 1)");
    if (!(duration_s * frequency_hz >= 1.0))
      throw std::invalid_argument("square wave: duration must cover >= 1 period");
  }
};

struct RpTpSpec {
  double baseline = 100.0;            // lux
  double reset_linear_contrast = 0.5;
  double reset_duration_s = 0.400;
  double test_duration_s = 0.200;
  double test_linear_contrast = 0.3;
  enum class Polarity { on, off } polarity_under_test = Polarity::on;
  int64_t n_pulses = 100;

  void validate() const {
    if (!(baseline > 0.0)) throw std::invalid_argument("rptp: baseline must be > 0");
    if (reset_linear_contrast < 0.0 || test_linear_contrast < 0.0)
      throw std::invalid_argument("rptp: contrasts must be >= 0");
    if (!(reset_duration_s > 0.0) || !(test_duration_s > 0.0))
      throw std::invalid_argument("rptp: durations must be > 0");
    if (n_pulses < 1) throw std::invalid_argument("rptp: n_pulses must be >= 1");
  }
};

struct ContrastSweep {
  std::vector<double> linear_contrasts;

  // 30 amplitudes, 1% to 70% linear contrast
  static ContrastSweep default_sweep(int n = 30, double lo = 0.01, double hi = 0.7) {
    ContrastSweep s;
    s.linear_contrasts.reserve(n);
    for (int i = 0; i < n; ++i)
      s.linear_contrasts.push_back(lo + (hi - lo) * i / double(n - 1));
    return s;
  }

  void validate() const {
    if (linear_contrasts.empty()) throw std::invalid_argument("sweep: must be non-empty");
    double prev = 0.0;
    for (double c : linear_contrasts) {
      if (!(c > 0.0)) throw std::invalid_argument("sweep: contrasts must be > 0");
      if (!(c > prev)) throw std::invalid_argument("sweep: contrasts must be strictly increasing");
      prev = c;
    }
  }
};

// Square wave starts at baseline; the first rising edge lands at
// t = period * (1 - duty), so every period is [low, high] in that order.
inline PiecewiseSeries make_square_wave_runs(const SquareWaveSpec& spec, double dt_s) {
  spec.validate();
  if (!(dt_s > 0.0)) throw std::invalid_argument("square wave: dt_s must be > 0");
  const double period_s = 1.0 / spec.frequency_hz;
  const double high_s = spec.duty * period_s;
  const double low_s = period_s - high_s;
  if (dt_s >= low_s || dt_s >= high_s)
    throw std::invalid_argument("square wave: dt_s must be smaller than both half-periods");

  const int64_t low_n = llround(low_s / dt_s);
  const int64_t high_n = llround(high_s / dt_s);
  const int64_t total = llround(spec.duration_s / dt_s);
  const double high_level = spec.baseline * (1.0 + spec.linear_contrast);

  PiecewiseSeries out;
  out.dt_s = dt_s;
  out.unit = SignalUnit::lux;
  int64_t n = 0;
  while (n < total) {
    const int64_t a = std::min(low_n, total - n);
    out.runs.push_back({spec.baseline, a});
    n += a;
    if (n >= total) break;
    const int64_t b = std::min(high_n, total - n);
    out.runs.push_back({high_level, b});
    n += b;
  }
  return out;
}

inline TimeSeries make_square_wave(const SquareWaveSpec& spec, double dt_s) {
  return make_square_wave_runs(spec, dt_s).to_series();
}

using WindowList = std::vector<std::pair<double, double>>;  // (t_start_s, t_end_s)

// One repetition per pulse: reset pulse, baseline hold (same duration), test
// pulse, baseline hold (test duration); a lead-in baseline hold precedes the
// train so the first reset acts on a settled pixel.  For ON tests the reset
// pulse steps down to baseline/(1+rc) and the test pulse steps up; OFF tests
// mirror both.  Response windows open at each test-pulse leading edge.
inline std::pair<PiecewiseSeries, WindowList> make_rptp_train(const RpTpSpec& spec,
                                                              double dt_s,
                                                              double window_s = 0.040) {
  spec.validate();
  if (!(dt_s > 0.0)) throw std::invalid_argument("rptp: dt_s must be > 0");
  if (!(window_s > 0.0)) throw std::invalid_argument("rptp: window_s must be > 0");

  const bool on_test = spec.polarity_under_test == RpTpSpec::Polarity::on;
  const double reset_level = on_test ? spec.baseline / (1.0 + spec.reset_linear_contrast)
                                     : spec.baseline * (1.0 + spec.reset_linear_contrast);
  const double test_level = on_test ? spec.baseline * (1.0 + spec.test_linear_contrast)
                                    : spec.baseline / (1.0 + spec.test_linear_contrast);
  const int64_t reset_n = llround(spec.reset_duration_s / dt_s);
  const int64_t test_n = llround(spec.test_duration_s / dt_s);
  if (reset_n < 1 || test_n < 1)
    throw std::invalid_argument("rptp: durations must be >= dt_s");

  PiecewiseSeries out;
  out.dt_s = dt_s;
  out.unit = SignalUnit::lux;
  WindowList windows;
  windows.reserve(static_cast<size_t>(spec.n_pulses));

  out.runs.push_back({spec.baseline, reset_n});  // lead-in
  int64_t n = reset_n;
  for (int64_t p = 0; p < spec.n_pulses; ++p) {
    out.runs.push_back({reset_level, reset_n});
    n += reset_n;
    out.runs.push_back({spec.baseline, reset_n});
    n += reset_n;
    const double t_test = static_cast<double>(n) * dt_s;
    windows.emplace_back(t_test, t_test + window_s);
    out.runs.push_back({test_level, test_n});
    n += test_n;
    out.runs.push_back({spec.baseline, test_n});
    n += test_n;
  }
  return {std::move(out), std::move(windows)};
}

// Scale a lux waveform into photodiode current via the photometric model.
inline PiecewiseSeries to_photocurrent(const PiecewiseSeries& lux, const PhotometryConfig& pm) {
  if (lux.unit != SignalUnit::lux)
    throw std::invalid_argument("to_photocurrent: input must be in lux");
  PiecewiseSeries out = lux;
  out.unit = SignalUnit::ampere;
  for (auto& r : out.runs) r.value = lux_to_photocurrent(r.value, pm);
  return out;
}

inline TimeSeries to_photocurrent(const TimeSeries& lux, const PhotometryConfig& pm) {
  if (lux.unit != SignalUnit::lux)
    throw std::invalid_argument("to_photocurrent: input must be in lux");
  TimeSeries out = lux;
  out.unit = SignalUnit::ampere;
  for (auto& v : out.samples) v = lux_to_photocurrent(v, pm);
  return out;
}

}  // namespace evs
