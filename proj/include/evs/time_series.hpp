#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evs {

enum class SignalUnit { lux, ampere };

inline const char* to_string(SignalUnit u) {
  return u == SignalUnit::lux ? "lux" : "ampere";
}

// Uniformly sampled non-negative waveform (illuminance or photocurrent).
struct TimeSeries {
  double dt_s = 1e-5;
  double t0_s = 0.0;
  SignalUnit unit = SignalUnit::lux;
  std::vector<double> samples;

  double duration_s() const { return static_cast<double>(samples.size()) * dt_s; }

  void validate() const {
    if (!(dt_s > 0.0)) throw std::invalid_argument("time series: dt_s must be > 0");
    if (samples.empty()) throw std::invalid_argument("time series: needs >= 1 sample");
    for (double v : samples)
      if (!(v >= 0.0)) throw std::invalid_argument("time series: samples must be >= 0");
  }
};

// Run-length form of the same thing: long holds at constant levels.  All the
// stimuli used here are piecewise constant, and simulating runs instead of
// samples avoids materializing 10^7-sample vectors and re-taking logs.
struct PiecewiseSeries {
  struct Run {
    double value = 0.0;
    int64_t n_samples = 0;
  };

  double dt_s = 1e-5;
  double t0_s = 0.0;
  SignalUnit unit = SignalUnit::lux;
  std::vector<Run> runs;

  int64_t total_samples() const {
    int64_t n = 0;
    for (const auto& r : runs) n += r.n_samples;
    return n;
  }

  double duration_s() const { return static_cast<double>(total_samples()) * dt_s; }

  void validate() const {
    if (!(dt_s > 0.0)) throw std::invalid_argument("piecewise series: dt_s must be > 0");
    if (runs.empty()) throw std::invalid_argument("piecewise series: needs >= 1 run");
    for (const auto& r : runs) {
      if (r.n_samples <= 0)
        throw std::invalid_argument("piecewise series: run lengths must be > 0");
      if (!(r.value >= 0.0))
        throw std::invalid_argument("piecewise series: values must be >= 0");
    }
  }

  TimeSeries to_series() const {
    validate();
    TimeSeries ts;
    ts.dt_s = dt_s;
    ts.t0_s = t0_s;
    ts.unit = unit;
    ts.samples.reserve(static_cast<size_t>(total_samples()));
    for (const auto& r : runs)
      ts.samples.insert(ts.samples.end(), static_cast<size_t>(r.n_samples), r.value);
    return ts;
  }
};

}  // namespace evs
