#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "array.hpp"
#include "pixel.hpp"
#include "signal.hpp"
#include "units.hpp"

namespace evs {

struct SCurvePoint {
  double linear_contrast = 0.0;
  double log_contrast = 0.0;
  int64_t n_trials = 0;
  int64_t n_responses = 0;
  double probability = 0.0;
};

struct SCurve {
  std::vector<SCurvePoint> points;
  Polarity polarity = Polarity::on;
  std::string stimulus;        // "square_wave" or "rptp"
  double baseline_lux = 0.0;
  std::string config_digest;
  std::vector<std::string> notes;  // non-fatal measurement flags

  void validate() const {
    double prev = 0.0;
    for (const auto& pt : points) {
      if (pt.n_trials < 1) throw std::invalid_argument("scurve: n_trials must be >= 1");
      if (pt.n_responses < 0 || pt.n_responses > pt.n_trials)
        throw std::invalid_argument("scurve: n_responses out of range");
      if (!(pt.linear_contrast > prev))
        throw std::invalid_argument("scurve: points must be sorted by contrast");
      prev = pt.linear_contrast;
    }
  }
};

struct CountingRule {
  enum class Mode { square_wave_per_edge, rptp_window } mode = Mode::square_wave_per_edge;
  double window_s = 0.040;  // rptp response window, from the test leading edge

  void validate() const {
    if (mode == Mode::rptp_window && !(window_s > 0.0))
      throw std::invalid_argument("counting rule: window_s must be > 0");
  }
};

struct SquareWaveProtocol {
  double baseline_lux = 100.0;
  double frequency_hz = 5.0;
  double duty = 0.5;
  int64_t n_trials = 100;  // counted stimulus periods (settling periods are extra)
};

struct RpTpProtocol {
  double baseline_lux = 100.0;
  double reset_linear_contrast = 0.5;
  double reset_duration_s = 0.400;
  double test_duration_s = 0.200;
  int64_t n_pulses = 100;
};

namespace detail {

struct WindowUs {
  int64_t start_us = 0;
  int64_t end_us = 0;
};

inline int64_t to_us(double t_s) { return llround(t_s * 1e6); }

/// Binary per-trial counting: a window responds if >= 1 event of the polarity
// falls in [start, end).  Windows and events are both time-ordered.
inline int64_t count_responsive_windows(const std::vector<Event>& events,
                                        const std::vector<WindowUs>& windows,
                                        Polarity polarity) {
  int64_t hits = 0;
  size_t e = 0;
  for (const auto& w : windows) {
    while (e < events.size() && to_us(events[e].t_s) < w.start_us) ++e;
    size_t k = e;
    bool fired = false;
    while (k < events.size() && to_us(events[k].t_s) < w.end_us) {
      if (events[k].polarity == polarity) {
        fired = true;
        break;
      }
      ++k;
    }
    if (fired) ++hits;
  }
  return hits;
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string digest_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a64(s));
  return buf;
}

// Square-wave trial geometry. The tested-polarity window runs from that
// polarity's edge to the next opposite edge.  Settling periods are prepended
// so the first counted window starts after both pixel warm-up and one full
// stimulus period.
struct SquarePlan {
  SquareWaveSpec spec;
  std::vector<WindowUs> windows;
  double min_gap_s = 0.0;  // dead time between consecutive counted windows
};

inline SquarePlan plan_square_wave(const SquareWaveProtocol& proto, double linear_contrast,
                                   Polarity polarity, double dt_s, double warmup_s) {
  const double period_s = 1.0 / proto.frequency_hz;
  const int64_t period_n = llround(period_s / dt_s);
  const int64_t low_n = llround((1.0 - proto.duty) * period_s / dt_s);
  const int64_t settle =
      std::max<int64_t>(1, static_cast<int64_t>(std::ceil(warmup_s / period_s)));

  SquarePlan plan;
  plan.spec.baseline = proto.baseline_lux;
  plan.spec.linear_contrast = linear_contrast;
  plan.spec.frequency_hz = proto.frequency_hz;
  plan.spec.duty = proto.duty;
  plan.spec.duration_s = static_cast<double>(settle + proto.n_trials + 1) * period_s;

  plan.windows.reserve(static_cast<size_t>(proto.n_trials));
  for (int64_t m = settle; m < settle + proto.n_trials; ++m) {
    int64_t s0, s1;
    if (polarity == Polarity::on) {  // rising edge .. next falling edge
      s0 = m * period_n + low_n;
      s1 = (m + 1) * period_n;
    } else {  // falling edge .. next rising edge
      s0 = (m + 1) * period_n;
      s1 = (m + 1) * period_n + low_n;
    }
    plan.windows.push_back({to_us(static_cast<double>(s0) * dt_s),
                            to_us(static_cast<double>(s1) * dt_s)});
  }
  plan.min_gap_s = (polarity == Polarity::on ? (1.0 - proto.duty) : proto.duty) * period_s;
  return plan;
}

struct RptpPlan {
  PiecewiseSeries lux;
  std::vector<WindowUs> windows;
  double min_gap_s = 0.0;
};

inline RptpPlan plan_rptp(const RpTpProtocol& proto, double linear_contrast,
                          Polarity polarity, double dt_s, double warmup_s,
                          double window_s) {
  RpTpSpec spec;
  spec.baseline = proto.baseline_lux;
  spec.reset_linear_contrast = proto.reset_linear_contrast;
  spec.reset_duration_s = proto.reset_duration_s;
  spec.test_duration_s = proto.test_duration_s;
  spec.test_linear_contrast = linear_contrast;
  spec.polarity_under_test =
      polarity == Polarity::on ? RpTpSpec::Polarity::on : RpTpSpec::Polarity::off;
  spec.n_pulses = proto.n_pulses;

  auto [series, window_list] = make_rptp_train(spec, dt_s, window_s);

  // extend the lead-in when the pixel warm-up outlasts it
  const int64_t lead_n = llround(proto.reset_duration_s / dt_s);
  const int64_t warm_n = llround(warmup_s / dt_s);
  int64_t pad_n = std::max<int64_t>(0, warm_n - lead_n);
  RptpPlan plan;
  if (pad_n > 0) series.runs.insert(series.runs.begin(), {proto.baseline_lux, pad_n});
  const double pad_s = static_cast<double>(pad_n) * dt_s;

  plan.lux = std::move(series);
  plan.windows.reserve(window_list.size());
  for (const auto& [t0, t1] : window_list)
    plan.windows.push_back({to_us(t0 + pad_s), to_us(t1 + pad_s)});
  const double rep_s = 2.0 * proto.reset_duration_s + 2.0 * proto.test_duration_s;
  plan.min_gap_s = rep_s - window_s;
  return plan;
}

template <class SimFn>
SCurve assemble_scurve(const ContrastSweep& sweep, Polarity polarity, SimFn&& simulate_one,
                       int jobs) {
  sweep.validate();
  SCurve curve;
  curve.polarity = polarity;
  curve.points.resize(sweep.linear_contrasts.size());

  auto run_point = [&](size_t i) {
    const double c = sweep.linear_contrasts[i];
    auto [trials, responses] = simulate_one(c);
    curve.points[i] = {c, linear_to_log_contrast(c), trials, responses,
                       static_cast<double>(responses) / static_cast<double>(trials)};
  };

  const size_t n = sweep.linear_contrasts.size();
  if (jobs <= 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) run_point(i);
  } else {
    const size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), n);
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (size_t i = t; i < n; i += n_threads) run_point(i);
      });
    for (auto& th : pool) th.join();
  }
  return curve;
}

}  // namespace detail

// ------- square-wave stimulus -------

inline SCurve measure_scurve(const ContrastSweep& sweep, const SquareWaveProtocol& proto,
                             const PixelConfig& cfg, Polarity polarity,
                             const PhotometryConfig& pm = {},
                             const CountingRule& rule = {CountingRule::Mode::square_wave_per_edge},
                             int jobs = 1) {
  rule.validate();
  cfg.validate();
  if (rule.mode != CountingRule::Mode::square_wave_per_edge)
    throw std::invalid_argument("measure_scurve: square-wave stimulus needs per-edge counting");
  if (proto.n_trials < 1) throw std::invalid_argument("measure_scurve: n_trials must be >= 1");

  auto sim_one = [&](double c) -> std::pair<int64_t, int64_t> {
    auto plan = detail::plan_square_wave(proto, c, polarity, cfg.dt_s, cfg.warmup_s);
    auto current = to_photocurrent(make_square_wave_runs(plan.spec, cfg.dt_s), pm);
    EventStream ev = simulate_pixel(current, cfg);
    return {proto.n_trials, detail::count_responsive_windows(ev.events, plan.windows, polarity)};
  };
  SCurve curve = detail::assemble_scurve(sweep, polarity, sim_one, jobs);
  curve.stimulus = "square_wave";
  curve.baseline_lux = proto.baseline_lux;
  curve.config_digest = detail::digest_hex(
      "sw," + std::to_string(proto.baseline_lux) + "," + std::to_string(proto.frequency_hz) +
      "," + std::to_string(proto.duty) + "," + std::to_string(proto.n_trials) + "," +
      std::to_string(cfg.theta_on) + "," + std::to_string(cfg.theta_off) + "," +
      std::to_string(cfg.f3db_hz) + "," + std::to_string(cfg.noise_sigma) + "," +
      std::to_string(cfg.refractory_s) + "," + std::to_string(cfg.seed));
  const double gap = (polarity == Polarity::on ? (1.0 - proto.duty) : proto.duty) /
                     proto.frequency_hz;
  if (cfg.refractory_s > gap)
    curve.notes.push_back("refractory_overlap: refractory period exceeds the dead time "
                          "between counted windows");
  return curve;
}

inline SCurve measure_scurve(const ContrastSweep& sweep, const SquareWaveProtocol& proto,
                             const ArrayConfig& acfg, Polarity polarity,
                             const PhotometryConfig& pm = {},
                             const CountingRule& rule = {CountingRule::Mode::square_wave_per_edge},
                             int jobs = 1) {
  rule.validate();
  acfg.validate();
  if (rule.mode != CountingRule::Mode::square_wave_per_edge)
    throw std::invalid_argument("measure_scurve: square-wave stimulus needs per-edge counting");

  auto sim_one = [&](double c) -> std::pair<int64_t, int64_t> {
    auto plan = detail::plan_square_wave(proto, c, polarity, acfg.base.dt_s, acfg.base.warmup_s);
    auto current = to_photocurrent(make_square_wave_runs(plan.spec, acfg.base.dt_s), pm);
    ArrayResult res = simulate_array(current, acfg);
    int64_t responses = 0;
    for (const auto& st : res.streams)
      responses += detail::count_responsive_windows(st.events, plan.windows, polarity);
    return {proto.n_trials * acfg.n_pixels, responses};
  };
  SCurve curve = detail::assemble_scurve(sweep, polarity, sim_one, jobs);
  curve.stimulus = "square_wave";
  curve.baseline_lux = proto.baseline_lux;
  curve.config_digest = detail::digest_hex(
      "sw_array," + std::to_string(proto.baseline_lux) + "," + std::to_string(acfg.n_pixels) +
      "," + std::to_string(acfg.sigma_mismatch_on) + "," + std::to_string(acfg.sigma_mismatch_off) +
      "," + std::to_string(acfg.base_seed));
  return curve;
}

// ------- reset-pulse / test-pulse stimulus -------

inline SCurve measure_scurve(const ContrastSweep& sweep, const RpTpProtocol& proto,
                             const PixelConfig& cfg, Polarity polarity,
                             const PhotometryConfig& pm = {},
                             const CountingRule& rule = {CountingRule::Mode::rptp_window, 0.040},
                             int jobs = 1) {
  rule.validate();
  cfg.validate();
  if (rule.mode != CountingRule::Mode::rptp_window)
    throw std::invalid_argument("measure_scurve: rptp stimulus needs windowed counting");

  auto sim_one = [&](double c) -> std::pair<int64_t, int64_t> {
    auto plan = detail::plan_rptp(proto, c, polarity, cfg.dt_s, cfg.warmup_s, rule.window_s);
    auto current = to_photocurrent(plan.lux, pm);
    EventStream ev = simulate_pixel(current, cfg);
    return {proto.n_pulses, detail::count_responsive_windows(ev.events, plan.windows, polarity)};
  };
  SCurve curve = detail::assemble_scurve(sweep, polarity, sim_one, jobs);
  curve.stimulus = "rptp";
  curve.baseline_lux = proto.baseline_lux;
  curve.config_digest = detail::digest_hex(
      "rptp," + std::to_string(proto.baseline_lux) + "," +
      std::to_string(proto.reset_linear_contrast) + "," + std::to_string(proto.n_pulses) + "," +
      std::to_string(rule.window_s) + "," + std::to_string(cfg.theta_on) + "," +
      std::to_string(cfg.theta_off) + "," + std::to_string(cfg.f3db_hz) + "," +
      std::to_string(cfg.noise_sigma) + "," + std::to_string(cfg.refractory_s) + "," +
      std::to_string(cfg.seed));
  const double rep_s = 2.0 * proto.reset_duration_s + 2.0 * proto.test_duration_s;
  if (cfg.refractory_s > rep_s - rule.window_s)
    curve.notes.push_back("refractory_overlap: refractory period exceeds the dead time "
                          "between counted windows");
  return curve;
}

inline SCurve measure_scurve(const ContrastSweep& sweep, const RpTpProtocol& proto,
                             const ArrayConfig& acfg, Polarity polarity,
                             const PhotometryConfig& pm = {},
                             const CountingRule& rule = {CountingRule::Mode::rptp_window, 0.040},
                             int jobs = 1) {
  rule.validate();
  acfg.validate();
  if (rule.mode != CountingRule::Mode::rptp_window)
    throw std::invalid_argument("measure_scurve: rptp stimulus needs windowed counting");

  auto sim_one = [&](double c) -> std::pair<int64_t, int64_t> {
    auto plan = detail::plan_rptp(proto, c, polarity, acfg.base.dt_s, acfg.base.warmup_s,
                                  rule.window_s);
    auto current = to_photocurrent(plan.lux, pm);
    ArrayResult res = simulate_array(current, acfg);
    int64_t responses = 0;
    for (const auto& st : res.streams)
      responses += detail::count_responsive_windows(st.events, plan.windows, polarity);
    return {proto.n_pulses * acfg.n_pixels, responses};
  };
  SCurve curve = detail::assemble_scurve(sweep, polarity, sim_one, jobs);
  curve.stimulus = "rptp";
  curve.baseline_lux = proto.baseline_lux;
  curve.config_digest = detail::digest_hex(
      "rptp_array," + std::to_string(proto.baseline_lux) + "," + std::to_string(acfg.n_pixels) +
      "," + std::to_string(acfg.sigma_mismatch_on) + "," +
      std::to_string(acfg.sigma_mismatch_off) + "," + std::to_string(acfg.base_seed));
  return curve;
}

}  // namespace evs
