#pragma once
#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fit.hpp"
#include "inference.hpp"
#include "pixel.hpp"
#include "scurve.hpp"
#include "time_series.hpp"

namespace evs::io {

struct EventRecord {
  int64_t t_us = 0;
  int64_t pixel_id = 0;
  int polarity = 1;  // 1 = ON, 0 = OFF
};

struct ScheduleRow {
  int64_t pulse_index = 0;
  int64_t t_start_us = 0;
  int64_t t_end_us = 0;
  double linear_contrast = 0.0;
  double baseline_lux = 0.0;
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& path, int line_no,
                                    const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

inline double to_double(const std::string& s, const std::string& path, int line_no,
                        const char* col) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    parse_fail(path, line_no, std::string("expected a number in column '") + col +
                                  "', got '" + s + "'");
  return v;
}

inline int64_t to_i64(const std::string& s, const std::string& path, int line_no,
                      const char* col) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    parse_fail(path, line_no, std::string("expected an integer in column '") + col +
                                  "', got '" + s + "'");
  return v;
}

// Reads one CSV file: '#' lines go to `meta` (as "key=value" payloads when they
// have that shape), the first plain line must match `header`, remaining rows
// are handed to `row_fn(fields, line_no)`.
template <typename RowFn>
void read_table(const std::string& path, const std::string& header,
                std::vector<std::pair<std::string, std::string>>* meta, RowFn&& row_fn) {
  auto f = open_in(path);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  const auto expected = split_csv(header);
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (meta) {
        const std::string body = trim(t.substr(1));
        const size_t eq = body.find('=');
        if (eq != std::string::npos)
          meta->emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      }
      continue;
    }
    if (!saw_header) {
      if (split_csv(t) != expected)
        parse_fail(path, line_no, "expected header '" + header + "', got '" + t + "'");
      saw_header = true;
      continue;
    }
    row_fn(split_csv(t), line_no);
  }
  if (!saw_header) parse_fail(path, line_no ? line_no : 1, "missing header row");
}

}  // namespace detail

// ---------------------------------------------------------------- events ----

inline void write_event_records_csv(const std::string& path,
                                    std::vector<EventRecord> rows) {
  std::sort(rows.begin(), rows.end(), [](const EventRecord& a, const EventRecord& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.pixel_id != b.pixel_id) return a.pixel_id < b.pixel_id;
    return a.polarity < b.polarity;
  });
  auto f = detail::open_out(path);
  f << "t_us,pixel_id,polarity\n";
  for (const auto& r : rows)
    f << r.t_us << ',' << r.pixel_id << ',' << r.polarity << '\n';
}

inline void write_events_csv(const std::string& path,
                             const std::vector<EventStream>& streams) {
  std::vector<EventRecord> rows;
  size_t total = 0;
  for (const auto& s : streams) total += s.events.size();
  rows.reserve(total);
  for (const auto& s : streams)
    for (const auto& ev : s.events)
      rows.push_back({::evs::detail::to_us(ev.t_s), s.pixel_id,
                      ev.polarity == Polarity::on ? 1 : 0});
  write_event_records_csv(path, std::move(rows));
}

inline std::vector<EventRecord> read_events_csv(const std::string& path) {
  std::vector<EventRecord> rows;
  detail::read_table(path, "t_us,pixel_id,polarity", nullptr,
                     [&](const std::vector<std::string>& c, int n) {
                       if (c.size() != 3)
                         detail::parse_fail(path, n, "expected 3 columns, got " +
                                                         std::to_string(c.size()));
                       EventRecord r;
                       r.t_us = detail::to_i64(c[0], path, n, "t_us");
                       r.pixel_id = detail::to_i64(c[1], path, n, "pixel_id");
                       const int64_t pol = detail::to_i64(c[2], path, n, "polarity");
                       if (pol != 0 && pol != 1)
                         detail::parse_fail(path, n, "polarity must be 0 or 1");
                       if (r.pixel_id < 0)
                         detail::parse_fail(path, n, "pixel_id must be >= 0");
                       r.polarity = static_cast<int>(pol);
                       rows.push_back(r);
                     });
  std::stable_sort(rows.begin(), rows.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.t_us < b.t_us; });
  return rows;
}

// ------------------------------------------------------------- thresholds ----

inline void write_thresholds_csv(const std::string& path,
                                 const std::vector<std::pair<double, double>>& thetas) {
  auto f = detail::open_out(path);
  f << "pixel_id,theta_on,theta_off\n";
  for (size_t i = 0; i < thetas.size(); ++i)
    f << i << ',' << detail::fmt_g(thetas[i].first) << ','
      << detail::fmt_g(thetas[i].second) << '\n';
}

// ----------------------------------------------------------------- series ----

inline void write_series_csv(const std::string& path, const TimeSeries& ts) {
  auto f = detail::open_out(path);
  f << "t_s,value\n";
  for (size_t n = 0; n < ts.samples.size(); ++n)
    f << detail::fmt_g(ts.t0_s + static_cast<double>(n) * ts.dt_s) << ','
      << detail::fmt_g(ts.samples[n]) << '\n';
}

// ---------------------------------------------------------------- s-curve ----

inline void write_scurve_csv(const std::string& path, const SCurve& curve) {
  auto f = detail::open_out(path);
  f << "# polarity=" << (curve.polarity == Polarity::on ? "on" : "off") << '\n';
  f << "# stimulus=" << curve.stimulus << '\n';
  f << "# baseline_lux=" << detail::fmt_g(curve.baseline_lux) << '\n';
  if (!curve.config_digest.empty()) f << "# config_digest=" << curve.config_digest << '\n';
  if (!curve.notes.empty()) {
    std::string joined;
    for (const auto& n : curve.notes) {
      if (!joined.empty()) joined += " | ";
      joined += n;
    }
    f << "# notes=" << joined << '\n';
  }
  f << "linear_contrast,log_contrast,n_trials,n_responses,probability\n";
  for (const auto& p : curve.points)
    f << detail::fmt_g(p.linear_contrast) << ',' << detail::fmt_g(p.log_contrast) << ','
      << p.n_trials << ',' << p.n_responses << ',' << detail::fmt_g(p.probability)
      << '\n';
}

inline SCurve read_scurve_csv(const std::string& path) {
  SCurve curve;
  std::vector<std::pair<std::string, std::string>> meta;
  detail::read_table(
      path, "linear_contrast,log_contrast,n_trials,n_responses,probability", &meta,
      [&](const std::vector<std::string>& c, int n) {
        if (c.size() != 5)
          detail::parse_fail(path, n,
                             "expected 5 columns, got " + std::to_string(c.size()));
        SCurvePoint p;
        p.linear_contrast = detail::to_double(c[0], path, n, "linear_contrast");
        p.log_contrast = detail::to_double(c[1], path, n, "log_contrast");
        p.n_trials = detail::to_i64(c[2], path, n, "n_trials");
        p.n_responses = detail::to_i64(c[3], path, n, "n_responses");
        p.probability = detail::to_double(c[4], path, n, "probability");
        curve.points.push_back(p);
      });
  for (const auto& [k, v] : meta) {
    if (k == "polarity")
      curve.polarity = (v == "off") ? Polarity::off : Polarity::on;
    else if (k == "stimulus")
      curve.stimulus = v;
    else if (k == "baseline_lux")
      curve.baseline_lux = std::strtod(v.c_str(), nullptr);
    else if (k == "config_digest")
      curve.config_digest = v;
    else if (k == "notes")
      curve.notes.push_back(v);
  }
  curve.validate();
  return curve;
}

// --------------------------------------------------------------- estimate ----

inline std::string estimate_flags(const ThresholdEstimate& e) {
  std::string flags;
  auto add = [&](const char* name) {
    if (!flags.empty()) flags += ';';
    flags += name;
  };
  if (e.nct_fallback) add("nct_fallback");
  if (e.saturated_left) add("saturated_left");
  if (e.never_reaches_one) add("never_reaches_one");
  return flags;
}

inline void write_estimate_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, ThresholdEstimate>>& rows) {
  auto f = detail::open_out(path);
  f << "polarity,nct_50,gauss_mu,gauss_sigma,theta_100,epsilon,flags\n";
  for (const auto& [pol, e] : rows)
    f << pol << ',' << detail::fmt_g(e.nct_50) << ',' << detail::fmt_g(e.gauss_mu)
      << ',' << detail::fmt_g(e.gauss_sigma) << ',' << detail::fmt_g(e.theta_100)
      << ',' << detail::fmt_g(e.epsilon) << ',' << estimate_flags(e) << '\n';
}

// --------------------------------------------------------------- schedule ----

inline void write_schedule_csv(const std::string& path,
                               const std::vector<ScheduleRow>& rows) {
  auto f = detail::open_out(path);
  f << "pulse_index,t_start_us,t_end_us,linear_contrast,baseline_lux\n";
  for (const auto& r : rows)
    f << r.pulse_index << ',' << r.t_start_us << ',' << r.t_end_us << ','
      << detail::fmt_g(r.linear_contrast) << ',' << detail::fmt_g(r.baseline_lux)
      << '\n';
}

inline std::vector<ScheduleRow> read_schedule_csv(const std::string& path) {
  std::vector<ScheduleRow> rows;
  detail::read_table(
      path, "pulse_index,t_start_us,t_end_us,linear_contrast,baseline_lux", nullptr,
      [&](const std::vector<std::string>& c, int n) {
        if (c.size() != 5)
          detail::parse_fail(path, n,
                             "expected 5 columns, got " + std::to_string(c.size()));
        ScheduleRow r;
        r.pulse_index = detail::to_i64(c[0], path, n, "pulse_index");
        r.t_start_us = detail::to_i64(c[1], path, n, "t_start_us");
        r.t_end_us = detail::to_i64(c[2], path, n, "t_end_us");
        r.linear_contrast = detail::to_double(c[3], path, n, "linear_contrast");
        r.baseline_lux = detail::to_double(c[4], path, n, "baseline_lux");
        if (r.t_end_us <= r.t_start_us)
          detail::parse_fail(path, n, "window must have t_end_us > t_start_us");
        if (!(r.linear_contrast > 0.0))
          detail::parse_fail(path, n, "linear_contrast must be > 0");
        rows.push_back(r);
      });
  return rows;
}

// ------------------------------------------------------------ calibration ----

inline void write_calibration_csv(const std::string& path,
                                  const std::vector<NoiseCalibration>& rows) {
  auto f = detail::open_out(path);
  f << "f3db_hz,target_ba_hz,sigma,achieved_ba_hz\n";
  for (const auto& r : rows)
    f << detail::fmt_g(r.f3db_hz) << ',' << detail::fmt_g(r.target_ba_hz) << ','
      << detail::fmt_g(r.calibrated_sigma) << ',' << detail::fmt_g(r.achieved_ba_hz)
      << '\n';
}

// ------------------------------------------------------------ dark report ----

inline void write_dark_report_csv(const std::string& path,
                                  const DarkCurrentEstimate& est) {
  auto f = detail::open_out(path);
  f << "# theta_ref=" << detail::fmt_g(est.theta_ref) << '\n';
  f << "baseline_lux,C,i_pho1_fA,i_dark_fA\n";
  for (const auto& cu : est.per_curve)
    f << detail::fmt_g(cu.baseline_lux) << ',' << detail::fmt_g(cu.theta_100_c) << ','
      << detail::fmt_g(cu.i_pho1_a * 1e15) << ',' << detail::fmt_g(cu.i_dark_a * 1e15)
      << '\n';
  f << "mean,,," << detail::fmt_g(est.mean_a * 1e15) << '\n';
  f << "std,,," << detail::fmt_g(est.std_a * 1e15) << '\n';
}

// ----------------------------------------------------------------- ingest ----

struct RecordedDataset {
  std::string events_path;
  std::string schedule_path;
  int n_pixels = 0;              // 0: infer as max pixel_id + 1
  Polarity polarity = Polarity::on;
  double slack_s = 2.0;          // allowed event-time excursion beyond the schedule span
  std::string refractory_note;   // opaque vendor bias setting, carried into notes
};

// Builds an S-curve from recorded events plus a pulse schedule, using the same
// binary per-window/per-pixel counting as the simulated measurement path.
inline SCurve ingest_recorded(const RecordedDataset& ds, const CountingRule& rule) {
  if (rule.mode != CountingRule::Mode::rptp_window)
    throw std::invalid_argument(
        "ingest_recorded: only windowed (rptp_window) counting applies to recorded "
        "pulse schedules");
  auto events = read_events_csv(ds.events_path);
  auto schedule = read_schedule_csv(ds.schedule_path);
  if (schedule.empty())
    throw std::runtime_error(ds.schedule_path + ": schedule has no rows");

  std::vector<ScheduleRow> sorted = schedule;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScheduleRow& a, const ScheduleRow& b) {
              return a.t_start_us < b.t_start_us;
            });
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].t_start_us < sorted[i - 1].t_end_us)
      throw std::runtime_error(ds.schedule_path + ": windows overlap (pulse " +
                               std::to_string(sorted[i - 1].pulse_index) + " and " +
                               std::to_string(sorted[i].pulse_index) + ")");

  const int64_t slack_us = llround(ds.slack_s * 1e6);
  const int64_t span_lo = sorted.front().t_start_us - slack_us;
  const int64_t span_hi = sorted.back().t_end_us + slack_us;
  for (const auto& ev : events)
    if (ev.t_us < span_lo || ev.t_us > span_hi)
      throw std::runtime_error(ds.events_path + ": event at " + std::to_string(ev.t_us) +
                               " us lies outside the schedule span (check slack_s)");

  int64_t n_pixels = ds.n_pixels;
  if (n_pixels <= 0) {
    int64_t max_id = -1;
    for (const auto& ev : events) max_id = std::max(max_id, ev.pixel_id);
    n_pixels = max_id + 1;
    if (n_pixels <= 0) n_pixels = 1;  // empty recording, unknown ROI
  }

  // Per-pixel, polarity-filtered, sorted event times.
  const int want_pol = ds.polarity == Polarity::on ? 1 : 0;
  std::vector<std::vector<int64_t>> per_pixel(static_cast<size_t>(n_pixels));
  for (const auto& ev : events) {
    if (ev.polarity != want_pol) continue;
    if (ev.pixel_id >= n_pixels)
      throw std::runtime_error(ds.events_path + ": pixel_id " +
                               std::to_string(ev.pixel_id) +
                               " exceeds the declared pixel count");
    per_pixel[static_cast<size_t>(ev.pixel_id)].push_back(ev.t_us);
  }

  std::map<double, std::vector<const ScheduleRow*>> by_contrast;
  for (const auto& r : sorted) by_contrast[r.linear_contrast].push_back(&r);

  SCurve curve;
  curve.polarity = ds.polarity;
  curve.stimulus = "recorded";
  curve.baseline_lux = sorted.front().baseline_lux;

  int64_t zero_windows_at_max = 0, windows_at_max = 0;
  const double max_contrast = by_contrast.rbegin()->first;
  for (const auto& [contrast, wins] : by_contrast) {
    SCurvePoint p;
    p.linear_contrast = contrast;
    p.log_contrast = std::log1p(contrast);
    p.n_trials = static_cast<int64_t>(wins.size()) * n_pixels;
    for (const ScheduleRow* w : wins) {
      bool any_event_any_pixel = false;
      for (const auto& times : per_pixel) {
        auto it = std::lower_bound(times.begin(), times.end(), w->t_start_us);
        const bool hit = it != times.end() && *it < w->t_end_us;
        if (hit) {
          ++p.n_responses;
          any_event_any_pixel = true;
        }
      }
      if (contrast == max_contrast) {
        ++windows_at_max;
        if (!any_event_any_pixel) ++zero_windows_at_max;
      }
    }
    p.probability = static_cast<double>(p.n_responses) / static_cast<double>(p.n_trials);
    curve.points.push_back(p);
  }

  curve.notes.push_back("ingested: " + ds.events_path);
  if (!ds.refractory_note.empty()) curve.notes.push_back("refractory=" + ds.refractory_note);
  if (windows_at_max > 0 && 2 * zero_windows_at_max > windows_at_max)
    curve.notes.push_back("warning: >50% of windows empty at the highest contrast");
  curve.validate();
  return curve;
}

}  // namespace evs::io
