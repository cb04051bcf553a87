#pragma once
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "array.hpp"
#include "inference.hpp"
#include "pixel.hpp"
#include "scurve.hpp"
#include "signal.hpp"
#include "units.hpp"

namespace evs::config {

// ------------------------------------------------------------ file parser ----
//
// Flat key-value text with [section] headers.  '#' starts a comment line.
// Every key must be consumed by the loader; leftovers are reported as unknown
// keys with their line numbers, so typos fail loudly instead of silently
// running a different experiment.

class ConfigFile {
 public:
  struct Entry {
    std::string value;
    int line_no = 0;
    mutable bool consumed = false;
  };

  static ConfigFile parse_text(const std::string& text, const std::string& label) {
    ConfigFile cf;
    cf.path_ = label;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3)
          cf.fail(line_no, "malformed section header '" + t + "'");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const size_t eq = t.find('=');
      if (eq == std::string::npos)
        cf.fail(line_no, "expected 'key = value', got '" + t + "'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) cf.fail(line_no, "empty key");
      auto& sec = cf.sections_[section];
      if (sec.count(key))
        cf.fail(line_no, "duplicate key '" + qualify(section, key) + "' (first at line " +
                             std::to_string(sec[key].line_no) + ")");
      sec[key] = Entry{value, line_no, false};
    }
    return cf;
  }

  static ConfigFile parse(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    char* end = nullptr;
    const double v = std::strtod(e->value.c_str(), &end);
    if (e->value.empty() || end != e->value.c_str() + e->value.size())
      fail(e->line_no, "key '" + qualify(section, key) + "': expected a number, got '" +
                           e->value + "'");
    return v;
  }

  int64_t get_int(const std::string& section, const std::string& key,
                  int64_t fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    char* end = nullptr;
    const long long v = std::strtoll(e->value.c_str(), &end, 10);
    if (e->value.empty() || end != e->value.c_str() + e->value.size())
      fail(e->line_no, "key '" + qualify(section, key) + "': expected an integer, got '" +
                           e->value + "'");
    return v;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0") return false;
    fail(e->line_no, "key '" + qualify(section, key) + "': expected true/false");
  }

  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      std::vector<double> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream ss(e->value);
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || end != t.c_str() + t.size())
        fail(e->line_no, "key '" + qualify(section, key) + "': expected numbers, got '" +
                             t + "'");
      out.push_back(v);
    }
    if (out.empty())
      fail(e->line_no, "key '" + qualify(section, key) + "': empty list");
    return out;
  }

  // Call after loading: any key never read is unknown.
  void reject_unconsumed() const {
    std::string msg;
    for (const auto& [section, entries] : sections_)
      for (const auto& [key, e] : entries)
        if (!e.consumed)
          msg += "\n  " + path_ + ":" + std::to_string(e.line_no) + ": unknown key '" +
                 qualify(section, key) + "'";
    if (!msg.empty()) throw std::invalid_argument("config has unknown keys:" + msg);
  }

  const std::string& path() const { return path_; }

 private:
  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }
  static std::string qualify(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }
  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.consumed = true;
    return &k->second;
  }
  [[noreturn]] void fail(int line_no, const std::string& msg) const {
    throw std::invalid_argument(path_ + ":" + std::to_string(line_no) + ": " + msg);
  }

  std::string path_ = "<config>";
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

// ------------------------------------------------------------- experiment ----

enum class ExperimentKind { ideal, noise, mismatch, refractory, robustness, dark_current, custom };

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ideal: return "ideal";
    case ExperimentKind::noise: return "noise";
    case ExperimentKind::mismatch: return "mismatch";
    case ExperimentKind::refractory: return "refractory";
    case ExperimentKind::robustness: return "robustness";
    case ExperimentKind::dark_current: return "dark-current";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::ideal, ExperimentKind::noise,
                           ExperimentKind::mismatch, ExperimentKind::refractory,
                           ExperimentKind::robustness, ExperimentKind::dark_current,
                           ExperimentKind::custom})
    if (s == kind_name(k)) return k;
  throw std::invalid_argument("kind: unknown experiment kind '" + s +
                              "' (expected ideal|noise|mismatch|refractory|robustness|"
                              "dark-current|custom)");
}

struct StimulusConfig {
  enum class Type { square_wave, rptp } type = Type::square_wave;
  SquareWaveProtocol sw;
  RpTpProtocol rptp;
};

struct EstimatorConfig {
  double epsilon = 0.01;
  Polarity polarity = Polarity::on;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::custom;
  StimulusConfig stimulus;
  PixelConfig pixel;
  ArrayConfig array;          // consulted when use_array
  bool use_array = false;
  ContrastSweep sweep = ContrastSweep::default_sweep();
  CountingRule rule;
  EstimatorConfig estimator;
  std::string out_dir = "out";
  uint64_t base_seed = 1;
  int jobs = 1;
  bool emit_svg = true;
  bool record_events = false;  // also export events + pulse schedule (rptp only)

  // When > 0, pixel.noise_sigma is calibrated to this BA target before running.
  double target_ba_hz = 0.0;
  CalibrationOptions calib;

  // dark-current experiment geometry
  std::vector<double> dark_baselines_lux = {0.076, 0.133, 0.190, 0.247, 0.304};
  double dark_reference_lux = 300.0;
  double dark_planted_fa = 5.0;

  PhotometryConfig photometry;

  void validate() const {
    auto wrap = [](const char* field, auto&& fn) {
      try {
        fn();
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(field) + ": " + e.what());
      }
    };
    wrap("pixel", [&] { pixel.validate(); });
    if (use_array) wrap("array", [&] { array.validate(); });
    wrap("sweep", [&] { sweep.validate(); });
    wrap("counting", [&] { rule.validate(); });
    wrap("photometry", [&] { photometry.validate(); });
    if (!(estimator.epsilon > 0.0 && estimator.epsilon < 0.5))
      throw std::invalid_argument("estimator.epsilon: must be in (0, 0.5)");
    if (stimulus.type == StimulusConfig::Type::square_wave) {
      if (!(stimulus.sw.baseline_lux > 0.0))
        throw std::invalid_argument("stimulus.baseline_lux: must be > 0");
      if (!(stimulus.sw.frequency_hz > 0.0))
        throw std::invalid_argument("stimulus.frequency_hz: must be > 0");
      if (!(stimulus.sw.duty > 0.0 && stimulus.sw.duty < 1.0))
        throw std::invalid_argument("stimulus.duty: must be in (0, 1)");
      if (stimulus.sw.n_trials < 1)
        throw std::invalid_argument("stimulus.n_trials: must be >= 1");
    } else {
      if (!(stimulus.rptp.baseline_lux > 0.0))
        throw std::invalid_argument("stimulus.baseline_lux: must be > 0");
      if (!(stimulus.rptp.reset_linear_contrast > 0.0))
        throw std::invalid_argument("stimulus.reset_contrast: must be > 0");
      if (!(stimulus.rptp.reset_duration_s > 0.0) ||
          !(stimulus.rptp.test_duration_s > 0.0))
        throw std::invalid_argument("stimulus durations: must be > 0");
      if (stimulus.rptp.n_pulses < 1)
        throw std::invalid_argument("stimulus.n_pulses: must be >= 1");
    }
    if (target_ba_hz < 0.0)
      throw std::invalid_argument("pixel.target_ba_hz: must be >= 0");
    if (out_dir.empty()) throw std::invalid_argument("out_dir: must not be empty");
    if (jobs < 1) throw std::invalid_argument("jobs: must be >= 1");
    if (kind == ExperimentKind::dark_current) {
      if (dark_baselines_lux.empty())
        throw std::invalid_argument("dark.baselines_lux: must not be empty");
      for (double b : dark_baselines_lux)
        if (!(b > 0.0))
          throw std::invalid_argument("dark.baselines_lux: entries must be > 0");
      if (!(dark_reference_lux > 0.0))
        throw std::invalid_argument("dark.reference_lux: must be > 0");
      if (!(dark_planted_fa >= 0.0))
        throw std::invalid_argument("dark.planted_dark_fa: must be >= 0");
    }
  }
};

// Named starting points for the standard experiment ladder; a config file
// overrides individual fields on top of its preset.
inline ExperimentConfig preset(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.pixel.theta_on = 0.3;
  c.pixel.theta_off = 0.3;
  c.pixel.f3db_hz = 2000.0;
  c.pixel.noise_sigma = 0.0;
  c.pixel.refractory_s = 10e-3;
  c.stimulus.sw.n_trials = 300;
  c.stimulus.rptp.n_pulses = 300;
  switch (kind) {
    case ExperimentKind::ideal:
      c.stimulus.sw.n_trials = 100;
      break;
    case ExperimentKind::noise:
      c.target_ba_hz = 0.5;
      c.pixel.refractory_s = 100e-6;
      break;
    case ExperimentKind::mismatch:
      c.pixel.theta_on = 0.33;  // measured polarity sits one mismatch step high
      c.pixel.refractory_s = 100e-6;
      break;
    case ExperimentKind::refractory:
      c.pixel.theta_on = 0.33;
      c.pixel.refractory_s = 10e-3;
      break;
    case ExperimentKind::robustness:
      c.pixel.theta_on = 0.33;
      c.pixel.f3db_hz = 50.0;
      c.pixel.refractory_s = 10e-3;
      c.target_ba_hz = 0.5;
      c.stimulus.sw.n_trials = 500;
      c.stimulus.rptp.n_pulses = 400;
      break;
    case ExperimentKind::dark_current:
      c.pixel.theta_on = 0.35;
      c.pixel.theta_off = 0.35;
      c.pixel.f3db_hz = 50.0;
      c.pixel.noise_sigma = 0.3;
      c.stimulus.type = StimulusConfig::Type::rptp;
      c.stimulus.rptp.n_pulses = 100;
      // Dark compression shrinks the conditioning pulse along with the test
      // pulse, so at millilux baselines a 0.5 reset contrast lands below
      // threshold and never re-arms the reference.  Make it strong enough to
      // clear the dark floor at any baseline worth measuring.
      c.stimulus.rptp.reset_linear_contrast = 10.0;
      // ... and since a 10x recovery edge fires within a millisecond, the
      // refractory must outlast the 50 Hz filter transient (tau = 3.2 ms) or
      // the pixel memorizes an unsettled reference below the baseline.
      c.pixel.refractory_s = 25e-3;
      c.rule.mode = CountingRule::Mode::rptp_window;
      c.sweep = ContrastSweep::default_sweep(40, 0.05, 1.6);
      break;
    case ExperimentKind::custom:
      break;
  }
  return c;
}

inline ExperimentConfig load_experiment(const ConfigFile& cf) {
  const ExperimentKind kind = parse_kind(cf.get_string("", "kind", "custom"));
  ExperimentConfig c = preset(kind);

  c.out_dir = cf.get_string("", "out_dir", c.out_dir);
  c.base_seed = static_cast<uint64_t>(cf.get_int("", "seed", static_cast<int64_t>(c.base_seed)));
  c.jobs = static_cast<int>(cf.get_int("", "jobs", c.jobs));
  c.emit_svg = cf.get_bool("", "emit_svg", c.emit_svg);
  c.record_events = cf.get_bool("", "record_events", c.record_events);

  c.pixel.theta_on = cf.get_double("pixel", "theta_on", c.pixel.theta_on);
  c.pixel.theta_off = cf.get_double("pixel", "theta_off", c.pixel.theta_off);
  c.pixel.f3db_hz = cf.get_double("pixel", "f3db_hz", c.pixel.f3db_hz);
  c.pixel.noise_sigma = cf.get_double("pixel", "noise_sigma", c.pixel.noise_sigma);
  c.pixel.refractory_s = 1e-6 * cf.get_double("pixel", "refractory_us", c.pixel.refractory_s * 1e6);
  c.pixel.dark_current_a = 1e-15 * cf.get_double("pixel", "dark_current_fa", c.pixel.dark_current_a * 1e15);
  c.pixel.dt_s = 1e-6 * cf.get_double("pixel", "dt_us", c.pixel.dt_s * 1e6);
  c.pixel.warmup_s = 1e-3 * cf.get_double("pixel", "warmup_ms", c.pixel.warmup_s * 1e3);
  c.target_ba_hz = cf.get_double("pixel", "target_ba_hz", c.target_ba_hz);

  c.array.n_pixels = cf.get_int("array", "n_pixels", c.array.n_pixels);
  c.array.sigma_mismatch_on = cf.get_double("array", "sigma_mismatch_on", c.array.sigma_mismatch_on);
  c.array.sigma_mismatch_off = cf.get_double("array", "sigma_mismatch_off", c.array.sigma_mismatch_off);
  c.array.fixed_offset_on = cf.get_double("array", "fixed_offset_on", c.array.fixed_offset_on);
  c.array.fixed_offset_off = cf.get_double("array", "fixed_offset_off", c.array.fixed_offset_off);
  {
    const std::string mode = cf.get_string("array", "mismatch_mode", "sampled");
    if (mode == "sampled")
      c.array.mode = ArrayConfig::MismatchMode::sampled;
    else if (mode == "fixed")
      c.array.mode = ArrayConfig::MismatchMode::fixed;
    else
      throw std::invalid_argument("array.mismatch_mode: expected sampled|fixed, got '" +
                                  mode + "'");
  }
  c.use_array = c.array.n_pixels > 1 || c.array.sigma_mismatch_on > 0.0 ||
                c.array.sigma_mismatch_off > 0.0 ||
                (c.array.mode == ArrayConfig::MismatchMode::fixed &&
                 (c.array.fixed_offset_on != 0.0 || c.array.fixed_offset_off != 0.0));

  {
    const std::string def =
        c.stimulus.type == StimulusConfig::Type::rptp ? "rptp" : "square_wave";
    const std::string type = cf.get_string("stimulus", "type", def);
    if (type == "square_wave")
      c.stimulus.type = StimulusConfig::Type::square_wave;
    else if (type == "rptp")
      c.stimulus.type = StimulusConfig::Type::rptp;
    else
      throw std::invalid_argument("stimulus.type: expected square_wave|rptp, got '" +
                                  type + "'");
  }
  double baseline = cf.get_double("stimulus", "baseline_lux", c.stimulus.sw.baseline_lux);
  c.stimulus.sw.baseline_lux = baseline;
  c.stimulus.rptp.baseline_lux = baseline;
  c.stimulus.sw.frequency_hz = cf.get_double("stimulus", "frequency_hz", c.stimulus.sw.frequency_hz);
  c.stimulus.sw.duty = cf.get_double("stimulus", "duty", c.stimulus.sw.duty);
  c.stimulus.sw.n_trials = cf.get_int("stimulus", "n_trials", c.stimulus.sw.n_trials);
  c.stimulus.rptp.reset_linear_contrast =
      cf.get_double("stimulus", "reset_contrast", c.stimulus.rptp.reset_linear_contrast);
  c.stimulus.rptp.reset_duration_s =
      1e-3 * cf.get_double("stimulus", "reset_ms", c.stimulus.rptp.reset_duration_s * 1e3);
  c.stimulus.rptp.test_duration_s =
      1e-3 * cf.get_double("stimulus", "test_ms", c.stimulus.rptp.test_duration_s * 1e3);
  c.stimulus.rptp.n_pulses = cf.get_int("stimulus", "n_pulses", c.stimulus.rptp.n_pulses);

  if (cf.has("sweep", "points") || cf.has("sweep", "lo") || cf.has("sweep", "hi")) {
    const int n = static_cast<int>(
        cf.get_int("sweep", "points", static_cast<int64_t>(c.sweep.linear_contrasts.size())));
    const double lo = cf.get_double("sweep", "lo", c.sweep.linear_contrasts.front());
    const double hi = cf.get_double("sweep", "hi", c.sweep.linear_contrasts.back());
    if (n < 2) throw std::invalid_argument("sweep.points: must be >= 2");
    if (!(lo > 0.0 && hi > lo))
      throw std::invalid_argument("sweep: need 0 < lo < hi");
    c.sweep = ContrastSweep::default_sweep(n, lo, hi);
  }

  c.rule.window_s = 1e-3 * cf.get_double("counting", "window_ms", c.rule.window_s * 1e3);
  c.rule.mode = c.stimulus.type == StimulusConfig::Type::rptp
                    ? CountingRule::Mode::rptp_window
                    : CountingRule::Mode::square_wave_per_edge;

  c.estimator.epsilon = cf.get_double("estimator", "epsilon", c.estimator.epsilon);
  {
    const std::string pol = cf.get_string("estimator", "polarity", "on");
    if (pol == "on")
      c.estimator.polarity = Polarity::on;
    else if (pol == "off")
      c.estimator.polarity = Polarity::off;
    else
      throw std::invalid_argument("estimator.polarity: expected on|off, got '" + pol + "'");
  }

  c.calib.run_duration_s = cf.get_double("calibration", "run_duration_s", c.calib.run_duration_s);
  c.calib.n_runs = static_cast<int>(cf.get_int("calibration", "n_runs", c.calib.n_runs));
  c.calib.rel_tolerance = cf.get_double("calibration", "tolerance", c.calib.rel_tolerance);

  c.dark_baselines_lux = cf.get_double_list("dark", "baselines_lux", c.dark_baselines_lux);
  c.dark_reference_lux = cf.get_double("dark", "reference_lux", c.dark_reference_lux);
  c.dark_planted_fa = cf.get_double("dark", "planted_dark_fa", c.dark_planted_fa);

  c.photometry.eta = cf.get_double("photometry", "eta", c.photometry.eta);
  c.photometry.pixel_pitch_m =
      1e-6 * cf.get_double("photometry", "pixel_pitch_um", c.photometry.pixel_pitch_m * 1e6);

  cf.reject_unconsumed();
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_file(const std::string& path) {
  return load_experiment(ConfigFile::parse(path));
}

}  // namespace evs::config
