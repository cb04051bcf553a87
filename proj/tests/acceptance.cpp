// Acceptance gate: nine numbered criteria, one PASS/FAIL line each.
// Exit code = number of failed criteria.  Tolerances are pinned here, in
// code, so a regression cannot be "fixed" by editing a config file.
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evs/fit.hpp"
#include "evs/inference.hpp"
#include "evs/scurve.hpp"
#include "property_suites.hpp"

namespace fs = std::filesystem;
using suites::format;

namespace {

int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s - %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run(const char* id, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [ok, detail] = body();
    report(id, ok, detail);
  } catch (const std::exception& e) {
    report(id, false, std::string("unexpected exception: ") + e.what());
  }
}

double grid_step(const evs::SCurve& c) {
  double g = 0.0;
  for (size_t i = 1; i < c.points.size(); ++i)
    g = std::max(g, c.points[i].log_contrast - c.points[i - 1].log_contrast);
  return g;
}

// Shared across criteria: sigma calibrated per (bandwidth, target rate).
using CalKey = std::pair<double, double>;
std::map<CalKey, evs::NoiseCalibration> g_cal;

bool have_cal(double f3db, double ba) { return g_cal.count({f3db, ba}) > 0; }
double cal_sigma(double f3db, double ba) { return g_cal.at({f3db, ba}).calibrated_sigma; }

const evs::ContrastSweep kSweep30 = evs::ContrastSweep::default_sweep(30, 0.01, 0.7);
constexpr double kThetaTrue = 0.3;

// Plateau tolerance rule: eps*n_trials should tolerate ~4-6 unlucky misses
// per point, enough that one binomial flutter dip cannot break the
// "sustained" right-to-left scan, but not so loose that noise-assisted
// near-threshold points (p ~ 0.98) get counted into the plateau early.
// So eps = 0.02 at the 200-300 trial volumes and 0.01 at 400-500 trials,
// not the 0.005 library default meant for multi-thousand-trial runs.
constexpr double kEpsilon = 0.02;       // 200-300 trials per point
constexpr double kEpsilonHighN = 0.01;  // 400-500 trials per point

// 1. Noise-free pixel, theta 0.3, both stimuli: the S-curve is an exact
//    0/1 step, and both estimators land within one sweep grid step of 0.3.
std::pair<bool, std::string> c1() {
  evs::PixelConfig px;
  px.theta_on = px.theta_off = kThetaTrue;
  px.f3db_hz = 2000.0;
  px.noise_sigma = 0.0;
  px.refractory_s = 1e-2;

  evs::SquareWaveProtocol sw;
  sw.n_trials = 20;
  evs::RpTpProtocol rp;
  rp.n_pulses = 20;

  const evs::SCurve curves[2] = {
      evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on),
      evs::measure_scurve(kSweep30, rp, px, evs::Polarity::on),
  };

  bool ok = true;
  std::string detail;
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) {
      const double expect = pt.log_contrast > kThetaTrue ? 1.0 : 0.0;
      if (pt.probability != expect) {
        ok = false;
        detail += format("non-step p=%.3f at c=%.3f (%s); ", pt.probability,
                         pt.linear_contrast, curve.stimulus.c_str());
      }
    }
    const auto est = evs::estimate_thresholds(curve, kEpsilon);
    const double g = grid_step(curve);
    if (!(std::fabs(est.nct_50 - kThetaTrue) <= g) ||
        !(std::fabs(est.theta_100 - kThetaTrue) <= g))
      ok = false;
    detail += format("%s: nct=%.4f th100=%.4f (grid step %.4f); ",
                     curve.stimulus.c_str(), est.nct_50, est.theta_100, g);
  }
  return {ok, detail};
}

// 2. Calibrated noise reproduces each background-activity target within 10%
//    over thirty 100 s runs, for every bandwidth/target combination.
std::pair<bool, std::string> c2() {
  bool ok = true;
  std::string detail;
  for (double f3db : {2000.0, 200.0, 50.0})
    for (double ba : {0.5, 0.02}) {
      try {
        const auto cal = evs::calibrate_noise(f3db, ba, {});
        g_cal[{f3db, ba}] = cal;
        const double rel = std::fabs(cal.achieved_ba_hz - ba) / ba;
        if (!(rel <= 0.10)) ok = false;
        detail += format("%gHz@%gHz: sigma=%.4f ba=%.4f; ", f3db, ba,
                         cal.calibrated_sigma, cal.achieved_ba_hz);
      } catch (const std::exception& e) {
        ok = false;
        detail += format("%gHz@%gHz: %s; ", f3db, ba, e.what());
      }
    }

  // Setup for later criteria, not part of this check: at 50 Hz the rate is an
  // extremely steep function of sigma (a 3% sigma error moves the rate ~50%),
  // so re-calibrate those two sigmas with 4x the data before they are reused.
  for (double ba : {0.5, 0.02}) {
    try {
      evs::CalibrationOptions refine;
      refine.n_runs = 120;
      g_cal[{50.0, ba}] = evs::calibrate_noise(50.0, ba, refine);
    } catch (const std::exception& e) {
      detail += format("(50Hz@%gHz refine failed: %s); ", ba, e.what());
    }
  }
  return {ok, detail};
}

// 3. At 0.5 Hz background activity the half-rise point sits left of the true
//    threshold by at least two fit standard errors, at every bandwidth.
std::pair<bool, std::string> c3() {
  bool ok = true;
  std::string detail;
  for (double f3db : {2000.0, 200.0, 50.0}) {
    if (!have_cal(f3db, 0.5)) {
      ok = false;
      detail += format("%gHz: no calibration; ", f3db);
      continue;
    }
    evs::PixelConfig px;
    px.theta_on = px.theta_off = kThetaTrue;
    px.f3db_hz = f3db;
    px.noise_sigma = cal_sigma(f3db, 0.5);
    px.refractory_s = 1e-4;
    evs::SquareWaveProtocol sw;
    sw.n_trials = 300;
    const auto curve = evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on);
    const auto est = evs::estimate_thresholds(curve, kEpsilon);
    const bool shifted =
        est.nct_se > 0.0 && est.nct_50 + 2.0 * est.nct_se < kThetaTrue;
    if (!shifted) ok = false;
    detail += format("%gHz: nct=%.4f se=%.4f; ", f3db, est.nct_50, est.nct_se);
  }
  return {ok, detail};
}

// 4. Low bandwidth + low background activity: the plateau estimator stays
//    within 0.03 of the true threshold even though the half-rise point drifts.
std::pair<bool, std::string> c4() {
  if (!have_cal(50.0, 0.02)) return {false, "no calibration for 50 Hz @ 0.02 Hz"};
  evs::PixelConfig px;
  px.theta_on = px.theta_off = kThetaTrue;
  px.f3db_hz = 50.0;
  px.noise_sigma = cal_sigma(50.0, 0.02);
  px.refractory_s = 1e-2;
  evs::SquareWaveProtocol sw;
  sw.n_trials = 300;
  const auto curve = evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on);
  const auto est = evs::estimate_thresholds(curve, kEpsilon);
  const bool ok = std::fabs(est.theta_100 - kThetaTrue) <= 0.03;
  return {ok, format("theta_100=%.4f (want 0.30 +/- 0.03), nct=%.4f, sigma=%.4f",
                     est.theta_100, est.nct_50, px.noise_sigma)};
}

// 5. Deliberate ON/OFF imbalance (theta_on = 0.33): with a 100 us refractory
//    the ON plateau overshoots past 0.33; a 10 ms refractory pulls it back to
//    0.33 +/- 0.03.
std::pair<bool, std::string> c5() {
  if (!have_cal(50.0, 0.02)) return {false, "no calibration for 50 Hz @ 0.02 Hz"};
  evs::PixelConfig px;
  px.theta_on = 0.33;
  px.theta_off = 0.30;
  px.f3db_hz = 50.0;
  px.noise_sigma = cal_sigma(50.0, 0.02);
  evs::SquareWaveProtocol sw;
  sw.n_trials = 300;

  px.refractory_s = 1e-4;
  const auto fast = evs::estimate_thresholds(
      evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on), kEpsilon);
  px.refractory_s = 1e-2;
  const auto slow = evs::estimate_thresholds(
      evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on), kEpsilon);

  const bool ok =
      fast.theta_100 > 0.33 && std::fabs(slow.theta_100 - 0.33) <= 0.03;
  return {ok, format("100us: theta_100=%.4f (> 0.33); 10ms: theta_100=%.4f "
                     "(0.33 +/- 0.03); sigma=%.4f",
                     fast.theta_100, slow.theta_100, px.noise_sigma)};
}

// 6. With the recommended biases (50 Hz, 10 ms refractory, 0.5 Hz rate,
//    imbalanced thresholds) the square wave is at least as accurate as the
//    reset/test-pulse train, and both land within 0.05 of the truth.
std::pair<bool, std::string> c6() {
  if (!have_cal(50.0, 0.5)) return {false, "no calibration for 50 Hz @ 0.5 Hz"};
  evs::PixelConfig px;
  px.theta_on = 0.33;
  px.theta_off = 0.30;
  px.f3db_hz = 50.0;
  px.noise_sigma = cal_sigma(50.0, 0.5);
  px.refractory_s = 1e-2;

  evs::SquareWaveProtocol sw;
  sw.n_trials = 500;
  evs::RpTpProtocol rp;
  rp.n_pulses = 400;

  const auto est_sw = evs::estimate_thresholds(
      evs::measure_scurve(kSweep30, sw, px, evs::Polarity::on), kEpsilonHighN);
  const auto est_rp = evs::estimate_thresholds(
      evs::measure_scurve(kSweep30, rp, px, evs::Polarity::on), kEpsilonHighN);

  const double err_sw = std::fabs(est_sw.theta_100 - 0.33);
  const double err_rp = std::fabs(est_rp.theta_100 - 0.33);
  const bool ok = err_sw <= err_rp && err_sw <= 0.05 && err_rp <= 0.05;
  return {ok, format("sw theta_100=%.4f (err %.4f), rptp theta_100=%.4f "
                     "(err %.4f)",
                     est_sw.theta_100, err_sw, est_rp.theta_100, err_rp)};
}

// 7. Analytic checks on the filter: Euler step response reaches 1 - 1/e at
//    t = tau within 1%, and a 2 Hz filter recovers ~39.5% of a step within a
//    40 ms window.
std::pair<bool, std::string> c7() {
  const double dt = 1e-5;
  const double tau = 1.0 / (2.0 * M_PI * 50.0);
  const auto n = llround(tau / dt);
  double v = 0.0;
  for (int64_t i = 0; i < n; ++i) v = evs::lowpass_step(v, 1.0, dt, tau);
  const double target = 1.0 - std::exp(-1.0);
  const bool euler_ok = std::fabs(v - target) <= 0.01 * target;

  const double att = evs::bandwidth_attenuation(2.0, 0.040);
  const bool att_ok = std::fabs(att - 0.395) <= 0.005;
  return {euler_ok && att_ok,
          format("step(tau)=%.5f (want %.5f +/- 1%%), attenuation=%.5f "
                 "(want 0.395 +/- 0.005)",
                 v, target, att)};
}

// 8. Dark-current round trip: plant 5 fA, measure plateau contrasts across
//    five dim baselines plus a bright reference, invert, and recover the
//    planted value.  Also pin the two dimensionless inversion multipliers.
std::pair<bool, std::string> c8() {
  const double planted_a = 5e-15;
  evs::PixelConfig px;
  px.theta_on = px.theta_off = 0.35;
  px.f3db_hz = 50.0;
  px.noise_sigma = 0.3;
  // Re-referencing happens at refractory end, so the refractory must outlast
  // the filter transient (tau = 3.2 ms here): the 10x conditioning pulse
  // below fires within ~0.6 ms of its recovery edge, and a 10 ms refractory
  // would memorize a reference 0.085 below the settled baseline, dragging
  // theta_ref down and inflating the recovered dark current by ~60%.
  px.refractory_s = 25e-3;
  px.dark_current_a = planted_a;

  evs::RpTpProtocol rp;
  rp.n_pulses = 200;
  // Dark compression shrinks the conditioning pulse too: at 76 mlx a 0.5
  // reset contrast delivers only a 0.13 log step - below threshold, so it
  // never re-arms the reference and near-plateau pulses alternate hit/miss
  // against a reference stuck at the previous test top.  The conditioning
  // pulse must out-muscle the dark floor at the dimmest baseline (10x is a
  // 0.39 effective step there, comfortably above the 0.35 threshold).
  rp.reset_linear_contrast = 10.0;
  const auto sweep = evs::ContrastSweep::default_sweep(48, 0.05, 1.6);

  std::vector<std::pair<double, double>> family;  // (lux, plateau log contrast)
  for (double lux : {0.076, 0.133, 0.190, 0.247, 0.304}) {
    rp.baseline_lux = lux;
    const auto est = evs::estimate_thresholds(
        evs::measure_scurve(sweep, rp, px, evs::Polarity::on), kEpsilon);
    family.emplace_back(lux, est.theta_100);
  }
  rp.baseline_lux = 300.0;
  const auto ref = evs::estimate_thresholds(
      evs::measure_scurve(sweep, rp, px, evs::Polarity::on), kEpsilon);

  const auto dark = evs::infer_dark_current(family, ref.theta_100);
  const double rel_err = std::fabs(dark.mean_a - planted_a) / planted_a;
  const double spread = dark.std_a / dark.mean_a;

  const auto one = evs::infer_dark_current({{1.0, 0.8}}, 0.35);
  const double mult_curve = one.per_curve[0].i_dark_a / one.per_curve[0].i_pho1_a;
  const double mult_llco =
      evs::llco_dark_current(1.0, 0.25) / evs::lux_to_photocurrent(1.0, {});

  const bool ok = rel_err <= 0.10 && spread < 0.15 &&
                  std::fabs(mult_curve - 1.924) <= 0.001 &&
                  std::fabs(mult_llco - 2.521) <= 0.001;
  return {ok, format("mean=%.3f fA (planted 5, err %.1f%%), spread=%.1f%%, "
                     "theta_ref=%.4f, multipliers %.4f/%.4f",
                     dark.mean_a * 1e15, rel_err * 100.0, spread * 100.0,
                     ref.theta_100, mult_curve, mult_llco)};
}

// 9. Randomized invariant suites at full volume.
std::pair<bool, std::string> c9() {
  const fs::path tmp =
      fs::temp_directory_path() / ("evs_acc_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const auto results = suites::run_all(100, tmp.string());
  std::error_code ec;
  fs::remove_all(tmp, ec);

  bool ok = true;
  std::string detail;
  for (const auto& r : results) {
    if (!r.pass) {
      ok = false;
      detail += r.name + ": " + r.detail + "; ";
    }
  }
  if (ok) detail = format("%zu/%zu suites over 100 configs", results.size(), results.size());
  return {ok, detail};
}

}  // namespace

int main() {
  run("C1", c1);
  run("C2", c2);
  run("C3", c3);
  run("C4", c4);
  run("C5", c5);
  run("C6", c6);
  run("C7", c7);
  run("C8", c8);
  run("C9", c9);
  std::printf("acceptance: %d of 9 criteria failed\n", g_failures);
  return g_failures;
}
