#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "evs/array.hpp"
#include "evs/signal.hpp"
#include "evs/units.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

evs::PiecewiseSeries dc_current(double level, int64_t n, double dt = 1e-5) {
  evs::PiecewiseSeries s;
  s.dt_s = dt;
  s.unit = evs::SignalUnit::ampere;
  s.runs = {{level, n}};
  return s;
}

}  // namespace

TEST_CASE("threshold sampling is per-pixel deterministic and stable under growth") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 64;
  cfg.sigma_mismatch_on = 0.03;
  cfg.sigma_mismatch_off = 0.03;
  cfg.base_seed = 11;

  const auto a = evs::sample_thresholds(cfg);
  const auto b = evs::sample_thresholds(cfg);
  REQUIRE(a.size() == 64);
  CHECK(a == b);

  // growing the array keeps existing pixels' draws
  auto bigger = cfg;
  bigger.n_pixels = 128;
  const auto c = evs::sample_thresholds(bigger);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(c[i].first == a[i].first);
    CHECK(c[i].second == a[i].second);
  }

  auto reseeded = cfg;
  reseeded.base_seed = 12;
  CHECK(evs::sample_thresholds(reseeded) != a);
}

TEST_CASE("sampled threshold spread matches the requested sigma") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 20000;
  cfg.base.theta_on = 0.3;
  cfg.base.theta_off = 0.3;
  cfg.sigma_mismatch_on = 0.03;
  cfg.sigma_mismatch_off = 0.05;
  cfg.base_seed = 5;

  const auto th = evs::sample_thresholds(cfg);
  double mean_on = 0.0, mean_off = 0.0;
  for (const auto& [on, off] : th) {
    mean_on += on;
    mean_off += off;
  }
  mean_on /= double(th.size());
  mean_off /= double(th.size());
  double var_on = 0.0, var_off = 0.0;
  for (const auto& [on, off] : th) {
    var_on += (on - mean_on) * (on - mean_on);
    var_off += (off - mean_off) * (off - mean_off);
  }
  var_on /= double(th.size() - 1);
  var_off /= double(th.size() - 1);

  CHECK_THAT(mean_on, WithinAbs(0.3, 0.001));
  CHECK_THAT(mean_off, WithinAbs(0.3, 0.002));
  CHECK_THAT(std::sqrt(var_on), WithinRel(0.03, 0.03));
  CHECK_THAT(std::sqrt(var_off), WithinRel(0.05, 0.03));
}

TEST_CASE("fixed mismatch mode pins exact offsets") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 4;
  cfg.base.theta_on = 0.3;
  cfg.base.theta_off = 0.3;
  cfg.mode = evs::ArrayConfig::MismatchMode::fixed;
  cfg.fixed_offset_on = 0.03;
  cfg.fixed_offset_off = -0.03;

  const auto th = evs::sample_thresholds(cfg);
  for (const auto& [on, off] : th) {
    CHECK(on == 0.3 + 0.03);
    CHECK(off == 0.3 - 0.03);
  }

  cfg.fixed_offset_on = -0.3;  // would zero the threshold
  CHECK_THROWS_AS(evs::sample_thresholds(cfg), std::invalid_argument);
}

TEST_CASE("pathological mismatch that clamps many pixels is rejected") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 1000;
  cfg.base.theta_on = 0.05;
  cfg.base.theta_off = 0.05;
  cfg.sigma_mismatch_on = 0.2;  // huge spread around a tiny mean
  cfg.sigma_mismatch_off = 0.2;
  CHECK_THROWS_AS(evs::sample_thresholds(cfg), std::invalid_argument);

  // a tame spread never touches the floor
  cfg.sigma_mismatch_on = 0.001;
  cfg.sigma_mismatch_off = 0.001;
  CHECK_NOTHROW(evs::sample_thresholds(cfg));
}

TEST_CASE("array simulation is identical across thread counts") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 7;
  cfg.base.noise_sigma = 0.4;
  cfg.base.refractory_s = 1e-4;
  cfg.base.warmup_s = 0.02;
  cfg.sigma_mismatch_on = 0.03;
  cfg.sigma_mismatch_off = 0.03;
  cfg.base_seed = 21;

  const auto input = dc_current(1e-9, 30000);
  const auto serial = evs::simulate_array(input, cfg, 1);
  const auto threaded = evs::simulate_array(input, cfg, 4);

  REQUIRE(serial.streams.size() == 7);
  REQUIRE(threaded.streams.size() == 7);
  CHECK(serial.sampled_thetas == threaded.sampled_thetas);
  for (size_t i = 0; i < 7; ++i) {
    const auto& a = serial.streams[i].events;
    const auto& b = threaded.streams[i].events;
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].t_s == b[k].t_s);
      CHECK(a[k].polarity == b[k].polarity);
    }
    CHECK(serial.streams[i].pixel_id == int64_t(i));
  }
}

TEST_CASE("each array pixel reproduces a standalone pixel with the derived seed") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 3;
  cfg.base.noise_sigma = 0.4;
  cfg.base.refractory_s = 1e-4;
  cfg.base.warmup_s = 0.02;
  cfg.sigma_mismatch_on = 0.02;
  cfg.sigma_mismatch_off = 0.02;
  cfg.base_seed = 33;

  const auto input = dc_current(1e-9, 20000);
  const auto res = evs::simulate_array(input, cfg);

  for (int64_t i = 0; i < cfg.n_pixels; ++i) {
    evs::PixelConfig pc = cfg.base;
    pc.theta_on = res.sampled_thetas[size_t(i)].first;
    pc.theta_off = res.sampled_thetas[size_t(i)].second;
    pc.seed = evs::mix_seed(cfg.base_seed, uint64_t(i));
    const auto solo = evs::simulate_pixel(input, pc, i);
    REQUIRE(solo.events.size() == res.streams[size_t(i)].events.size());
    for (size_t k = 0; k < solo.events.size(); ++k)
      CHECK(solo.events[k].t_s == res.streams[size_t(i)].events[k].t_s);
  }

  // distinct pixels see distinct noise
  bool any_diff = false;
  const auto& s0 = res.streams[0].events;
  const auto& s1 = res.streams[1].events;
  if (s0.size() != s1.size())
    any_diff = true;
  else
    for (size_t k = 0; k < s0.size() && !any_diff; ++k) any_diff = s0[k].t_s != s1[k].t_s;
  CHECK(any_diff);
}

TEST_CASE("array config validation") {
  evs::ArrayConfig cfg;
  cfg.n_pixels = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.n_pixels = 1;
  cfg.sigma_mismatch_on = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.sigma_mismatch_on = 0.0;
  cfg.base.f3db_hz = 0.0;  // nested pixel config is checked too
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
