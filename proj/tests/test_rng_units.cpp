#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "evs/rng.hpp"
#include "evs/units.hpp"

TEST_CASE("splitmix64 matches the reference sequence") {
  uint64_t state = 0;
  CHECK(evs::splitmix64(state) == 0xe220a8397b1dcdafull);
  CHECK(evs::splitmix64(state) == 0x6e789e6aa1b965f4ull);
  CHECK(evs::splitmix64(state) == 0x06c45d188009454full);
}

TEST_CASE("mix_seed separates nearby inputs") {
  std::set<uint64_t> seen;
  for (uint64_t a = 0; a < 10; ++a)
    for (uint64_t b = 0; b < 10; ++b) seen.insert(evs::mix_seed(a, b));
  CHECK(seen.size() == 100);
  CHECK(evs::mix_seed(1, 2) != evs::mix_seed(2, 1));
  CHECK(evs::mix_seed(1, 2, 3) != evs::mix_seed(1, 2, 4));
}

TEST_CASE("rng is deterministic per seed and distinct across seeds") {
  evs::Rng a(42), b(42), c(43);
  bool all_equal_ab = true, any_diff_ac = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    all_equal_ab = all_equal_ab && va == vb;
    any_diff_ac = any_diff_ac || va != vc;
  }
  CHECK(all_equal_ab);
  CHECK(any_diff_ac);
}

TEST_CASE("uniform stays in (0, 1] with a sane mean") {
  evs::Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
    sum += u;
  }
  CHECK_THAT(sum / 20000, Catch::Matchers::WithinAbs(0.5, 0.01));
}

TEST_CASE("gauss has standard-normal moments") {
  evs::Rng rng(123);
  double sum = 0.0, sum2 = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gauss();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.02));
  CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 0.03));
}

TEST_CASE("photocurrent conversion hits the worked 76 mlx example") {
  // independent recomputation: flux * lux * eta * q * pitch^2
  const evs::PhotometryConfig pm;
  const double expected =
      1.12e16 * 0.076 * 0.9 * 1.602176634e-19 * 4.86e-6 * 4.86e-6;
  const double got = evs::lux_to_photocurrent(0.076, pm);
  CHECK_THAT(got, Catch::Matchers::WithinRel(expected, 1e-12));
  CHECK_THAT(got, Catch::Matchers::WithinAbs(2.90e-15, 0.01e-15));
}

TEST_CASE("photocurrent is linear in illuminance") {
  const evs::PhotometryConfig pm;
  const double i1 = evs::lux_to_photocurrent(10.0, pm);
  const double i2 = evs::lux_to_photocurrent(30.0, pm);
  CHECK_THAT(i2 / i1, Catch::Matchers::WithinRel(3.0, 1e-12));
  CHECK(evs::lux_to_photocurrent(0.0, pm) == 0.0);
}

TEST_CASE("photometry validation") {
  evs::PhotometryConfig pm;
  pm.eta = 0.0;
  CHECK_THROWS_AS(evs::lux_to_photocurrent(1.0, pm), std::invalid_argument);
  pm.eta = 1.5;
  CHECK_THROWS_AS(evs::lux_to_photocurrent(1.0, pm), std::invalid_argument);
  pm = {};
  pm.pixel_pitch_m = -1.0;
  CHECK_THROWS_AS(evs::lux_to_photocurrent(1.0, pm), std::invalid_argument);
  CHECK_THROWS_AS(evs::lux_to_photocurrent(-0.1, evs::PhotometryConfig{}),
                  std::invalid_argument);
}

TEST_CASE("log contrast definitions") {
  CHECK_THAT(evs::log_contrast(200.0, 100.0),
             Catch::Matchers::WithinRel(std::log(2.0), 1e-14));
  CHECK(evs::log_contrast(100.0, 100.0) == 0.0);
  CHECK_THROWS_AS(evs::log_contrast(100.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(evs::log_contrast(50.0, 100.0), std::invalid_argument);

  // ln(1 + c): invert to verify
  const double lc = evs::linear_to_log_contrast(0.3);
  CHECK_THAT(std::expm1(lc), Catch::Matchers::WithinRel(0.3, 1e-14));
  CHECK(evs::linear_to_log_contrast(0.0) == 0.0);
  CHECK_THROWS_AS(evs::linear_to_log_contrast(-0.2), std::invalid_argument);
}
