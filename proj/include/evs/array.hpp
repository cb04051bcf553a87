#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pixel.hpp"
#include "rng.hpp"

namespace evs {

// Multi-pixel simulation: thresholds vary pixel-to-pixel, everything else is
// uniform.  Per-pixel RNG streams derive from (base_seed, pixel index), so
// growing the array never reshuffles existing pixels' noise.
struct ArrayConfig {
  int64_t n_pixels = 1;
  PixelConfig base;
  double sigma_mismatch_on = 0.0;
  double sigma_mismatch_off = 0.0;
  uint64_t base_seed = 1;

  // fixed mode pins exact offsets instead of sampling (e.g. +1 sigma exactly)
  enum class MismatchMode { sampled, fixed } mode = MismatchMode::sampled;
  double fixed_offset_on = 0.0;
  double fixed_offset_off = 0.0;

  void validate() const {
    if (n_pixels < 1) throw std::invalid_argument("array: n_pixels must be >= 1");
    if (sigma_mismatch_on < 0.0 || sigma_mismatch_off < 0.0)
      throw std::invalid_argument("array: mismatch sigmas must be >= 0");
    base.validate();
  }
};

struct ArrayResult {
  std::vector<EventStream> streams;
  std::vector<std::pair<double, double>> sampled_thetas;  // (theta_on, theta_off)
};

inline constexpr double threshold_floor = 0.01;

inline std::vector<std::pair<double, double>> sample_thresholds(const ArrayConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<size_t>(cfg.n_pixels));

  if (cfg.mode == ArrayConfig::MismatchMode::fixed) {
    const double on = cfg.base.theta_on + cfg.fixed_offset_on;
    const double off = cfg.base.theta_off + cfg.fixed_offset_off;
    if (!(on > 0.0) || !(off > 0.0))
      throw std::invalid_argument("array: fixed threshold offsets drive a threshold <= 0");
    out.assign(static_cast<size_t>(cfg.n_pixels), {on, off});
    return out;
  }

  int64_t clamped = 0;
  for (int64_t i = 0; i < cfg.n_pixels; ++i) {
    Rng rng(mix_seed(cfg.base_seed, seed_stream::thresholds, static_cast<uint64_t>(i)));
    double on = cfg.base.theta_on + cfg.sigma_mismatch_on * rng.gauss();
    double off = cfg.base.theta_off + cfg.sigma_mismatch_off * rng.gauss();
    if (on < threshold_floor) { on = threshold_floor; ++clamped; }
    if (off < threshold_floor) { off = threshold_floor; ++clamped; }
    out.emplace_back(on, off);
  }
  if (static_cast<double>(clamped) > 0.001 * static_cast<double>(cfg.n_pixels))
    throw std::invalid_argument(
        "array: threshold clamping at the 0.01 floor would affect > 0.1% of pixels (" +
        std::to_string(clamped) + " of " + std::to_string(cfg.n_pixels) + ")");
  return out;
}

// Pixels are independent; results merge by index, so the outcome is identical
// whether they run serially or across threads.
template <class Input>
ArrayResult simulate_array(const Input& input, const ArrayConfig& cfg, int jobs = 1) {
  ArrayResult res;
  res.sampled_thetas = sample_thresholds(cfg);
  res.streams.resize(static_cast<size_t>(cfg.n_pixels));

  std::vector<std::string> errors(static_cast<size_t>(cfg.n_pixels));
  auto run_pixel = [&](int64_t i) {
    PixelConfig pc = cfg.base;
    pc.theta_on = res.sampled_thetas[static_cast<size_t>(i)].first;
    pc.theta_off = res.sampled_thetas[static_cast<size_t>(i)].second;
    pc.seed = mix_seed(cfg.base_seed, static_cast<uint64_t>(i));
    try {
      res.streams[static_cast<size_t>(i)] = simulate_pixel(input, pc, i);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  };

  if (jobs <= 1 || cfg.n_pixels == 1) {
    for (int64_t i = 0; i < cfg.n_pixels; ++i) run_pixel(i);
  } else {
    const int n_threads = static_cast<int>(std::min<int64_t>(jobs, cfg.n_pixels));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (int64_t i = t; i < cfg.n_pixels; i += n_threads) run_pixel(i);
      });
    for (auto& th : pool) th.join();
  }

  for (int64_t i = 0; i < cfg.n_pixels; ++i)
    if (!errors[static_cast<size_t>(i)].empty())
      throw std::runtime_error("pixel " + std::to_string(i) + ": " +
                               errors[static_cast<size_t>(i)]);
  return res;
}

}  // namespace evs
