// Minimal tour: build a square-wave stimulus, run one pixel, print the events.
#include <cstdio>

#include "evs/pixel.hpp"
#include "evs/signal.hpp"

int main() {
  evs::SquareWaveSpec stim;
  stim.baseline = 100.0;        // lux
  stim.linear_contrast = 0.5;   // 50% steps, comfortably above theta
  stim.frequency_hz = 5.0;
  stim.duration_s = 1.0;

  evs::PixelConfig pixel;
  pixel.theta_on = 0.3;
  pixel.theta_off = 0.3;
  pixel.f3db_hz = 2000.0;
  pixel.noise_sigma = 0.02;
  pixel.refractory_s = 1e-3;
  pixel.seed = 7;

  auto lux = evs::make_square_wave_runs(stim, pixel.dt_s);
  auto current = evs::to_photocurrent(lux, evs::PhotometryConfig{});
  evs::EventStream ev = evs::simulate_pixel(current, pixel);

  std::printf("%zu events in %.2f s\n", ev.events.size(), ev.duration_s);
  for (const auto& e : ev.events)
    std::printf("  t=%8.4f s  %s\n", e.t_s, evs::to_string(e.polarity));
  return 0;
}
