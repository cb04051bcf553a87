#pragma once
#include <cmath>
#include <stdexcept>

namespace evs {

inline constexpr double electron_charge_c = 1.602176634e-19;
inline constexpr double lumen_to_photon_flux = 1.12e16;

struct PhotometryConfig {
  double eta = 0.9;               // average spectral quantum efficiency, (0, 1]
  double pixel_pitch_m = 4.86e-6; // meters

  void validate() const {
    if (!(eta > 0.0) || eta > 1.0)
      throw std::invalid_argument("photometry.eta must be in (0, 1]");
    if (!(pixel_pitch_m > 0.0))
      throw std::invalid_argument("photometry.pixel_pitch_m must be > 0");
  }
};

// On-chip illuminance [lux] -> photodiode current [A].
inline double lux_to_photocurrent(double e_v_lux, const PhotometryConfig& pm) {
  pm.validate();
  if (e_v_lux < 0.0) throw std::invalid_argument("illuminance must be >= 0");
  return lumen_to_photon_flux * e_v_lux * pm.eta * electron_charge_c *
         pm.pixel_pitch_m * pm.pixel_pitch_m;
}

// Natural-log contrast between two illuminance (or photocurrent) levels.
inline double log_contrast(double e_max, double e_min) {
  if (!(e_min > 0.0)) throw std::invalid_argument("log_contrast: e_min must be > 0");
  if (e_max < e_min) throw std::invalid_argument("log_contrast: e_max must be >= e_min");
  return std::log(e_max / e_min);
}

// Linear contrast c maps to a level ratio of (1 + c); 100% contrast = doubling.
inline double linear_to_log_contrast(double c) {
  if (c < 0.0) throw std::invalid_argument("linear contrast must be >= 0");
  return std::log1p(c);
}

}  // namespace evs
