#pragma once

#include <cmath>
#include <numbers>

namespace photocorr {

/// FWHM of the two-detector difference-time response assumed by the fits.
inline constexpr double kSystemIrfFwhmPs = 50.0;

/// Standard deviation of a Gaussian with the given full width at half maximum.
inline double sigma_from_fwhm(double fwhm) {
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

}  // namespace photocorr
