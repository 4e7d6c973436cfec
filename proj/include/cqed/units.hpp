#pragma once

// Unit conventions used across the library:
//   * rates and frequencies are ordinary frequencies in GHz (an angular rate
//     quoted as "2pi x 19 GHz" is stored as 19.0);
//   * times are in ns, so an ordinary rate f [GHz] corresponds to the angular
//     rate 2*pi*f [1/ns];
//   * wavelengths and geometry are in nm.

#include <numbers>

namespace cqed::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Speed of light expressed as GHz * nm.
inline constexpr double speed_of_light_ghz_nm = 299792458.0;

/// Optical frequency [GHz] for a vacuum wavelength [nm].
constexpr double frequency_from_wavelength(double lambda_nm) {
    return speed_of_light_ghz_nm / lambda_nm;
}

/// Angular rate [1/ns] for an ordinary rate [GHz].
constexpr double angular(double rate_ghz) { return two_pi * rate_ghz; }

}  // namespace cqed::units
