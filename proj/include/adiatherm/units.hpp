// units.hpp: physical constants (CODATA 2018, exact SI values) and frequency conversions

#pragma once

#include <numbers>

namespace adiatherm::units {

inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_B = 1.380649e-23;      // J / K

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Ordinary frequency in kHz to angular frequency in rad/s.
inline constexpr double angular_from_khz(double khz) { return two_pi * 1e3 * khz; }
inline constexpr double angular_from_mhz(double mhz) { return two_pi * 1e6 * mhz; }
inline constexpr double khz_from_angular(double w) { return w / (two_pi * 1e3); }

}  // namespace adiatherm::units
