#pragma once

// Internal units: hbar = 1, time in ms, angular frequency in rad/ms,
// diffusion coefficients in hbar^2/ms.

#include <complex>
#include <numbers>

namespace rotor {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad_per_ms(double hz) { return kTwoPi * hz * 1e-3; }
constexpr double khz_to_rad_per_ms(double khz) { return kTwoPi * khz; }
constexpr double rad_per_ms_to_khz(double w) { return w / kTwoPi; }
constexpr double rad_per_ms_to_hz(double w) { return w / kTwoPi * 1e3; }

}  // namespace rotor
