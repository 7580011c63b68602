#pragma once

#include <numbers>

namespace ionpair {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bohr magneton over Planck constant.
inline constexpr double kBohrMhzPerGauss = 1.399624;

// Internal units are rad/s and seconds. These helpers convert at I/O boundaries.
constexpr double mhz(double f_over_2pi_mhz) { return kTwoPi * 1e6 * f_over_2pi_mhz; }
constexpr double to_mhz(double rad_per_s) { return rad_per_s / (kTwoPi * 1e6); }
constexpr double ns(double t) { return t * 1e-9; }
constexpr double to_ns(double seconds) { return seconds * 1e9; }

}  // namespace ionpair
