#pragma once

#include <numbers>

namespace wireguide::constants {

// mu0 / (2 pi) is kept as its own literal so that the wire-field prefactor is
// exactly 2e-7 T m / A in double precision.
inline constexpr double mu0_over_2pi = 2.0e-7;               // T m / A
inline constexpr double mu0 = 2.0 * std::numbers::pi * mu0_over_2pi;
inline constexpr double bohr_magneton = 9.2740100783e-24;    // J / T
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double boltzmann = 1.380649e-23;            // J / K
inline constexpr double standard_gravity = 9.80665;          // m / s^2

inline constexpr double lithium7_mass = 1.165e-26;           // kg

// Unit conversions used at the configuration boundary.
inline constexpr double gauss = 1.0e-4;        // T
inline constexpr double micrometre = 1.0e-6;   // m
inline constexpr double millimetre = 1.0e-3;   // m
inline constexpr double microkelvin = 1.0e-6;  // K
inline constexpr double millisecond = 1.0e-3;  // s

}  // namespace wireguide::constants
