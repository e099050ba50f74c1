#pragma once

// CODATA 2018 exact and derived values used for unit conversion.
namespace starktune::constants {

inline constexpr double elementary_charge = 1.602176634e-19; // C
inline constexpr double planck = 6.62607015e-34;             // J s
inline constexpr double speed_of_light = 299792458.0;        // m/s
inline constexpr double electron_volt = elementary_charge;   // J
inline constexpr double debye = 1.0e-21 / speed_of_light;    // C m

// 1 kV/cm expressed in V/m.
inline constexpr double kv_per_cm = 1.0e5;

} // namespace starktune::constants
