#pragma once

#include <cmath>

namespace jbasim {

// CODATA 2018 exact values (SI).
inline constexpr double kPlanck = 6.62607015e-34;    // J*s
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K

inline constexpr double kTwoPi = 6.283185307179586476925287;
inline constexpr double kSqrt3 = 1.7320508075688772935;

// Power conventions: dB values are referred to 1 mW at the fridge input.
inline double db_to_mw(double p_db) { return std::pow(10.0, p_db / 10.0); }
inline double mw_to_db(double p_mw) { return 10.0 * std::log10(p_mw); }

inline double ghz_to_rad_s(double f_ghz) { return kTwoPi * f_ghz * 1e9; }
inline double mhz_to_rad_s(double f_mhz) { return kTwoPi * f_mhz * 1e6; }

}  // namespace jbasim
