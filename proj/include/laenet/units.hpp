#pragma once

#include <cmath>

namespace laenet {

// Decibel helpers. beta0 is specified as a power ratio in dB, noise as an
// absolute level in dBm; both are converted to linear units once at load.
inline double db_to_linear(double x_db) { return std::pow(10.0, x_db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

inline double dbm_to_watts(double x_dbm) { return std::pow(10.0, (x_dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double x_w) { return 10.0 * std::log10(x_w) + 30.0; }

}  // namespace laenet
