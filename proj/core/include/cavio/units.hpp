#pragma once

#include <numbers>

// Configs and reports use linear-frequency units: GHz for frequencies and
// MHz for rates and couplings, both quoted as "value/2pi". Internally every
// frequency, rate and coupling is angular, in rad/ns.
namespace cavio::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double ghz_to_angular(double f_ghz) { return kTwoPi * f_ghz; }
constexpr double mhz_to_angular(double f_mhz) { return kTwoPi * 1e-3 * f_mhz; }
constexpr double angular_to_ghz(double w) { return w / kTwoPi; }
constexpr double angular_to_mhz(double w) { return 1e3 * w / kTwoPi; }

}  // namespace cavio::units
