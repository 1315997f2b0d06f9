#pragma once

// Unit conversions between the internal SI representation (Pa, K, W, kg/s)
// and the display units used in files and reports (psi, degC, MW, kg/s).

namespace tnfo::units {

inline constexpr double pascal_per_psi = 6894.757293168361;  // 4.4482216152605 N / (0.0254 m)^2
inline constexpr double kelvin_offset = 273.15;
inline constexpr double watt_per_megawatt = 1e6;

constexpr double psi_to_pascal(double psi) { return psi * pascal_per_psi; }
constexpr double pascal_to_psi(double pa) { return pa / pascal_per_psi; }

constexpr double celsius_to_kelvin(double c) { return c + kelvin_offset; }
constexpr double kelvin_to_celsius(double k) { return k - kelvin_offset; }

constexpr double megawatt_to_watt(double mw) { return mw * watt_per_megawatt; }
constexpr double watt_to_megawatt(double w) { return w / watt_per_megawatt; }

}  // namespace tnfo::units
