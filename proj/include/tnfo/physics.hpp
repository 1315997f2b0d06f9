#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnfo/errors.hpp"
#include "tnfo/network.hpp"

// Pure physical relations of the carrier loop, all strict SI. Every residual
// that enters the nonlinear program has a *_d companion returning the value
// together with its nonzero first and second partial derivatives, so the
// assembly layer never differentiates anything itself.
namespace tnfo {

// Operating state of one edge. alpha is only meaningful on pumped return
// pipes, QE/QS only on loads; unused fields stay zero.
struct EdgeState {
  double f = 0.0;      // kg/s
  double T_in = 0.0;   // K
  double T_out = 0.0;  // K
  double p_in = 0.0;   // Pa
  double p_out = 0.0;  // Pa
  double alpha = 0.0;  // Pa
  double QE = 0.0;     // W
  double QS = 0.0;     // W
};

// Insulated-pipe heat transfer chain: carrier-side film (alpha_a), pipe wall
// (K_a between d_a and d_b), insulation (K_b between d_b and d_c), and an
// exterior film (alpha_b + alpha_c combining convection and radiation).
struct HeatLossParams {
  double alpha_a;  // W/(m^2 K)
  double alpha_b;  // W/(m^2 K)
  double alpha_c;  // W/(m^2 K)
  double K_a;      // W/(m K)
  double K_b;      // W/(m K)
  double d_a;      // m
  double d_b;      // m
  double d_c;      // m
};

inline double heat_loss_coefficient(const HeatLossParams& p) {
  if (!(p.d_a > 0.0 && p.d_a < p.d_b && p.d_b < p.d_c))
    throw InvalidGeometry("heat_loss_coefficient: need 0 < d_a < d_b < d_c");
  if (!(p.alpha_a > 0.0) || !(p.K_a > 0.0) || !(p.K_b > 0.0) || !(p.alpha_b + p.alpha_c > 0.0))
    throw NonpositiveInput("heat_loss_coefficient: transfer coefficients must be positive");
  const double pi = std::numbers::pi;
  double inv = 1.0 / (p.alpha_a * pi * p.d_a) + std::log(p.d_b / p.d_a) / (2.0 * pi * p.K_a) +
               std::log(p.d_c / p.d_b) / (2.0 * pi * p.K_b) +
               1.0 / (pi * p.d_c * (p.alpha_b + p.alpha_c));
  return 1.0 / inv;
}

// Exponential relaxation of the carrier temperature toward ambient along a
// pipe. The f = 0 limit is T_ext; tiny positive flows underflow the
// exponential to the same limit, so the function is continuous on f >= 0.
inline double pipe_outlet_temperature(double T_in, double f, double L, double gamma, double c,
                                      double T_ext) {
  if (!(L >= 0.0) || !(gamma > 0.0) || !(c > 0.0))
    throw InvalidArgument("pipe_outlet_temperature: need L >= 0, gamma > 0, c > 0");
  if (f < 0.0)
    throw InvalidArgument("pipe_outlet_temperature: flow must be non-negative, got " +
                          std::to_string(f));
  if (f == 0.0) return L == 0.0 ? T_in : T_ext;
  return T_ext + (T_in - T_ext) * std::exp(-L * gamma / (c * f));
}

inline double steam_density(double p, double T, double R_s) {
  if (!(p > 0.0) || !(T > 0.0) || !(R_s > 0.0))
    throw NonpositiveInput("steam_density: need p > 0, T > 0, R_s > 0");
  return p / (R_s * T);
}

// ---- Energy balances -------------------------------------------------------

inline double plant_power_unchecked(double f, double T_in, double T_out,
                                    const CarrierConstants& c) {
  return c.c_w * f * (condensation_temperature - T_in) + c.c_L * f +
         c.c_s * f * (T_out - condensation_temperature);
}

// Power injected by a plant heating water at T_in into steam at T_out.
inline double plant_power(double f, double T_in, double T_out, const CarrierConstants& c) {
  if (!(T_in <= condensation_temperature && condensation_temperature <= T_out))
    throw PhaseOrderViolation("plant_power: need T_in <= 373.15 K <= T_out, got T_in=" +
                              std::to_string(T_in) + " T_out=" + std::to_string(T_out));
  return plant_power_unchecked(f, T_in, T_out, c);
}

struct PlantPowerDerivs {
  double value;  // W
  double df, dT_in, dT_out;
  double d2f_Tin, d2f_Tout;  // the only nonzero second partials
};

inline PlantPowerDerivs plant_power_d(double f, double T_in, double T_out,
                                      const CarrierConstants& c) {
  PlantPowerDerivs d;
  d.value = plant_power_unchecked(f, T_in, T_out, c);
  d.df = c.c_w * (condensation_temperature - T_in) + c.c_L +
         c.c_s * (T_out - condensation_temperature);
  d.dT_in = -c.c_w * f;
  d.dT_out = c.c_s * f;
  d.d2f_Tin = -c.c_w;
  d.d2f_Tout = c.c_s;
  return d;
}

// Load balance: steam cooling to 373.15 K + condensation + water cooling
// below 373.15 K must cover the demand, with QS absorbing shortfall and QE
// dumping excess. Zero at physical states.
inline double load_power_residual(const EdgeState& s, double Q, const CarrierConstants& c) {
  return c.c_s * s.f * (s.T_in - condensation_temperature) + c.c_L * s.f +
         c.c_w * s.f * (condensation_temperature - s.T_out) - Q - s.QE + s.QS;
}

struct LoadPowerDerivs {
  double value;  // W
  double df, dT_in, dT_out, dQE, dQS;
  double d2f_Tin, d2f_Tout;
};

inline LoadPowerDerivs load_power_residual_d(const EdgeState& s, double Q,
                                             const CarrierConstants& c) {
  LoadPowerDerivs d;
  d.value = load_power_residual(s, Q, c);
  d.df = c.c_s * (s.T_in - condensation_temperature) + c.c_L +
         c.c_w * (condensation_temperature - s.T_out);
  d.dT_in = c.c_s * s.f;
  d.dT_out = -c.c_w * s.f;
  d.dQE = -1.0;
  d.dQS = 1.0;
  d.d2f_Tin = c.c_s;
  d.d2f_Tout = -c.c_w;
  return d;
}

// ---- Pipe temperature decay residual ---------------------------------------

struct PipeTemperatureDerivs {
  double value;  // K
  double dT_in, dT_out, df;
  double d2f_f, d2f_Tin;
};

// Residual form T_out - T_ext - (T_in - T_ext) exp(-L gamma / (c f)).
// Requires f > 0; the solver's flow lower bound keeps iterates there.
inline PipeTemperatureDerivs pipe_temperature_residual_d(double T_in, double T_out, double f,
                                                         double L, double gamma, double c,
                                                         double T_ext) {
  const double k = L * gamma / c;
  const double E = std::exp(-k / f);
  PipeTemperatureDerivs d;
  d.value = T_out - T_ext - (T_in - T_ext) * E;
  d.dT_out = 1.0;
  d.dT_in = -E;
  const double Ekf2 = E * k / (f * f);
  d.df = -(T_in - T_ext) * Ekf2;
  d.d2f_Tin = -Ekf2;
  d.d2f_f = -(T_in - T_ext) * E * k * (k - 2.0 * f) / (f * f * f * f);
  return d;
}

inline double pipe_temperature_residual(double T_in, double T_out, double f, double L,
                                        double gamma, double c, double T_ext) {
  return T_out - T_ext - (T_in - T_ext) * std::exp(-L * gamma / (c * f));
}

// ---- Pressure drop residuals ------------------------------------------------

// Steam pipe momentum balance in Pa^2, compressible Darcy-Weisbach with the
// friction term integrated along the temperature decay profile. f|f| rather
// than f^2 keeps the sign physical for exploratory negative flows.
inline double steam_pressure_residual(const EdgeState& s, const Pipe& pipe, double R_s,
                                      double T_ext, double c_s) {
  const double A = cross_section_area(pipe.diameter);
  const double C = pipe.friction_factor * R_s / (A * A * pipe.diameter);
  const double B = c_s / pipe.heat_loss_coeff;
  return s.p_out * s.p_out - s.p_in * s.p_in +
         C * s.f * std::abs(s.f) * (T_ext * pipe.length + B * s.f * (s.T_in - s.T_out));
}

struct SteamPressureDerivs {
  double value;  // Pa^2
  double dp_in, dp_out, df, dT_in, dT_out;
  double d2pin_pin, d2pout_pout, d2f_f, d2f_Tin, d2f_Tout;
};

inline SteamPressureDerivs steam_pressure_residual_d(const EdgeState& s, const Pipe& pipe,
                                                     double R_s, double T_ext, double c_s) {
  const double A = cross_section_area(pipe.diameter);
  const double C = pipe.friction_factor * R_s / (A * A * pipe.diameter);
  const double B = c_s / pipe.heat_loss_coeff;
  const double af = std::abs(s.f);
  const double faf = s.f * af;
  const double dT = s.T_in - s.T_out;
  const double sgn = s.f > 0.0 ? 1.0 : (s.f < 0.0 ? -1.0 : 0.0);
  SteamPressureDerivs d;
  d.value = s.p_out * s.p_out - s.p_in * s.p_in + C * faf * (T_ext * pipe.length + B * s.f * dT);
  d.dp_in = -2.0 * s.p_in;
  d.dp_out = 2.0 * s.p_out;
  d.df = C * (2.0 * af * T_ext * pipe.length + 3.0 * B * dT * faf);
  d.dT_in = C * B * s.f * faf;
  d.dT_out = -d.dT_in;
  d.d2pin_pin = -2.0;
  d.d2pout_pout = 2.0;
  d.d2f_f = C * (2.0 * sgn * T_ext * pipe.length + 6.0 * B * dT * af);
  d.d2f_Tin = 3.0 * C * B * faf;
  d.d2f_Tout = -d.d2f_Tin;
  return d;
}

// Water pipe momentum balance in Pa; alpha is the pump boost at the inlet.
inline double water_pressure_residual(const EdgeState& s, const Pipe& pipe, double rho_w) {
  const double A = cross_section_area(pipe.diameter);
  const double W = pipe.friction_factor * pipe.length / (2.0 * A * A * pipe.diameter * rho_w);
  return s.p_out - s.p_in - s.alpha + W * s.f * std::abs(s.f);
}

struct WaterPressureDerivs {
  double value;  // Pa
  double dp_in, dp_out, dalpha, df;
  double d2f_f;
};

inline WaterPressureDerivs water_pressure_residual_d(const EdgeState& s, const Pipe& pipe,
                                                     double rho_w) {
  const double A = cross_section_area(pipe.diameter);
  const double W = pipe.friction_factor * pipe.length / (2.0 * A * A * pipe.diameter * rho_w);
  WaterPressureDerivs d;
  d.value = s.p_out - s.p_in - s.alpha + W * s.f * std::abs(s.f);
  d.dp_in = -1.0;
  d.dp_out = 1.0;
  d.dalpha = -1.0;
  d.df = 2.0 * W * std::abs(s.f);
  d.d2f_f = 2.0 * W * (s.f > 0.0 ? 1.0 : (s.f < 0.0 ? -1.0 : 0.0));
  return d;
}

// Outlet pressure solving the steam residual for p_out; empty when friction
// would consume more than the available p_in^2.
inline std::optional<double> steam_outlet_pressure(double p_in, const EdgeState& s,
                                                   const Pipe& pipe, double R_s, double T_ext,
                                                   double c_s) {
  const double A = cross_section_area(pipe.diameter);
  const double C = pipe.friction_factor * R_s / (A * A * pipe.diameter);
  const double B = c_s / pipe.heat_loss_coeff;
  const double drop =
      C * s.f * std::abs(s.f) * (T_ext * pipe.length + B * s.f * (s.T_in - s.T_out));
  const double q = p_in * p_in - drop;
  if (q <= 0.0) return std::nullopt;
  return std::sqrt(q);
}

inline double water_outlet_pressure(double p_in, double f, double alpha, const Pipe& pipe,
                                    double rho_w) {
  const double A = cross_section_area(pipe.diameter);
  const double W = pipe.friction_factor * pipe.length / (2.0 * A * A * pipe.diameter * rho_w);
  return p_in + alpha - W * f * std::abs(f);
}

// ---- Junction balances ------------------------------------------------------

// One edge's contribution at a junction: flow, the heat capacity of its phase
// at that endpoint, and the temperature it carries there.
struct CarrierStream {
  double f;  // kg/s
  double c;  // J/(kg K)
  double T;  // K
};

inline double junction_mass_residual(std::span<const CarrierStream> in,
                                     std::span<const CarrierStream> out) {
  double r = 0.0;
  for (const auto& s : in) r += s.f;
  for (const auto& s : out) r -= s.f;
  return r;
}

inline double junction_energy_residual(std::span<const CarrierStream> in,
                                       std::span<const CarrierStream> out) {
  double r = 0.0;
  for (const auto& s : in) r += s.f * s.c * s.T;
  for (const auto& s : out) r -= s.f * s.c * s.T;
  return r;
}

// Flow-weighted mean temperature of merging streams; the temperature a
// perfectly mixed junction hands to every departing edge.
inline double mixed_outflow_temperature(std::span<const CarrierStream> in) {
  double num = 0.0, den = 0.0;
  for (const auto& s : in) {
    num += s.f * s.c * s.T;
    den += s.f * s.c;
  }
  if (!(den > 0.0)) throw NonpositiveInput("mixed_outflow_temperature: no incoming heat flux");
  return num / den;
}

inline std::vector<double> mixing_residuals(double T_junction,
                                            std::span<const double> T_in_departing) {
  std::vector<double> r;
  r.reserve(T_in_departing.size());
  for (double t : T_in_departing) r.push_back(t - T_junction);
  return r;
}

}  // namespace tnfo
