#pragma once

#include <array>

namespace dhnet {

/// Water property polynomials in the scaled internal energy density
/// e* = e / e0. Coefficients are stored constant-term first.
struct MaterialModel {
    std::array<double, 3> T_coeffs{1.93729, 220.536, 59.2453};
    std::array<double, 3> rho_coeffs{1.00280, -0.025576, -0.208084};
    std::array<double, 5> nu_coeffs{1.42624, -7.00355, 17.6559, -22.8079, 11.9285};

    double e0 = 1e9;        // reference energy density [J/m^3]
    double T0_ref = 1.0;    // [degC]
    double rho0_ref = 1e3;  // [kg/m^3]
    double nu0_ref = 1e-6;  // [m^2/s]

    // validity regime of the polynomial fits
    double regime_lo = 0.2e9;  // [J/m^3]
    double regime_hi = 0.5e9;  // [J/m^3]

    /// e [J/m^3] -> T [degC]. Warns outside the validity regime.
    double temperature_of_energy(double e) const;

    /// Exact quadratic inverse of temperature_of_energy.
    double energy_of_temperature(double T) const;

    /// e [J/m^3] -> rho [kg/m^3]
    double density_of_energy(double e) const;

    /// e [J/m^3] -> kinematic viscosity [m^2/s]
    double viscosity_of_energy(double e) const;
};

enum class FrictionMode { colebrook_white, fixed_lambda, fixed_reynolds };

struct FrictionModel {
    FrictionMode mode = FrictionMode::colebrook_white;
    double k_r = 0.0;   // pipe roughness [m]
    double d = 0.1;     // diameter [m]
    // lambda in fixed_lambda mode, Reynolds number in fixed_reynolds mode
    double fixed_value = 0.0;
};

/// Darcy friction factor. In colebrook_white mode the Reynolds number is
/// Re = |v| d / nu(e); at v = 0 the completely-rough limit is returned and
/// a laminar-regime warning is emitted (the friction force vanishes with
/// |v| v anyway).
double friction_factor(double v, double e, const FrictionModel& model,
                       const MaterialModel& material);

/// Root of 1/sqrt(lambda) = -2 log10(2.52/(Re sqrt(lambda)) + (k_r/d)/3.71).
/// Damped fixed point on x = 1/sqrt(lambda) with bisection fallback;
/// tolerance 1e-12 on x, iteration cap 100.
double colebrook_lambda(double reynolds, double rel_roughness);

/// Completely-rough limit 1/sqrt(lambda) = 1.14 - 2 log10(k_r/d).
double rough_limit_lambda(double rel_roughness);

/// Hydraulically-smooth relation 1/sqrt(lambda) = 2 log10(Re sqrt(lambda)) - 0.8,
/// solved by bisection.
double smooth_limit_lambda(double reynolds);

}  // namespace dhnet
