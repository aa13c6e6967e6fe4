#include "dhnet/materials.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dhnet/errors.hpp"
#include "dhnet/log.hpp"

namespace dhnet {

namespace {

// literal power-form evaluation, matching the written fits term by term
double poly3(const std::array<double, 3>& c, double x) {
    return c[2] * x * x + c[1] * x + c[0];
}

double poly5(const std::array<double, 5>& c, double x) {
    return c[4] * x * x * x * x + c[3] * x * x * x + c[2] * x * x + c[1] * x + c[0];
}

void check_regime(const MaterialModel& m, double e, const char* where) {
    if (e < m.regime_lo || e > m.regime_hi) {
        std::ostringstream os;
        os << where << ": e = " << e << " J/m^3 outside validity regime ["
           << m.regime_lo << ", " << m.regime_hi << "]";
        log::warn_throttled(where, os.str());
    }
}

}  // namespace

double MaterialModel::temperature_of_energy(double e) const {
    if (e < 0.0) throw std::domain_error("temperature_of_energy: e < 0");
    check_regime(*this, e, "temperature_of_energy");
    return T0_ref * poly3(T_coeffs, e / e0);
}

double MaterialModel::energy_of_temperature(double T) const {
    const double t_star = T / T0_ref;
    const double t0 = T_coeffs[0], t1 = T_coeffs[1], t2 = T_coeffs[2];
    const double disc = t1 * t1 - 4.0 * t2 * (t0 - t_star);
    if (disc < 0.0) throw std::domain_error("energy_of_temperature: negative discriminant");
    const double e_star = 0.5 / t2 * (-t1 + std::sqrt(disc));
    if (e_star < 0.0) throw std::domain_error("energy_of_temperature: T below T(e=0)");
    return e_star * e0;
}

double MaterialModel::density_of_energy(double e) const {
    if (e < 0.0) throw std::domain_error("density_of_energy: e < 0");
    check_regime(*this, e, "density_of_energy");
    return rho0_ref * poly3(rho_coeffs, e / e0);
}

double MaterialModel::viscosity_of_energy(double e) const {
    if (e < 0.0) throw std::domain_error("viscosity_of_energy: e < 0");
    check_regime(*this, e, "viscosity_of_energy");
    return nu0_ref * poly5(nu_coeffs, e / e0);
}

namespace {

// Colebrook-White residual in x = 1/sqrt(lambda). Monotone increasing in x.
double cw_residual(double x, double reynolds, double rel_roughness) {
    return x + 2.0 * std::log10(2.52 * x / reynolds + rel_roughness / 3.71);
}

}  // namespace

double rough_limit_lambda(double rel_roughness) {
    if (rel_roughness <= 0.0) {
        throw std::domain_error("rough_limit_lambda: k_r/d must be positive");
    }
    const double x = 1.14 - 2.0 * std::log10(rel_roughness);
    return 1.0 / (x * x);
}

double smooth_limit_lambda(double reynolds) {
    if (reynolds <= 1.0) throw std::domain_error("smooth_limit_lambda: Re too small");
    // g(x) = x - 2 log10(Re/x) + 0.8 is monotone increasing
    auto g = [reynolds](double x) { return x - 2.0 * std::log10(reynolds / x) + 0.8; };
    double lo = 1e-6, hi = 50.0;
    if (g(lo) > 0.0 || g(hi) < 0.0) throw SolverError("smooth_limit_lambda: bracket failure");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) <= 0.0 ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    return 1.0 / (x * x);
}

double colebrook_lambda(double reynolds, double rel_roughness) {
    if (reynolds <= 0.0) throw std::domain_error("colebrook_lambda: Re must be positive");
    if (rel_roughness < 0.0) throw std::domain_error("colebrook_lambda: k_r/d must be >= 0");

    const int cap = 100;
    const double tol = 1e-12;
    double x = 8.0;  // lambda ~ 0.0156
    double damping = 1.0;
    std::vector<double> history;
    for (int i = 0; i < cap; ++i) {
        const double arg = 2.52 * x / reynolds + rel_roughness / 3.71;
        const double fx = -2.0 * std::log10(arg);
        if (!std::isfinite(fx) || fx <= 0.0) break;  // fall through to bisection
        const double next = x + damping * (fx - x);
        history.push_back(std::abs(next - x));
        if (std::abs(next - x) <= tol * std::max(1.0, std::abs(next))) {
            x = next;
            return 1.0 / (x * x);
        }
        if (history.size() >= 2 && history.back() > history[history.size() - 2]) {
            damping *= 0.5;  // diverging; damp
        }
        x = next;
    }

    // Bisection fallback on the monotone residual.
    double lo = 1e-8, hi = 100.0;
    if (cw_residual(lo, reynolds, rel_roughness) > 0.0 ||
        cw_residual(hi, reynolds, rel_roughness) < 0.0) {
        throw SolverError("colebrook_lambda: no root bracket", history);
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cw_residual(mid, reynolds, rel_roughness) <= 0.0 ? lo : hi) = mid;
    }
    x = 0.5 * (lo + hi);
    const double res = cw_residual(x, reynolds, rel_roughness);
    if (std::abs(res) > 1e-10) {
        throw SolverError("colebrook_lambda: residual " + std::to_string(res), {res});
    }
    return 1.0 / (x * x);
}

double friction_factor(double v, double e, const FrictionModel& model,
                       const MaterialModel& material) {
    switch (model.mode) {
        case FrictionMode::fixed_lambda:
            return model.fixed_value;
        case FrictionMode::fixed_reynolds:
            return colebrook_lambda(model.fixed_value, model.k_r / model.d);
        case FrictionMode::colebrook_white: {
            if (v == 0.0) {
                log::warn_throttled("friction_factor",
                                    "friction_factor: v = 0 in colebrook mode; "
                                    "returning rough-pipe limit");
                const double rr = model.k_r / model.d;
                return rr > 0.0 ? rough_limit_lambda(rr) : 0.0;
            }
            const double nu = material.viscosity_of_energy(e);
            const double reynolds = std::abs(v) * model.d / nu;
            if (reynolds <= 1e3) {
                log::warn_throttled("friction_factor_laminar",
                                    "friction_factor: Re = " + std::to_string(reynolds) +
                                        " <= 1e3, outside the turbulent regime");
            }
            return colebrook_lambda(reynolds, model.k_r / model.d);
        }
    }
    throw std::logic_error("friction_factor: unknown mode");
}

}  // namespace dhnet
