#include "starktune/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "starktune/error.hpp"

namespace starktune {

SdSensitivity sensitivity(const MoleculeModel& mol, const NoiseModel& noise) {
    return {mol.kappa_xx * noise.sigma_ex * noise.sigma_ex, mol.kappa_zz * noise.sigma_ez * noise.sigma_ez,
            noise.sigma0};
}

void TuningConstraints::validate() const {
    if (!(e_x_max > 0.0)) throw ConfigError("constraints: e_x_max must be > 0");
    if (!(e_z_max > 0.0)) throw ConfigError("constraints: e_z_max must be > 0");
    if (!(shift_tolerance > 0.0)) throw ConfigError("constraints: shift_tolerance must be > 0");
}

namespace {

void require_quadratic(const MoleculeModel& mol, const char* who) {
    if (mol.d_x != 0.0 || mol.d_z != 0.0) throw std::invalid_argument(fmt::format("{}: requires d = 0", who));
    if (!(mol.kappa_xx >= 0.0 && mol.kappa_zz >= 0.0)) throw std::invalid_argument(fmt::format("{}: kappas must be >= 0", who));
}

struct Interval {
    double lo, hi;
};

// Range of kappa u^2 for u in [u_lo, u_hi].
Interval shift_range(double kappa, double u_lo, double u_hi) {
    const double a = std::abs(u_lo), b = std::abs(u_hi);
    const double lo = (u_lo <= 0.0 && u_hi >= 0.0) ? 0.0 : std::min(a, b);
    return {kappa * lo * lo, kappa * std::max(a, b) * std::max(a, b)};
}

// Total field on [u_lo, u_hi] with kappa u^2 = s, closest to `prefer`.
double pick_root(double kappa, double s, double u_lo, double u_hi, double prefer) {
    if (kappa == 0.0) return std::clamp(prefer, u_lo, u_hi);
    const double r = std::sqrt(std::max(s, 0.0) / kappa);
    const double slack = 1e-9 * std::max(1.0, r);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double u : {r, -r}) {
        if (u < u_lo - slack || u > u_hi + slack) continue;
        if (std::isnan(best) || std::abs(u - prefer) < std::abs(best - prefer)) best = u;
    }
    return std::clamp(best, u_lo, u_hi);
}

} // namespace

std::vector<FieldVector> isofrequency_locus(const MoleculeModel& mol, double target_shift, int n_points,
                                            double line_extent) {
    require_quadratic(mol, "isofrequency_locus");
    if (n_points < 1) throw std::invalid_argument("isofrequency_locus: n_points must be >= 1");
    if (mol.kappa_xx == 0.0 && mol.kappa_zz == 0.0) throw std::invalid_argument("isofrequency_locus: both kappas are zero");
    if (target_shift > 0.0) {
        throw InfeasibleError("sign", "isofrequency_locus: a quadratic red-shift model cannot reach a blue target");
    }
    const FieldVector e0 = mol.intrinsic_field();
    const double t = -target_shift;
    std::vector<FieldVector> out;
    if (t == 0.0) {
        out.push_back(FieldVector{} - e0);
        return out;
    }
    const auto n = static_cast<std::size_t>(n_points);
    if (mol.kappa_zz == 0.0 || mol.kappa_xx == 0.0) {
        const bool vertical = mol.kappa_zz == 0.0;
        const double r = std::sqrt(t / (vertical ? mol.kappa_xx : mol.kappa_zz));
        const std::size_t per = std::max<std::size_t>(n / 2, 1);
        for (double side : {-r, r}) {
            for (std::size_t i = 0; i < per; ++i) {
                const double s = per == 1 ? 0.0 : -line_extent + 2.0 * line_extent * static_cast<double>(i) / static_cast<double>(per - 1);
                const FieldVector u = vertical ? FieldVector{side, s} : FieldVector{s, side};
                out.push_back(u - e0);
            }
        }
        return out;
    }
    const double rx = std::sqrt(t / mol.kappa_xx);
    const double rz = std::sqrt(t / mol.kappa_zz);
    for (std::size_t i = 0; i < n; ++i) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        out.push_back(FieldVector{rx * std::cos(th), rz * std::sin(th)} - e0);
    }
    return out;
}

TuningPlan plan_shift_split(const SdSensitivity& sens, double target_shift,
                            double shift_x_min, double shift_x_max,
                            double shift_z_min, double shift_z_max) {
    if (!(sens.a_x >= 0.0 && sens.a_z >= 0.0 && sens.sigma0 >= 0.0)) {
        throw std::invalid_argument("plan: sensitivities must be >= 0");
    }
    if (target_shift > 0.0) throw InfeasibleError("sign", "plan: a quadratic red-shift model cannot reach a blue target");
    const double t = -target_shift;
    const double lo = std::max(shift_x_min, t - shift_z_max);
    const double hi = std::min(shift_x_max, t - shift_z_min);
    const double slack = 1e-12 * std::max(1.0, t);
    if (lo > hi + slack) {
        if (t > shift_x_max + shift_z_max) {
            const bool x_only = !(shift_z_max > 0.0);
            const bool z_only = !(shift_x_max > 0.0);
            const std::string binding = x_only ? "e_x_max" : z_only ? "e_z_max" : "e_x_max+e_z_max";
            throw InfeasibleError(binding, fmt::format("plan: |target| {:.1f} MHz exceeds the reachable {:.1f} MHz", t,
                                                       shift_x_max + shift_z_max));
        }
        throw InfeasibleError("intrinsic_offset", fmt::format("plan: |target| {:.1f} MHz is below the minimum reachable {:.1f} MHz",
                                                              t, shift_x_min + shift_z_min));
    }
    TuningPlan p;
    p.target_shift = target_shift;
    p.shift_x = std::clamp(sens.a_x <= sens.a_z ? hi : lo, std::min(lo, hi), std::max(lo, hi));
    p.shift_z = std::max(t - p.shift_x, 0.0);
    p.predicted_sigma = std::sqrt(sens.sigma0 * sens.sigma0 + 4.0 * sens.a_x * p.shift_x + 4.0 * sens.a_z * p.shift_z);
    p.feasible = true;
    return p;
}

TuningPlan plan_min_sd(const MoleculeModel& mol, const NoiseModel& noise, double target_shift,
                       const TuningConstraints& constraints) {
    require_quadratic(mol, "plan_min_sd");
    constraints.validate();
    const FieldVector e0 = mol.intrinsic_field();
    const double ux_lo = -constraints.e_x_max + e0.e_x, ux_hi = constraints.e_x_max + e0.e_x;
    const double uz_lo = e0.e_z, uz_hi = constraints.e_z_max + e0.e_z;
    const Interval sx = shift_range(mol.kappa_xx, ux_lo, ux_hi);
    const Interval sz = shift_range(mol.kappa_zz, uz_lo, uz_hi);

    TuningPlan p = plan_shift_split(sensitivity(mol, noise), target_shift, sx.lo, sx.hi, sz.lo, sz.hi);
    const double ux = pick_root(mol.kappa_xx, p.shift_x, ux_lo, ux_hi, e0.e_x);
    const double uz = pick_root(mol.kappa_zz, p.shift_z, uz_lo, uz_hi, e0.e_z);
    p.field = FieldVector{ux, uz} - e0;
    p.predicted_sigma = sd_sigma(mol, *p.field, noise);
    return p;
}

EgossSchedule synthesize_schedule(const TuningPlan& plan, const MoleculeModel& mol, const FieldState& state,
                                  const ChargeDynamics& dyn, const ElectrodeGeometry& geom,
                                  double operating_voltage, double intensity, double shift_tolerance) {
    if (!plan.feasible || !plan.field) throw std::invalid_argument("synthesize_schedule: plan without a feasible field");
    if (!(intensity > 0.0)) throw std::invalid_argument("synthesize_schedule: intensity must be > 0");
    dyn.validate();
    geom.validate();
    if (!geom.in_range(operating_voltage)) {
        throw InfeasibleError("v_range", "synthesize_schedule: operating voltage outside the electrode range");
    }

    const double leak = std::isfinite(dyn.decay_time) ? 1.0 / dyn.decay_time : 0.0;
    const double ks = dyn.k_screen * intensity;
    const double rate_s = ks + leak;
    const double rz = dyn.r_z * intensity;
    const double rate_z = rz / dyn.e_z_sat + leak;
    const double z_limit = rz / rate_z;

    const double s_target = plan.field->e_x - geom.g * operating_voltage;
    const double z_target = plan.field->e_z;
    const double s0 = state.e_screen_x, z0 = state.e_z_charge;
    const double eps = 1e-9 * std::max(1.0, std::abs(z_target));

    if (z_target >= z_limit - eps && z_target > z0 + eps) {
        throw InfeasibleError("e_z_sat", fmt::format("synthesize_schedule: e_z target {:.2f} kV/cm is not below saturation {:.2f} kV/cm",
                                                     z_target, z_limit));
    }
    double t_z = 0.0;
    if (z_target > z0 + eps) t_z = -std::log((z_target - z_limit) / (z0 - z_limit)) / rate_z;

    // Bias that makes the screening field relax toward `s_end` (c = g V + e0_x).
    auto bias_for = [&](double s_end) { return (-s_end * rate_s / ks - mol.e0_x) / geom.g; };

    EgossSchedule out;
    double v_bias = 0.0;
    double duration = 0.0;
    if (t_z > 0.0) {
        const double q = std::exp(-rate_s * t_z);
        v_bias = bias_for((s_target - s0 * q) / (1.0 - q));
        duration = t_z;
    } else if (std::abs(s_target - s0) > 1e-9 * std::max(1.0, std::abs(s_target))) {
        v_bias = bias_for(s_target);
        duration = std::log(100.0) / rate_s;
    }
    if (duration > 0.0) {
        if (!geom.in_range(v_bias)) {
            throw InfeasibleError("v_range", fmt::format("synthesize_schedule: required bias {:.2f} V is outside [{}, {}] V",
                                                         v_bias, geom.v_min, geom.v_max));
        }
        out.steps.push_back({v_bias, intensity, duration});
        out.expected_state = apply_egoss(state, dyn, intensity, v_bias, duration, geom, mol.e0_x);
    } else {
        out.expected_state = state;
    }
    out.expected_state.v_applied = operating_voltage;
    const double achieved = stark_shift(mol, local_field(out.expected_state, geom));
    out.shift_error = achieved - plan.target_shift;
    out.within_tolerance = std::abs(out.shift_error) <= shift_tolerance;
    return out;
}

AnisotropyCalibration calibrate_anisotropy(double sigma_base, double sigma_x, double shift_x,
                                           double sigma_z, double shift_z) {
    if (!(sigma_base >= 0.0)) throw std::invalid_argument("calibrate_anisotropy: sigma_base must be >= 0");
    if (!(shift_x > 0.0 && shift_z > 0.0)) throw std::invalid_argument("calibrate_anisotropy: shifts must be > 0");
    if (!(sigma_x >= sigma_base)) throw std::invalid_argument("calibrate_anisotropy: sigma_x below sigma_base");
    if (!(sigma_z >= sigma_base)) throw std::invalid_argument("calibrate_anisotropy: sigma_z below sigma_base");
    AnisotropyCalibration c;
    c.sigma0 = sigma_base;
    c.a_x = (sigma_x * sigma_x - sigma_base * sigma_base) / (4.0 * shift_x);
    c.a_z = (sigma_z * sigma_z - sigma_base * sigma_base) / (4.0 * shift_z);
    c.post_shift_ratio = sigma_x / sigma_z;
    c.increase_ratio = (sigma_x - sigma_base) / (sigma_z - sigma_base);
    return c;
}

} // namespace starktune
