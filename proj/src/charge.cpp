#include <cmath>
#include <stdexcept>

#include "starktune/error.hpp"
#include "starktune/simkit.hpp"

namespace starktune {

void ElectrodeGeometry::validate() const {
    if (!(std::isfinite(g) && g > 0.0)) throw ConfigError("geometry: geometry_factor must be > 0");
    if (!(std::isfinite(v_min) && std::isfinite(v_max) && v_min < v_max)) {
        throw ConfigError("geometry: voltage range must satisfy v_min < v_max");
    }
}

void ChargeDynamics::validate() const {
    if (!(std::isfinite(k_screen) && k_screen > 0.0)) throw ConfigError("dynamics: k_screen must be > 0");
    if (!(std::isfinite(r_z) && r_z > 0.0)) throw ConfigError("dynamics: r_z must be > 0");
    if (!(std::isfinite(e_z_sat) && e_z_sat > 0.0)) throw ConfigError("dynamics: e_z_sat must be > 0");
    if (!(decay_time > 0.0)) throw ConfigError("dynamics: decay_time must be > 0");
}

double field_from_voltage(double v, const ElectrodeGeometry& geom) {
    if (!geom.in_range(v)) {
        throw std::invalid_argument("field_from_voltage: voltage outside the electrode range");
    }
    return geom.g * v;
}

FieldVector local_field(const FieldState& state, const ElectrodeGeometry& geom) {
    return {geom.g * state.v_applied + state.e_screen_x, state.e_z_charge};
}

namespace {

// Closed-form solution of
//   ds/dt = -k I (c + s) - s / T_d
//   dz/dt =  r I (1 - z / z_sat) - z / T_d
// with c = g v_bias + e_offset the in-plane field that the charges screen.
FieldState pump(const FieldState& state, const ChargeDynamics& dyn, double intensity,
                double v_bias, double duration, const ElectrodeGeometry& geom, double e_offset_x) {
    if (!(duration >= 0.0)) throw std::invalid_argument("pump: duration must be >= 0");
    if (!(intensity >= 0.0)) throw std::invalid_argument("pump: intensity must be >= 0");
    if (duration == 0.0) return state;

    const double leak = std::isfinite(dyn.decay_time) ? 1.0 / dyn.decay_time : 0.0;
    FieldState out = state;

    const double c = geom.g * v_bias + e_offset_x;
    const double ks = dyn.k_screen * intensity;
    const double rate_s = ks + leak;
    if (rate_s > 0.0) {
        const double target = -ks * c / rate_s;
        out.e_screen_x = target + (state.e_screen_x - target) * std::exp(-rate_s * duration);
    }

    const double rz = dyn.r_z * intensity;
    const double rate_z = rz / dyn.e_z_sat + leak;
    if (rate_z > 0.0) {
        const double target = rz / rate_z;
        out.e_z_charge = target + (state.e_z_charge - target) * std::exp(-rate_z * duration);
    }
    return out;
}

} // namespace

FieldState apply_oss(const FieldState& state, const ChargeDynamics& dyn, double intensity,
                     double duration, const ElectrodeGeometry& geom, double e_offset_x) {
    return pump(state, dyn, intensity, 0.0, duration, geom, e_offset_x);
}

FieldState apply_egoss(const FieldState& state, const ChargeDynamics& dyn, double intensity,
                       double v_bias, double duration, const ElectrodeGeometry& geom,
                       double e_offset_x) {
    if (!geom.in_range(v_bias)) {
        throw std::invalid_argument("apply_egoss: bias voltage outside the electrode range");
    }
    return pump(state, dyn, intensity, v_bias, duration, geom, e_offset_x);
}

FieldState apply_wait(const FieldState& state, const ChargeDynamics& dyn, double duration) {
    if (!(duration >= 0.0)) throw std::invalid_argument("apply_wait: duration must be >= 0");
    if (!std::isfinite(dyn.decay_time)) return state;
    const double f = std::exp(-duration / dyn.decay_time);
    FieldState out = state;
    out.e_screen_x *= f;
    out.e_z_charge *= f;
    return out;
}

} // namespace starktune
