#include "starktune/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace starktune {

OuComponent ou_component(const NoiseModel& noise, int channel, int slot) {
    double total = 0.0;
    switch (channel) {
    case NoiseState::x: total = noise.sigma_ex; break;
    case NoiseState::z: total = noise.sigma_ez; break;
    default: total = noise.sigma0; break;
    }
    const double weight = slot == 0 ? noise.w_fast : 1.0 - noise.w_fast;
    return {total * std::sqrt(weight), slot == 0 ? noise.tau_fast : noise.tau_slow};
}

NoiseState stationary_noise(const NoiseModel& noise, Rng& rng) {
    std::normal_distribution<double> normal;
    NoiseState s;
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 2; ++k) {
            s.v[c][k] = ou_component(noise, c, k).sigma * normal(rng);
        }
    }
    return s;
}

NoiseState evolve_noise(const NoiseModel& noise, double dt, const NoiseState& prev, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_noise: dt must be > 0");
    std::normal_distribution<double> normal;
    NoiseState s;
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 2; ++k) {
            const auto comp = ou_component(noise, c, k);
            const double phi = std::exp(-dt / comp.tau);
            const double sd = comp.sigma * std::sqrt(-std::expm1(-2.0 * dt / comp.tau));
            s.v[c][k] = phi * prev.v[c][k] + sd * normal(rng);
        }
    }
    return s;
}

NoiseState bridge_noise(const NoiseModel& noise, double dt, double remaining,
                        const NoiseState& current, const NoiseState& end, Rng& rng) {
    if (!(dt > 0.0) || dt > remaining * (1.0 + 1e-12)) {
        throw std::invalid_argument("bridge_noise: need 0 < dt <= remaining");
    }
    std::normal_distribution<double> normal;
    NoiseState s;
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 2; ++k) {
            const auto comp = ou_component(noise, c, k);
            const double z = normal(rng);
            const double var = comp.sigma * comp.sigma;
            const double rest = std::max(remaining - dt, 0.0);
            const double phi1 = std::exp(-dt / comp.tau);
            const double phi2 = std::exp(-rest / comp.tau);
            const double v1 = -var * std::expm1(-2.0 * dt / comp.tau);
            const double v2 = -var * std::expm1(-2.0 * rest / comp.tau);
            const double denom = v2 + phi2 * phi2 * v1;
            if (var == 0.0 || v2 == 0.0 || denom == 0.0) {
                s.v[c][k] = var == 0.0 ? 0.0 : end.v[c][k];
                continue;
            }
            const double mean = (phi1 * current.v[c][k] * v2 + phi2 * end.v[c][k] * v1) / denom;
            const double sd = std::sqrt(v1 * v2 / denom);
            s.v[c][k] = mean + sd * z;
        }
    }
    return s;
}

} // namespace starktune
