#pragma once

#include <array>

#include "starktune/physics.hpp"
#include "starktune/rng.hpp"

namespace starktune {

// State of the two-timescale noise environment seen by one molecule: a fast
// and a slow Ornstein-Uhlenbeck component per field axis plus the same pair
// for the frequency floor.
struct NoiseState {
    enum Channel { x = 0, z = 1, f = 2 };
    // [channel][0 = fast, 1 = slow]
    std::array<std::array<double, 2>, 3> v{};

    FieldVector field() const { return {v[x][0] + v[x][1], v[z][0] + v[z][1]}; }
    double frequency() const { return v[f][0] + v[f][1]; } // MHz

    friend bool operator==(const NoiseState&, const NoiseState&) = default;
};

// Stationary standard deviation and correlation time of one component.
struct OuComponent {
    double sigma = 0.0;
    double tau = 1.0;
};

OuComponent ou_component(const NoiseModel& noise, int channel, int slot);

// Draw from the stationary distribution.
NoiseState stationary_noise(const NoiseModel& noise, Rng& rng);

// Exact OU transition over `dt` > 0 seconds: each component decays by
// exp(-dt/tau) and gains Gaussian noise that preserves its stationary
// variance.
NoiseState evolve_noise(const NoiseModel& noise, double dt, const NoiseState& prev, Rng& rng);

// One step of an exact OU bridge: sample the state `dt` seconds ahead given
// the current state and the state `remaining` seconds ahead (dt <= remaining).
NoiseState bridge_noise(const NoiseModel& noise, double dt, double remaining,
                        const NoiseState& current, const NoiseState& end, Rng& rng);

} // namespace starktune
