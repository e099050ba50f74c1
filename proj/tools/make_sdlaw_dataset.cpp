// Writes a synthetic SD-vs-shift point set to stdout: 18 voltages from
// -100 V to -15 V, shift = kappa (g V)^2, sigma drawn around
// sqrt(4 a shift + sigma0^2) with a relative scatter.
//
//   make_sdlaw_dataset [seed] > data/sdlaw_points.csv

#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "starktune/fitkit.hpp"
#include "starktune/physics.hpp"
#include "starktune/rng.hpp"
#include "starktune/trace_io.hpp"

int main(int argc, char** argv) {
    using namespace starktune;
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 3;
    constexpr double kappa = 1.82, g = 1.6, a = 0.410, sigma0 = 30.0, rel_scatter = 0.01;
    Rng rng = make_stream(seed, {0});
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<SqrtLawPoint> points;
    for (int i = 0; i < 18; ++i) {
        const double v = -100.0 + 5.0 * i;
        const double shift = kappa * (g * v) * (g * v);
        const double sigma = sqrt_law_sigma(shift, a, sigma0);
        const double err = rel_scatter * sigma;
        points.push_back({shift, sigma + err * unit(rng), err});
    }
    write_sqrt_law_points(std::cout, points);
}
