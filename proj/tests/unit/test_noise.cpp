#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "starktune/noise.hpp"

using namespace starktune;
using doctest::Approx;

namespace {

NoiseModel single_component(double sigma, double tau) {
    NoiseModel n;
    n.sigma_ex = sigma;
    n.w_fast = 1.0;
    n.tau_fast = tau;
    return n;
}

std::vector<double> x_chain(const NoiseModel& n, double dt, std::size_t steps, std::uint64_t seed) {
    Rng rng = make_stream(seed, {42});
    NoiseState s = stationary_noise(n, rng);
    std::vector<double> out(steps);
    for (auto& v : out) {
        s = evolve_noise(n, dt, s, rng);
        v = s.field().e_x;
    }
    return out;
}

} // namespace

TEST_CASE("component split of the two-timescale model") {
    NoiseModel n;
    n.sigma_ex = 2.0;
    n.sigma0 = 10.0;
    n.w_fast = 0.25;
    n.tau_fast = 0.3;
    n.tau_slow = 50.0;
    const auto fast = ou_component(n, NoiseState::x, 0);
    const auto slow = ou_component(n, NoiseState::x, 1);
    CHECK(fast.sigma * fast.sigma == Approx(0.25 * 4.0));
    CHECK(slow.sigma * slow.sigma == Approx(0.75 * 4.0));
    CHECK(fast.tau == 0.3);
    CHECK(slow.tau == 50.0);
    CHECK(ou_component(n, NoiseState::f, 1).sigma == Approx(10.0 * std::sqrt(0.75)));
    CHECK(ou_component(n, NoiseState::z, 0).sigma == 0.0);
}

TEST_CASE("silent axes stay at zero") {
    NoiseModel n;
    n.sigma_ez = 1.0;
    Rng rng = make_stream(5, {1});
    NoiseState s = stationary_noise(n, rng);
    for (int i = 0; i < 100; ++i) {
        s = evolve_noise(n, 0.1, s, rng);
        CHECK(s.field().e_x == 0.0);
        CHECK(s.frequency() == 0.0);
    }
}

TEST_CASE("stationary variance of a long chain") {
    const auto xs = x_chain(single_component(0.47, 1.0), 1.0, 1000000, 11);
    double mean = 0.0, var = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(xs.size() - 1);
    CHECK(var == Approx(0.47 * 0.47).epsilon(0.01));
}

TEST_CASE("autocorrelation at one correlation time") {
    const double tau = 2.0, dt = 0.2;
    const std::size_t lag = 10;
    const auto xs = x_chain(single_component(1.0, tau), dt, 1000000, 12);
    double c0 = 0.0, c1 = 0.0;
    for (std::size_t i = 0; i + lag < xs.size(); ++i) {
        c0 += xs[i] * xs[i];
        c1 += xs[i] * xs[i + lag];
    }
    CHECK(c1 / c0 == Approx(std::exp(-1.0)).epsilon(0.02));
}

TEST_CASE("bridge hits its endpoint and interpolates the mean") {
    const NoiseModel n = single_component(1.0, 1.0);
    NoiseState a, b;
    a.v[NoiseState::x][0] = 0.0;
    b.v[NoiseState::x][0] = 2.0;
    Rng rng = make_stream(3, {3});
    CHECK(bridge_noise(n, 1.0, 1.0, a, b, rng).field().e_x == 2.0);

    // Mean of the bridge at mid-interval: sinh weights of the two ends.
    const double expected = 2.0 * std::sinh(0.5) / std::sinh(1.0);
    double acc = 0.0;
    const int reps = 200000;
    for (int i = 0; i < reps; ++i) acc += bridge_noise(n, 0.5, 1.0, a, b, rng).field().e_x;
    CHECK(acc / reps == Approx(expected).epsilon(0.01));
    CHECK_THROWS_AS(bridge_noise(n, 2.0, 1.0, a, b, rng), std::invalid_argument);
}
