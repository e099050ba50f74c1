#include <cmath>
#include <stdexcept>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"
#include "starktune/simkit.hpp"

using namespace starktune;
using doctest::Approx;

namespace {

NoiseModel some_noise() {
    NoiseModel n;
    n.sigma_ex = 0.47;
    n.sigma_ez = 0.2;
    n.sigma0 = 20.0;
    return n;
}

MoleculeModel molecule(double e0_x = 0.0) {
    MoleculeModel m;
    m.kappa_zz = 0.1;
    m.e0_x = e0_x;
    return m;
}

} // namespace

TEST_CASE("voltage to field") {
    ElectrodeGeometry g;
    CHECK(field_from_voltage(100.0, g) == Approx(160.0));
    CHECK(field_from_voltage(0.0, g) == 0.0);
    g.g = 0.8;
    CHECK(field_from_voltage(-100.0, g) == Approx(-80.0));
    CHECK_THROWS_AS(field_from_voltage(150.0, g), std::invalid_argument);
}

TEST_CASE("local field composition") {
    ElectrodeGeometry g;
    CHECK(local_field({0.0, 0.0, 0.0}, g) == FieldVector{0.0, 0.0});
    const auto full = local_field({100.0, -160.0, 0.0}, g);
    CHECK(full.e_x == Approx(0.0).scale(1.0));
    CHECK(full.e_z == 0.0);
    const auto mixed = local_field({-25.0, 40.0, 12.0}, g);
    CHECK(mixed.e_x == Approx(0.0).scale(1.0));
    CHECK(mixed.e_z == 12.0);
}

TEST_CASE("pump dynamics") {
    ElectrodeGeometry g;
    ChargeDynamics d;
    const FieldState s0{10.0, 3.0, 4.0};
    CHECK(apply_oss(s0, d, 1.0, 0.0, g) == s0);
    CHECK(apply_egoss(s0, d, 1.0, 50.0, 0.0, g) == s0);

    FieldState s{};
    double prev = -1.0;
    for (int i = 0; i < 20; ++i) {
        s = apply_oss(s, d, 1.0, 60.0, g);
        CHECK(s.e_z_charge > prev);
        CHECK(s.e_z_charge < d.e_z_sat);
        prev = s.e_z_charge;
    }

    const FieldState screened = apply_egoss({}, d, 1.0, 100.0, 1e6, g);
    CHECK(screened.e_screen_x == Approx(-160.0));
    const FieldState ninety = apply_egoss({}, d, 1.0, 100.0, 120.0, g);
    CHECK(ninety.e_screen_x == Approx(-144.0));

    const FieldState there = apply_egoss({}, d, 1.0, 60.0, 500.0, g);
    const FieldState back = apply_egoss(there, d, 1.0, -60.0, 500.0, g);
    CHECK(there.e_screen_x < -90.0);
    CHECK(back.e_screen_x > 90.0);

    const FieldState relaxed = apply_oss({0.0, 50.0, 0.0}, d, 1.0, 1e5, g, 10.0);
    CHECK(relaxed.e_screen_x == Approx(-10.0));
}

TEST_CASE("unpumped relaxation") {
    ChargeDynamics d;
    const FieldState s{0.0, -100.0, 50.0};
    CHECK(apply_wait(s, d, 1000.0) == s);
    d.decay_time = 100.0;
    const FieldState r = apply_wait(s, d, 100.0);
    CHECK(r.e_screen_x == Approx(-100.0 * std::exp(-1.0)));
    CHECK(r.e_z_charge == Approx(50.0 * std::exp(-1.0)));
}

TEST_CASE("scan grid") {
    ScanConfig c;
    CHECK(c.bin_width_mhz() == Approx(5.0));
    CHECK(c.n_bins() == 400);
    CHECK(c.sweep_duration() == Approx(4.0));
    const auto grid = c.detuning_grid();
    CHECK(grid.front() == Approx(-997.5));
    CHECK(grid.back() == Approx(997.5));
    c.bin_time = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("serial and parallel scans are bit-identical") {
    ScanConfig c;
    c.n_sweeps = 12;
    c.inter_sweep_wait = 3.0;
    c.seed = 99;
    const auto serial = simulate_scan(molecule(), {}, some_noise(), {}, c, Execution::serial);
    const auto parallel = simulate_scan(molecule(), {}, some_noise(), {}, c, Execution::parallel);
    REQUIRE(serial.size() == 12);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].counts == parallel[i].counts);
        CHECK(serial[i].start_time == parallel[i].start_time);
    }
}

TEST_CASE("serial and parallel sweep maps are bit-identical") {
    ScanConfig c;
    c.span_ghz = 6.0;
    c.center_mhz = -2000.0;
    c.seed = 4;
    c.n_sweeps = 2;
    const auto v = linspace(-20.0, 20.0, 9);
    const auto a = simulate_sweep_map({molecule(), molecule(8.0)}, {}, some_noise(), {}, v, c, Execution::serial);
    const auto b = simulate_sweep_map({molecule(), molecule(8.0)}, {}, some_noise(), {}, v, c, Execution::parallel);
    REQUIRE(a.sweeps.size() == 9);
    for (std::size_t i = 0; i < a.sweeps.size(); ++i) {
        REQUIRE(a.sweeps[i].size() == 2);
        for (std::size_t k = 0; k < 2; ++k) CHECK(a.sweeps[i][k].counts == b.sweeps[i][k].counts);
    }
}

TEST_CASE("same seed reproduces, other seed differs") {
    ScanConfig c;
    c.seed = 5;
    const auto a = simulate_scan(molecule(), {}, some_noise(), {}, c);
    const auto b = simulate_scan(molecule(), {}, some_noise(), {}, c);
    c.seed = 6;
    const auto d = simulate_scan(molecule(), {}, some_noise(), {}, c);
    CHECK(a[0].counts == b[0].counts);
    CHECK(a[0].counts != d[0].counts);
}

TEST_CASE("mean counts follow the noiseless line") {
    MoleculeModel m = molecule();
    ScanConfig c;
    c.n_sweeps = 200;
    c.seed = 8;
    const auto traces = simulate_scan(m, {}, NoiseModel{}, {}, c);
    const Spectrum s = integrate_traces(traces);
    const double total = std::accumulate(s.counts.begin(), s.counts.end(), 0.0);
    double expected = 0.0;
    for (double d : s.detunings) {
        const double x = 2.0 * d / m.gamma0;
        expected += 200 * c.bin_time * (m.peak_rate * m.dw_qy / (1.0 + x * x) + c.background_fraction * m.peak_rate);
    }
    CHECK(total == Approx(expected).epsilon(3.0 / std::sqrt(expected)));
}

TEST_CASE("silent noise gives the natural linewidth") {
    ScanConfig c;
    c.n_sweeps = 20;
    c.seed = 2;
    const auto traces = simulate_scan(molecule(), {}, NoiseModel{}, {}, c);
    VoigtFitOptions o;
    const VoigtFit f = fit_voigt(integrate_traces(traces), o);
    CHECK(std::abs(f.gamma - 80.0) < 3.0 * f.gamma_err + 1.0);
    CHECK(std::abs(f.center) < 3.0 * f.center_err + 0.5);
}

TEST_CASE("a molecule without x response shows no shift") {
    MoleculeModel m;
    m.kappa_xx = 0.0;
    ScanConfig c;
    c.seed = 3;
    c.n_sweeps = 4;
    const auto map = simulate_sweep_map({m}, {}, NoiseModel{}, {}, linspace(-100.0, 100.0, 5), c);
    for (const auto& per_v : map.sweeps) {
        const VoigtFit f = fit_voigt(integrate_traces(per_v), VoigtFitOptions{80.0, std::nullopt, 200, 8});
        CHECK(std::abs(f.center) < 5.0);
    }
}

TEST_CASE("session steps advance the clock and the state") {
    ScanConfig c;
    c.n_sweeps = 2;
    c.inter_sweep_wait = 1.0;
    Session s({molecule()}, some_noise(), {}, {}, c, 1);
    s.set_voltage(20.0);
    const auto traces = s.scan();
    CHECK(traces.size() == 2);
    const double after_scan = s.clock();
    CHECK(after_scan >= 8.0);
    s.oss(1.0, 100.0);
    CHECK(s.clock() == Approx(after_scan + 100.0));
    CHECK(s.state().e_z_charge > 0.0);
    CHECK(s.state().v_applied == 20.0);
    s.egoss(50.0, 1.0, 100.0);
    CHECK(s.state().e_screen_x < 0.0);
    CHECK_THROWS(s.set_voltage(500.0));
}
