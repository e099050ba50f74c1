#include <cmath>
#include <stdexcept>
#include <limits>
#include <random>

#include "doctest.h"

#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"
#include "starktune/planner.hpp"
#include "starktune/rng.hpp"

using namespace starktune;
using doctest::Approx;

namespace {

MoleculeModel anisotropic(double kxx = 1.82, double kzz = 0.2) {
    MoleculeModel m;
    m.kappa_xx = kxx;
    m.kappa_zz = kzz;
    return m;
}

NoiseModel noise(double sx = 0.47, double sz = 0.3, double s0 = 20.0) {
    NoiseModel n;
    n.sigma_ex = sx;
    n.sigma_ez = sz;
    n.sigma0 = s0;
    return n;
}

// Brute-force minimum over a rectangular grid of the box, keeping points
// whose shift is within `tol` of the target.
double box_grid_min(const MoleculeModel& m, const NoiseModel& n, double target, const TuningConstraints& c, int steps,
                    double tol) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        const double ex = -c.e_x_max + 2.0 * c.e_x_max * i / steps;
        for (int k = 0; k <= steps; ++k) {
            const double ez = c.e_z_max * k / steps;
            if (std::abs(stark_shift(m, {ex, ez}) - target) <= tol) best = std::min(best, sd_sigma(m, {ex, ez}, n));
        }
    }
    return best;
}

// Locus sampled along e_x with e_z solved exactly.
double locus_min(const MoleculeModel& m, const NoiseModel& n, double target, const TuningConstraints& c) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200000; ++i) {
        const double ex = -c.e_x_max + 2.0 * c.e_x_max * i / 200000;
        const double rest = -target - m.kappa_xx * (ex + m.e0_x) * (ex + m.e0_x);
        if (rest < 0.0) continue;
        const double ez = std::sqrt(rest / m.kappa_zz) - m.e0_z;
        if (ez < 0.0 || ez > c.e_z_max) continue;
        best = std::min(best, sd_sigma(m, {ex, ez}, n));
    }
    return best;
}

} // namespace

TEST_CASE("isofrequency ellipse") {
    MoleculeModel m = anisotropic(1.82, 0.5);
    const auto pts = isofrequency_locus(m, -18200.0, 64);
    REQUIRE(pts.size() == 64);
    for (const auto& p : pts) CHECK(stark_shift(m, p) == Approx(-18200.0).epsilon(1e-12));
    CHECK(pts[0].e_x == Approx(100.0));
    CHECK(pts[32].e_x == Approx(-100.0));

    const auto origin = isofrequency_locus(m, 0.0, 10);
    REQUIRE(origin.size() == 1);
    CHECK(origin[0] == FieldVector{0.0, 0.0});

    m.e0_x = 5.0;
    for (const auto& p : isofrequency_locus(m, -5000.0, 16)) CHECK(stark_shift(m, p) == Approx(-5000.0).epsilon(1e-12));
}

TEST_CASE("degenerate locus is a pair of lines") {
    const MoleculeModel m = anisotropic(1.82, 0.0);
    const auto pts = isofrequency_locus(m, -18200.0, 20);
    REQUIRE(pts.size() == 20);
    for (const auto& p : pts) CHECK(std::abs(p.e_x) == Approx(100.0));
}

TEST_CASE("locus errors") {
    CHECK_THROWS_AS(isofrequency_locus(anisotropic(), 100.0, 8), InfeasibleError);
    CHECK_THROWS_AS(isofrequency_locus(anisotropic(0.0, 0.0), -100.0, 8), std::invalid_argument);
    MoleculeModel lin = anisotropic();
    lin.d_x = 1.0;
    CHECK_THROWS_AS(isofrequency_locus(lin, -100.0, 8), std::invalid_argument);
}

TEST_CASE("calibration triple") {
    const auto c = calibrate_anisotropy(70.0, 269.0, 13000.0, 86.0, 14000.0);
    CHECK(c.a_x == Approx(1.297).epsilon(1e-3));
    CHECK(c.a_z == Approx(0.0446).epsilon(1e-3));
    CHECK(c.post_shift_ratio == Approx(3.13).epsilon(1e-3));
    CHECK(c.increase_ratio == Approx(12.4).epsilon(1e-2));
    CHECK(calibrate_anisotropy(70.0, 70.0, 13000.0, 86.0, 14000.0).a_x == 0.0);
    CHECK_THROWS_AS(calibrate_anisotropy(70.0, 60.0, 13000.0, 86.0, 14000.0), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_anisotropy(70.0, 269.0, 0.0, 86.0, 14000.0), std::invalid_argument);
}

TEST_CASE("calibration inverts the square-root law") {
    Rng rng = make_stream(77, {7});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double ax = 2.0 * u(rng), az = 2.0 * u(rng), s0 = 100.0 * u(rng);
        const double sx = 1000.0 + 3e4 * u(rng), sz = 1000.0 + 3e4 * u(rng);
        const auto c = calibrate_anisotropy(s0, sqrt_law_sigma(sx, ax, s0), sx, sqrt_law_sigma(sz, az, s0), sz);
        CHECK(c.a_x == Approx(ax).epsilon(1e-12).scale(1e-12));
        CHECK(c.a_z == Approx(az).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("calibrated split puts the shift on z") {
    const auto cal = calibrate_anisotropy(70.0, 269.0, 13000.0, 86.0, 14000.0);
    const double inf = std::numeric_limits<double>::infinity();
    const TuningPlan p = plan_shift_split(cal.sensitivity(), -14000.0, 0.0, inf, 0.0, inf);
    CHECK(p.shift_x == 0.0);
    CHECK(p.shift_z == Approx(14000.0));
    CHECK(p.predicted_sigma == Approx(86.0).epsilon(1e-12));
}

TEST_CASE("ties go to x") {
    const SdSensitivity s{0.5, 0.5, 10.0};
    const double inf = std::numeric_limits<double>::infinity();
    const TuningPlan p = plan_shift_split(s, -1000.0, 0.0, inf, 0.0, inf);
    CHECK(p.shift_x == Approx(1000.0));
    CHECK(p.shift_z == 0.0);
}

TEST_CASE("unconstrained plan uses the quieter axis") {
    TuningConstraints wide;
    wide.e_x_max = wide.e_z_max = 1e4;
    const TuningPlan p = plan_min_sd(anisotropic(), noise(), -14000.0, wide);
    REQUIRE(p.field);
    CHECK(p.field->e_x == 0.0);
    CHECK(stark_shift(anisotropic(), *p.field) == Approx(-14000.0).epsilon(1e-12));
}

TEST_CASE("a z limit forces part of the shift onto x and matches the grid") {
    const MoleculeModel m = anisotropic(1.82, 0.2);
    const NoiseModel n = noise();
    TuningConstraints c;
    c.e_x_max = 160.0;
    c.e_z_max = std::sqrt(7000.0 / 0.2);
    const TuningPlan p = plan_min_sd(m, n, -14000.0, c);
    REQUIRE(p.field);
    CHECK(p.shift_z == Approx(7000.0));
    CHECK(p.shift_x == Approx(7000.0));
    CHECK(p.predicted_sigma <= locus_min(m, n, -14000.0, c) + 0.1);
    CHECK(p.predicted_sigma <= box_grid_min(m, n, -14000.0, c, 200, 200.0) + 0.1);
}

TEST_CASE("plans stay inside the box and on target") {
    Rng rng = make_stream(88, {8});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        MoleculeModel m = anisotropic(0.2 + 1.8 * u(rng), 0.05 + 1.5 * u(rng));
        m.e0_x = -10.0 + 20.0 * u(rng);
        m.e0_z = 5.0 * u(rng);
        const NoiseModel n = noise(0.1 + u(rng), 0.1 + u(rng), 50.0 * u(rng));
        TuningConstraints c;
        c.e_x_max = 30.0 + 150.0 * u(rng);
        c.e_z_max = 30.0 + 150.0 * u(rng);
        const double target = -(200.0 + 2e4 * u(rng));
        TuningPlan p;
        try {
            p = plan_min_sd(m, n, target, c);
        } catch (const InfeasibleError&) {
            continue;
        }
        ++checked;
        CHECK(std::abs(p.field->e_x) <= c.e_x_max + 1e-9);
        CHECK(p.field->e_z >= -1e-9);
        CHECK(p.field->e_z <= c.e_z_max + 1e-9);
        CHECK(std::abs(stark_shift(m, *p.field) - target) <= c.shift_tolerance);
        CHECK(p.predicted_sigma <= locus_min(m, n, target, c) + 0.1);
    }
    CHECK(checked > 50);
}

TEST_CASE("predicted sigma grows with the target") {
    const MoleculeModel m = anisotropic(1.82, 0.3);
    TuningConstraints c;
    c.e_z_max = 60.0;
    double prev = 0.0;
    for (double t = 0.0; t <= 40000.0; t += 500.0) {
        const double s = plan_min_sd(m, noise(), -t, c).predicted_sigma;
        CHECK(s >= prev - 1e-12);
        prev = s;
    }
}

TEST_CASE("infeasible targets name the binding constraint") {
    const MoleculeModel m = anisotropic(1.82, 0.2);
    TuningConstraints c;
    try {
        plan_min_sd(m, noise(), -1e6, c);
        FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
        CHECK(e.binding() == "e_x_max+e_z_max");
    }
    try {
        plan_min_sd(m, noise(), 500.0, c);
        FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
        CHECK(e.binding() == "sign");
    }
    MoleculeModel offset = m;
    offset.e0_z = 50.0;
    try {
        plan_min_sd(offset, noise(), -10.0, c);
        FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
        CHECK(e.binding() == "intrinsic_offset");
    }
    const MoleculeModel x_only = anisotropic(1.82, 0.0);
    try {
        plan_min_sd(x_only, noise(), -1e6, c);
        FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
        CHECK(e.binding() == "e_x_max");
    }
}

TEST_CASE("schedule for a pure screening move") {
    const MoleculeModel m = anisotropic(1.82, 0.0);
    ElectrodeGeometry g;
    ChargeDynamics d;
    TuningPlan plan;
    plan.feasible = true;
    plan.field = FieldVector{-g.g * 40.0, 0.0};
    plan.target_shift = stark_shift(m, *plan.field);
    const EgossSchedule s = synthesize_schedule(plan, m, {}, d, g, 0.0);
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].v_bias == Approx(40.0));
    CHECK(s.steps[0].intensity == 1.0);
    CHECK(s.steps[0].duration == Approx(std::log(100.0) / d.k_screen));
    CHECK(s.expected_state.e_screen_x == Approx(-0.99 * 64.0 + 0.0).epsilon(1e-9));
}

TEST_CASE("schedule that needs no change is empty") {
    const MoleculeModel m = anisotropic();
    TuningPlan plan;
    plan.feasible = true;
    plan.field = FieldVector{0.0, 0.0};
    const EgossSchedule s = synthesize_schedule(plan, m, {}, {}, {}, 0.0);
    CHECK(s.steps.empty());
    CHECK(s.within_tolerance);
}

TEST_CASE("schedule hits both axes when z must grow") {
    const MoleculeModel m = anisotropic(1.82, 0.2);
    ElectrodeGeometry g;
    ChargeDynamics d;
    TuningPlan plan;
    plan.feasible = true;
    plan.field = FieldVector{-30.0, 80.0};
    plan.target_shift = stark_shift(m, *plan.field);
    const EgossSchedule s = synthesize_schedule(plan, m, {}, d, g, 20.0);
    REQUIRE(s.steps.size() == 1);
    const auto f = local_field(s.expected_state, g);
    CHECK(f.e_x == Approx(-30.0).epsilon(1e-9));
    CHECK(f.e_z == Approx(80.0).epsilon(1e-9));
    CHECK(std::abs(s.shift_error) < 1e-6);

    plan.field = FieldVector{0.0, 200.0};
    CHECK_THROWS_AS(synthesize_schedule(plan, m, {}, d, g, 0.0), InfeasibleError);
}

TEST_CASE("synthesized schedule closes the loop in simulation") {
    MoleculeModel m = anisotropic(1.82, 0.1);
    ElectrodeGeometry g;
    ChargeDynamics d;
    const double v_op = 30.0;
    TuningPlan plan;
    plan.feasible = true;
    plan.field = FieldVector{0.0, 0.0};
    plan.target_shift = 0.0;
    const EgossSchedule s = synthesize_schedule(plan, m, {}, d, g, v_op);
    REQUIRE(s.steps.size() == 1);

    NoiseModel n;
    n.sigma_ex = 0.47;
    n.sigma0 = 30.0;
    ScanConfig c;
    c.span_ghz = 8.0;
    c.center_mhz = -2500.0;
    c.scan_speed = 5.0;
    c.bin_time = 0.001;
    Session sess({m}, n, g, d, c, 21);
    for (const auto& st : s.steps) sess.egoss(st.v_bias, st.intensity, st.duration);
    const auto map = sess.sweep(linspace(10.0, 50.0, 17));
    const ParabolaFit f = fit_parabola(track_line(map).parabola_points(), g);
    CHECK(f.vertex_voltage == Approx(v_op).epsilon(2.0 / v_op));
}
