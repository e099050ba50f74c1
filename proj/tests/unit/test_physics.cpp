#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "starktune/error.hpp"
#include "starktune/physics.hpp"

using namespace starktune;
using doctest::Approx;

namespace {

MoleculeModel x_only(double kappa_xx) {
    MoleculeModel m;
    m.kappa_xx = kappa_xx;
    m.kappa_zz = 0.0;
    return m;
}

} // namespace

TEST_CASE("stark shift is a red-shifting quadratic form") {
    const MoleculeModel m = x_only(1.82);
    CHECK(stark_shift(m, {100.0, 0.0}) == Approx(-18200.0).epsilon(1e-14));
    CHECK(stark_shift(m, {0.0, 0.0}) == 0.0);
    CHECK(stark_shift(m, {50.0, 0.0}) == Approx(-4550.0).epsilon(1e-14));
    CHECK(stark_shift(m, {-50.0, 0.0}) == stark_shift(m, {50.0, 0.0}));
}

TEST_CASE("stark shift adds the intrinsic field and the linear term") {
    MoleculeModel m = x_only(2.0);
    m.kappa_zz = 0.5;
    m.e0_x = 3.0;
    m.e0_z = -1.0;
    m.d_x = 4.0;
    m.d_z = -2.0;
    const double ux = 10.0 + 3.0, uz = 5.0 - 1.0;
    const double expected = -4.0 * ux + 2.0 * uz - 2.0 * ux * ux - 0.5 * uz * uz;
    CHECK(stark_shift(m, {10.0, 5.0}) == Approx(expected).epsilon(1e-14));
}

TEST_CASE("sd sigma propagates the field noise through the gradient") {
    const MoleculeModel m = x_only(1.82);
    NoiseModel n;
    n.sigma_ex = 0.47;
    CHECK(sd_sigma(m, {100.0, 0.0}, n) == Approx(171.08).epsilon(1e-12));
    CHECK(sd_sigma(m, {0.0, 0.0}, n) == 0.0);

    MoleculeModel lin = m;
    lin.d_x = 10.0;
    CHECK(sd_sigma(lin, {0.0, 0.0}, n) == Approx(10.0 * 0.47).epsilon(1e-14));

    n.sigma0 = 30.0;
    CHECK(sd_sigma(m, {0.0, 0.0}, n) == Approx(30.0));
}

TEST_CASE("sqrt law sigma") {
    CHECK(sqrt_law_sigma(13000.0, 0.410, 0.0) == Approx(146.0).epsilon(1e-3));
    CHECK(sqrt_law_sigma(0.0, 0.7, 55.0) == 55.0);
    CHECK(sqrt_law_sigma(13000.0, 1.297, 70.0) == Approx(269.0).epsilon(1e-3));
    CHECK_THROWS_AS(sqrt_law_sigma(-1.0, 0.4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sqrt_law_sigma(1.0, -0.4, 0.0), std::invalid_argument);
}

TEST_CASE("molecule and noise validation") {
    MoleculeModel m;
    CHECK_NOTHROW(m.validate());
    m.gamma0 = -1.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = MoleculeModel{};
    m.kappa_xx = -0.1;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = MoleculeModel{};
    m.dw_qy = 0.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);

    NoiseModel n;
    CHECK_NOTHROW(n.validate());
    CHECK(n.is_silent());
    n.w_fast = 1.5;
    CHECK_THROWS_AS(n.validate(), ConfigError);
}
