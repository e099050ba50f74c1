#include <cmath>
#include <complex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"

#include "starktune/error.hpp"
#include "starktune/voigt.hpp"

using namespace starktune;
using doctest::Approx;

namespace {

// Reference values of w(z) at 30 significant digits.
struct FaddeevaRef {
    std::complex<double> z, w;
};

const FaddeevaRef kFaddeeva[] = {
    {{0.5, 0.5}, {0.53315670791217491, 0.23048823138445841}},
    {{2.0, 0.1}, {0.040201398161451289, 0.33158268733456308}},
    {{0.1, 3.0}, {0.17884242969019377, 0.0054327498088566461}},
    {{10.0, 1.0}, {0.0056699425669021785, 0.056129645315951261}},
    {{-1.5, 0.3}, {0.17386534625254562, -0.39166525260814464}},
    {{0.0, 1e-3}, {0.99887262008115141, 0.0}},
    {{5.0, -0.5}, {-0.011900325512477152, 0.11397271859768674}},
    {{30.0, 30.0}, {0.009405769534934073, 0.0094005455633548719}},
};

// Convolution of the unit-area Lorentzian and Gaussian by adaptive quadrature.
double voigt_by_quadrature(double delta, double gamma, double sigma) {
    using boost::math::quadrature::gauss_kronrod;
    auto f = [&](double x) { return lorentzian(delta - x, gamma) * gaussian(x, sigma); };
    const double reach = 12.0 * sigma;
    return gauss_kronrod<double, 61>::integrate(f, -reach, reach, 15, 1e-13);
}

} // namespace

TEST_CASE("Faddeeva function matches high-precision values") {
    for (const auto& r : kFaddeeva) {
        CAPTURE(r.z);
        const auto w = faddeeva(r.z);
        CHECK(std::abs(w - r.w) <= 1e-9 * std::abs(r.w));
    }
}

TEST_CASE("Voigt profile agrees with direct convolution") {
    for (double gamma : {5.0, 80.0, 400.0}) {
        for (double sigma : {10.0, 40.0, 200.0}) {
            for (double delta : {0.0, 17.0, -60.0, 250.0, 1500.0}) {
                CAPTURE(gamma);
                CAPTURE(sigma);
                CAPTURE(delta);
                const double ref = voigt_by_quadrature(delta, gamma, sigma);
                CHECK(voigt_value(delta, gamma, sigma) == Approx(ref).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("Voigt pure limits and normalization") {
    CHECK(voigt_value(0.0, 80.0, 0.0) == Approx(2.0 / (std::numbers::pi * 80.0)).epsilon(1e-14));
    CHECK(voigt_value(0.0, 0.0, 40.0) == Approx(1.0 / (40.0 * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-14));
    using boost::math::quadrature::gauss_kronrod;
    const double core = gauss_kronrod<double, 61>::integrate([](double d) { return voigt_value(d, 80.0, 40.0); }, -2e4, 2e4, 20, 1e-12);
    const double tails = 2.0 * (0.5 - std::atan(2e4 / 40.0) / std::numbers::pi); // Lorentzian mass beyond the range
    CHECK(core + tails == Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(voigt_value(0.0, 0.0, 0.0), DegenerateError);
    CHECK_THROWS_AS(voigt_value(0.0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("Voigt jet derivatives match finite differences") {
    const double g = 80.0, s = 40.0;
    for (double d : {-120.0, -10.0, 0.0, 35.0, 300.0}) {
        const auto j = voigt_jet(d, g, s);
        const double h = 1e-4;
        CHECK(j.value == Approx(voigt_value(d, g, s)).epsilon(1e-14));
        CHECK(j.d_delta == Approx((voigt_value(d + h, g, s) - voigt_value(d - h, g, s)) / (2 * h)).epsilon(1e-6).scale(1e-9));
        CHECK(j.d_gamma == Approx((voigt_value(d, g + h, s) - voigt_value(d, g - h, s)) / (2 * h)).epsilon(1e-6).scale(1e-9));
        CHECK(j.d_sigma == Approx((voigt_value(d, g, s + h) - voigt_value(d, g, s - h)) / (2 * h)).epsilon(1e-6).scale(1e-9));
    }
}

TEST_CASE("closed-form FWHM") {
    CHECK(voigt_fwhm(80.0, 40.0) == Approx(142.334).epsilon(1e-5));
    CHECK(voigt_fwhm(70.0, 0.0) == 70.0);
    CHECK(voigt_fwhm(0.0, 10.0) == Approx(10.0 * std::sqrt(8.0 * std::numbers::ln2)).epsilon(1e-14));
}

TEST_CASE("numeric FWHM and the closed-form envelope") {
    CHECK(voigt_fwhm_numeric(80.0, 40.0) == Approx(144.045).epsilon(1e-5));
    CHECK(voigt_fwhm_numeric(70.0, 0.0) == Approx(70.0).epsilon(1e-9));
    CHECK(voigt_fwhm_numeric(0.0, 10.0) == Approx(10.0 * std::sqrt(8.0 * std::numbers::ln2)).epsilon(1e-9));
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double ratio = std::pow(10.0, -1.0 + 2.0 * i / 49.0);
        const double rel = 1.0 - voigt_fwhm(ratio, 1.0) / voigt_fwhm_numeric(ratio, 1.0);
        CHECK(rel >= 0.0);
        worst = std::max(worst, rel);
    }
    CHECK(worst < 0.012);
    CHECK(worst > 0.011);
}
