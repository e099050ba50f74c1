#include "starktune/voigt.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "starktune/error.hpp"

namespace starktune {

namespace {

using cplx = std::complex<double>;

constexpr int kTerms = 40;
constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kLn2 = std::numbers::ln2;

struct WeidemanTable {
    double L = 0.0;
    std::array<double, kTerms> a{}; // a[n-1] multiplies Z^(n-1)
};

// a_n = (1/2M) sum_{k=-M+1}^{M-1} f(k) cos(pi n k / M),
// f(k) = exp(-t_k^2) (L^2 + t_k^2), t_k = L tan(k pi / 2M), M = 2N.
WeidemanTable make_table() {
    WeidemanTable tab;
    const int M = 2 * kTerms;
    tab.L = std::sqrt(kTerms / kSqrt2);
    const double L2 = tab.L * tab.L;
    std::array<double, 2 * 2 * kTerms> f{};
    for (int k = -M + 1; k <= M - 1; ++k) {
        const double t = tab.L * std::tan(k * std::numbers::pi / (2.0 * M));
        f[k + M] = std::exp(-t * t) * (L2 + t * t);
    }
    for (int n = 1; n <= kTerms; ++n) {
        double s = 0.0;
        for (int k = -M + 1; k <= M - 1; ++k) {
            s += f[k + M] * std::cos(std::numbers::pi * n * k / M);
        }
        tab.a[n - 1] = s / (2.0 * M);
    }
    return tab;
}

const WeidemanTable& table() {
    static const WeidemanTable tab = make_table();
    return tab;
}

cplx faddeeva_upper(cplx z) {
    const auto& tab = table();
    const cplx iz(-z.imag(), z.real());
    const cplx denom = tab.L - iz;
    const cplx Z = (tab.L + iz) / denom;
    cplx p = tab.a[kTerms - 1];
    for (int n = kTerms - 2; n >= 0; --n) p = p * Z + tab.a[n];
    return 2.0 * p / (denom * denom) + (1.0 / kSqrtPi) / denom;
}

void check_widths(double gamma, double sigma) {
    if (!(gamma >= 0.0) || !(sigma >= 0.0)) {
        throw std::invalid_argument("voigt: widths must be >= 0");
    }
    if (gamma == 0.0 && sigma == 0.0) {
        throw DegenerateError("voigt: both widths are zero");
    }
}

} // namespace

cplx faddeeva(cplx z) {
    if (z.imag() >= 0.0) return faddeeva_upper(z);
    return 2.0 * std::exp(-z * z) - faddeeva_upper(-z);
}

double lorentzian(double delta, double gamma) {
    const double hw = 0.5 * gamma;
    return hw / (std::numbers::pi * (delta * delta + hw * hw));
}

double gaussian(double delta, double sigma) {
    const double u = delta / sigma;
    return std::exp(-0.5 * u * u) / (sigma * kSqrt2 * kSqrtPi);
}

double voigt_value(double delta, double gamma, double sigma) {
    check_widths(gamma, sigma);
    if (sigma == 0.0) return lorentzian(delta, gamma);
    if (gamma == 0.0) return gaussian(delta, sigma);
    const cplx z(delta / (sigma * kSqrt2), gamma / (2.0 * sigma * kSqrt2));
    return faddeeva_upper(z).real() / (sigma * kSqrt2 * kSqrtPi);
}

VoigtJet voigt_jet(double delta, double gamma, double sigma) {
    if (!(gamma > 0.0) || !(sigma > 0.0)) {
        throw std::invalid_argument("voigt_jet: widths must be > 0");
    }
    const double s2 = sigma * kSqrt2;
    const double norm = 1.0 / (s2 * kSqrtPi);
    const cplx z(delta / s2, gamma / (2.0 * s2));
    const cplx w = faddeeva_upper(z);
    // w'(z) = -2 z w(z) + 2i / sqrt(pi)
    const cplx dw = -2.0 * z * w + cplx(0.0, 2.0 / kSqrtPi);

    VoigtJet j;
    j.value = w.real() * norm;
    j.d_delta = dw.real() * norm / s2;
    j.d_gamma = -dw.imag() * norm / (2.0 * s2);
    j.d_sigma = (-(dw * z).real() - w.real()) * norm / sigma;
    return j;
}

double voigt_fwhm(double gamma, double sigma) {
    if (!(gamma >= 0.0) || !(sigma >= 0.0)) {
        throw std::invalid_argument("voigt_fwhm: widths must be >= 0");
    }
    const double hg = 0.5 * gamma;
    return hg + std::sqrt(hg * hg + 8.0 * kLn2 * sigma * sigma);
}

double voigt_fwhm_numeric(double gamma, double sigma) {
    check_widths(gamma, sigma);
    const double half = 0.5 * voigt_value(0.0, gamma, sigma);
    double lo = 0.0;
    double hi = gamma + 3.0 * sigma;
    while (voigt_value(hi, gamma, sigma) > half) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (voigt_value(mid, gamma, sigma) > half ? lo : hi) = mid;
    }
    return lo + hi;
}

} // namespace starktune
