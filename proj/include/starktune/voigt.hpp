#pragma once

#include <complex>

namespace starktune {

// Faddeeva function w(z) = exp(-z^2) erfc(-iz). Weideman's rational
// expansion in the upper half plane (relative error < 1e-9 for the Voigt
// use case), reflection w(z) = 2 exp(-z^2) - w(-z) below it.
std::complex<double> faddeeva(std::complex<double> z);

// Unit-area Lorentzian with full width at half maximum `gamma`.
double lorentzian(double delta, double gamma);

// Unit-area Gaussian with standard deviation `sigma`.
double gaussian(double delta, double sigma);

// Unit-area convolution of a Lorentzian (FWHM gamma) with a Gaussian (std
// sigma), evaluated at detuning `delta`. All arguments in MHz, result in
// 1/MHz. Throws DegenerateError when both widths are zero and
// std::invalid_argument on negative widths.
double voigt_value(double delta, double gamma, double sigma);

struct VoigtJet {
    double value = 0.0;
    double d_delta = 0.0;
    double d_gamma = 0.0;
    double d_sigma = 0.0;
};

// Value and first derivatives; requires gamma > 0 and sigma > 0.
VoigtJet voigt_jet(double delta, double gamma, double sigma);

// Closed-form FWHM gamma/2 + sqrt(gamma^2/4 + 8 ln2 sigma^2). Exact in both
// pure limits; at most ~1.2% below the true Voigt FWHM in between. Intended
// for reporting only, never for fitting raw profiles.
double voigt_fwhm(double gamma, double sigma);

// Full width at half maximum of voigt_value located by bisection.
double voigt_fwhm_numeric(double gamma, double sigma);

} // namespace starktune
