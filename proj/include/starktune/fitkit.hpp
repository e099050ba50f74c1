#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "starktune/simkit.hpp"

namespace starktune {

// Bin-wise photon counts on a common detuning grid.
struct Spectrum {
    std::vector<double> detunings; // MHz, strictly increasing
    std::vector<double> counts;
    int n_traces = 1;
    double observation_span_s = 0.0; // first bin start to last bin end

    void validate() const; // throws DataError
};

Spectrum spectrum_from_trace(const ScanTrace& trace);

// Sum of traces sharing one detuning grid; throws DataError otherwise.
Spectrum integrate_traces(const std::vector<ScanTrace>& traces);

inline constexpr double kDefaultFixedGamma = 80.0; // MHz

struct VoigtFitOptions {
    std::optional<double> fix_gamma;                   // MHz; free when unset
    std::optional<std::pair<double, double>> window;   // detuning range, MHz
    int max_iter = 200;
    int max_reweight = 8;
};

// Parameter order of VoigtFit::cov.
enum VoigtParam { vp_center = 0, vp_gamma, vp_sigma, vp_area, vp_baseline, vp_count };

struct VoigtFit {
    double center = 0.0;    // MHz
    double gamma = 0.0;     // Lorentzian FWHM, MHz
    double sigma = 0.0;     // Gaussian std, MHz
    double area = 0.0;      // counts * MHz
    double amplitude = 0.0; // peak height above baseline, counts
    double baseline = 0.0;  // counts per bin
    double center_err = 0.0;
    double gamma_err = 0.0;
    double sigma_err = 0.0;
    double amplitude_err = 0.0;
    double baseline_err = 0.0;
    Eigen::MatrixXd cov;    // 5x5 in VoigtParam order; zero rows for fixed parameters
    double chi2 = 0.0;      // Poisson-weighted
    int dof = 0;
    double reduced_chi2 = 0.0;
    bool gamma_fixed = false;
    int iterations = 0;
    std::size_t n_bins = 0;

    double fwhm() const;
};

// Model counts b + S * V(delta - c; gamma, sigma).
double voigt_model(const VoigtFit& fit, double delta);

// Poisson-weighted Voigt fit (weights 1/max(model, 1), iterated to the final
// model). Throws DataError when fewer than 10 bins or a span below three
// FWHM estimates, FitError(no_peak) on flat data and
// FitError(non_convergence) when the optimizer stalls.
VoigtFit fit_voigt(const Spectrum& spectrum, const VoigtFitOptions& opts = {});
VoigtFit fit_voigt(const ScanTrace& trace, const VoigtFitOptions& opts = {});

// Independent fits, one per spectrum. Rethrows the first failure.
std::vector<VoigtFit> fit_voigt_batch(const std::vector<Spectrum>& spectra, const VoigtFitOptions& opts,
                                      Execution exec = Execution::parallel);

struct ParabolaPoint {
    double voltage = 0.0;    // V
    double center = 0.0;     // MHz
    double center_err = 0.0; // MHz; <= 0 means unweighted
};

struct ParabolaFit {
    double curvature = 0.0;        // MHz/V^2, positive for a red-opening parabola
    double curvature_err = 0.0;
    double vertex_voltage = 0.0;   // V; NaN for a flat fit
    double vertex_voltage_err = 0.0;
    double vertex_frequency = 0.0; // MHz
    double vertex_frequency_err = 0.0;
    double kappa = 0.0;            // MHz/(kV/cm)^2
    double kappa_err = 0.0;
    Eigen::Matrix3d cov;           // of (c0, c1, c2) in center = c0 + c1 V + c2 V^2
    Eigen::Vector3d coeffs;
    double chi2 = 0.0;
    int dof = 0;
};

// Weighted quadratic regression of line center against voltage.
// kappa = curvature / g^2 with `g_uncertainty` propagated. Throws DataError
// with fewer than four distinct voltages and FitError(rank_deficient) for a
// singular design.
ParabolaFit fit_parabola(const std::vector<ParabolaPoint>& points, const ElectrodeGeometry& geom,
                         double g_uncertainty = 0.0);

struct SqrtLawPoint {
    double shift = 0.0; // |frequency shift|, MHz, >= 0
    double sigma = 0.0; // MHz
    double sigma_err = 0.0; // <= 0 means unweighted
};

struct SqrtLawFit {
    double a = 0.0;      // MHz
    double a_err = 0.0;
    double sigma0 = 0.0; // MHz
    double sigma0_err = 0.0;
    double offset = 0.0; // fitted sigma0^2, may be negative
    Eigen::Matrix2d cov; // of (a, offset)
    double chi2 = 0.0;
    int dof = 0;
    bool unphysical = false; // a < 0
};

// Linear least squares of sigma^2 = 4 a shift + sigma0^2.
SqrtLawFit fit_sqrt_law(const std::vector<SqrtLawPoint>& points);

struct FieldSpread {
    double sigma_e = 0.0; // kV/cm
    double sigma_e_err = 0.0;
};

// sigma_E = sqrt(a / kappa) with first-order error propagation.
FieldSpread extract_field_variance(double a, double kappa, double a_err = 0.0, double kappa_err = 0.0);

struct PeakOptions {
    int smooth = 5;              // boxcar width, bins
    double threshold = 6.0;      // in units of the smoothed background noise
    double min_separation = 300; // MHz
};

struct Peak {
    double detuning = 0.0;
    double height = 0.0; // smoothed counts above background
};

// Local maxima of the smoothed spectrum, strongest first.
std::vector<Peak> find_peaks(const Spectrum& spectrum, const PeakOptions& opts = {});

struct TrackOptions {
    double max_jump = 3000.0;      // MHz per voltage step
    double window_half = 1500.0;   // MHz around each candidate
    std::optional<std::pair<double, double>> voltage_mask; // keep voltages inside
    std::optional<double> seed_center; // MHz near the seed voltage; strongest peak if unset
    std::optional<double> seed_voltage; // V; first unmasked voltage if unset
    PeakOptions peaks;
    VoigtFitOptions fit{kDefaultFixedGamma, std::nullopt, 200, 8};
    Execution exec = Execution::parallel;
};

struct LinePoint {
    double voltage = 0.0;
    VoigtFit fit;
};

struct LineTrack {
    std::vector<LinePoint> points;

    std::vector<ParabolaPoint> parabola_points() const;
};

// Follows one line through a sweep map by nearest-neighbour association
// with polynomial extrapolation, then fits a Voigt profile around each
// associated peak.
LineTrack track_line(const SweepMap& map, const TrackOptions& opts = {});

} // namespace starktune
