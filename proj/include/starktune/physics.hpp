#pragma once

// Quadratic Stark-shift model of a centrosymmetric emitter and the Gaussian
// spectral-diffusion width it implies under field noise.
//
// Units: frequencies in MHz (linear, nu = omega / 2pi), fields in kV/cm,
// polarizability-difference coefficients kappa = alpha / h in MHz/(kV/cm)^2,
// times in seconds.

namespace starktune {

struct FieldVector {
    double e_x = 0.0; // kV/cm, along the molecule's long (electrode) axis
    double e_z = 0.0; // kV/cm, out of the substrate plane

    friend FieldVector operator+(FieldVector a, FieldVector b) {
        return {a.e_x + b.e_x, a.e_z + b.e_z};
    }
    friend FieldVector operator-(FieldVector a, FieldVector b) {
        return {a.e_x - b.e_x, a.e_z - b.e_z};
    }
    friend bool operator==(const FieldVector&, const FieldVector&) = default;
};

struct MoleculeModel {
    double nu_zpl = 381.0;   // THz
    double kappa_xx = 1.82;  // MHz/(kV/cm)^2
    double kappa_yy = 0.0;   // kept for completeness; no y field is modeled
    double kappa_zz = 0.0;
    double d_x = 0.0;        // MHz/(kV/cm)
    double d_z = 0.0;
    double e0_x = 0.0;       // intrinsic local offset field, kV/cm
    double e0_z = 0.0;
    double gamma0 = 80.0;    // Lorentzian FWHM, MHz
    double peak_rate = 2.0e4;// counts/s on resonance
    double dw_qy = 0.35;     // Debye-Waller x quantum yield, (0, 1]

    // Throws ConfigError naming the first violated invariant.
    void validate() const;

    FieldVector intrinsic_field() const { return {e0_x, e0_z}; }
};

// Two-timescale Gaussian noise environment. Each field axis carries a fast
// and a slow Ornstein-Uhlenbeck component with stationary variances
// w_fast * sigma^2 and (1 - w_fast) * sigma^2; sigma0 is a frequency-domain
// floor added in quadrature.
struct NoiseModel {
    double sigma_ex = 0.0; // kV/cm
    double sigma_ez = 0.0; // kV/cm
    double tau_fast = 0.2; // s
    double tau_slow = 100.0;
    double w_fast = 0.4;
    double sigma0 = 0.0;   // MHz

    void validate() const;

    bool is_silent() const {
        return sigma_ex == 0.0 && sigma_ez == 0.0 && sigma0 == 0.0;
    }
};

// Frequency shift in MHz of the zero-phonon line for the applied field `e`
// (the molecule's intrinsic offset e0 is added here).
double stark_shift(const MoleculeModel& mol, FieldVector e);

// Linearized spectral-diffusion width (MHz): per-axis gradient propagation of
// the field noise, combined in quadrature with the sigma0 floor.
double sd_sigma(const MoleculeModel& mol, FieldVector e, const NoiseModel& noise);

// sqrt(4 a |shift| + sigma0^2) with a = kappa * sigma_E^2. Throws
// std::invalid_argument on negative inputs.
double sqrt_law_sigma(double shift_mag, double a, double sigma0);

} // namespace starktune
