#include "starktune/physics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "starktune/error.hpp"

namespace starktune {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

bool finite(double v) { return std::isfinite(v); }

} // namespace

void MoleculeModel::validate() const {
    require(finite(nu_zpl) && nu_zpl > 0.0, "molecule: nu_zpl must be > 0");
    require(finite(kappa_xx) && kappa_xx >= 0.0, "molecule: kappa_xx must be >= 0");
    require(finite(kappa_yy) && kappa_yy >= 0.0, "molecule: kappa_yy must be >= 0");
    require(finite(kappa_zz) && kappa_zz >= 0.0, "molecule: kappa_zz must be >= 0");
    require(finite(d_x) && finite(d_z), "molecule: dipole terms must be finite");
    require(finite(e0_x) && finite(e0_z), "molecule: e0 must be finite");
    require(finite(gamma0) && gamma0 > 0.0, "molecule: gamma0 must be > 0");
    require(finite(peak_rate) && peak_rate >= 0.0, "molecule: peak_rate must be >= 0");
    require(finite(dw_qy) && dw_qy > 0.0 && dw_qy <= 1.0, "molecule: dw_qy must be in (0, 1]");
}

void NoiseModel::validate() const {
    require(finite(sigma_ex) && sigma_ex >= 0.0, "noise: sigma_ex must be >= 0");
    require(finite(sigma_ez) && sigma_ez >= 0.0, "noise: sigma_ez must be >= 0");
    require(finite(sigma0) && sigma0 >= 0.0, "noise: sigma0 must be >= 0");
    require(finite(tau_fast) && tau_fast > 0.0, "noise: tau_fast must be > 0");
    require(finite(tau_slow) && tau_slow >= tau_fast, "noise: tau_slow must be >= tau_fast");
    require(finite(w_fast) && w_fast >= 0.0 && w_fast <= 1.0, "noise: w_fast must be in [0, 1]");
}

double stark_shift(const MoleculeModel& mol, FieldVector e) {
    const double ux = e.e_x + mol.e0_x;
    const double uz = e.e_z + mol.e0_z;
    return -mol.d_x * ux - mol.d_z * uz - mol.kappa_xx * ux * ux - mol.kappa_zz * uz * uz;
}

double sd_sigma(const MoleculeModel& mol, FieldVector e, const NoiseModel& noise) {
    const double ux = e.e_x + mol.e0_x;
    const double uz = e.e_z + mol.e0_z;
    // |d shift / d E| per axis; reduces to 2 kappa |u| for d = 0.
    const double gx = std::abs(mol.d_x + 2.0 * mol.kappa_xx * ux) * noise.sigma_ex;
    const double gz = std::abs(mol.d_z + 2.0 * mol.kappa_zz * uz) * noise.sigma_ez;
    return std::sqrt(gx * gx + gz * gz + noise.sigma0 * noise.sigma0);
}

double sqrt_law_sigma(double shift_mag, double a, double sigma0) {
    if (!(shift_mag >= 0.0) || !(a >= 0.0) || !(sigma0 >= 0.0)) {
        throw std::invalid_argument("sqrt_law_sigma: shift, a and sigma0 must be >= 0");
    }
    return std::sqrt(4.0 * a * shift_mag + sigma0 * sigma0);
}

} // namespace starktune
