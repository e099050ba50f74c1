#pragma once

#include <optional>
#include <string>
#include <vector>

#include "starktune/physics.hpp"
#include "starktune/simkit.hpp"

namespace starktune {

// Effective per-axis noise products a = kappa * sigma_E^2 (MHz) and the
// frequency floor; sigma^2 = sigma0^2 + 4 a_x s_x + 4 a_z s_z on the locus.
struct SdSensitivity {
    double a_x = 0.0;
    double a_z = 0.0;
    double sigma0 = 0.0;
};

SdSensitivity sensitivity(const MoleculeModel& mol, const NoiseModel& noise);

struct TuningConstraints {
    double e_x_max = 160.0; // kV/cm, |applied e_x|
    double e_z_max = 150.0; // kV/cm, applied e_z in [0, e_z_max]
    std::optional<double> operating_voltage; // V
    double shift_tolerance = 50.0; // MHz

    void validate() const;
};

struct EgossStep {
    double v_bias = 0.0;    // V
    double intensity = 1.0; // reference units
    double duration = 0.0;  // s
};

struct EgossSchedule {
    std::vector<EgossStep> steps;
    FieldState expected_state; // after the last step
    double shift_error = 0.0;  // MHz, predicted shift minus target at the operating voltage
    bool within_tolerance = true;
};

struct TuningPlan {
    double target_shift = 0.0; // MHz, <= 0
    double shift_x = 0.0;      // |shift| carried by the x axis, MHz
    double shift_z = 0.0;
    double predicted_sigma = 0.0; // MHz
    std::optional<FieldVector> field;   // applied field (local field without e0)
    EgossSchedule schedule;
    bool feasible = false;
};

// Points of kappa_xx u_x^2 + kappa_zz u_z^2 = |target| returned as applied
// fields e = u - e0. A zero kappa turns the ellipse into two straight lines
// running over +-`line_extent` kV/cm. Requires d = 0 and kappas >= 0.
// Throws InfeasibleError for a blue (positive) target.
std::vector<FieldVector> isofrequency_locus(const MoleculeModel& mol, double target_shift, int n_points,
                                            double line_extent = 200.0);

// Split of |target| between the axes minimizing sigma, given the reachable
// per-axis shift intervals. Ties go to x. Throws InfeasibleError.
TuningPlan plan_shift_split(const SdSensitivity& sens, double target_shift,
                            double shift_x_min, double shift_x_max,
                            double shift_z_min, double shift_z_max);

// Minimum-sigma field on the isofrequency locus inside the constraint box.
// Requires d = 0. Throws InfeasibleError naming the binding constraint.
TuningPlan plan_min_sd(const MoleculeModel& mol, const NoiseModel& noise, double target_shift,
                       const TuningConstraints& constraints);

// Pump schedule that moves `state` to the plan's field at `operating_voltage`
// under the closed-form charge dynamics. The z target fixes the pump time;
// the bias is chosen so the screening field lands on target at that time.
// With no z change needed, an x-only step runs for 99% screening. Throws
// InfeasibleError when the z target is at or beyond saturation or the bias
// leaves the electrode range. A z target below the present value is a
// no-op for z.
EgossSchedule synthesize_schedule(const TuningPlan& plan, const MoleculeModel& mol, const FieldState& state,
                                  const ChargeDynamics& dyn, const ElectrodeGeometry& geom,
                                  double operating_voltage, double intensity = 1.0,
                                  double shift_tolerance = 50.0);

struct AnisotropyCalibration {
    double a_x = 0.0;
    double a_z = 0.0;
    double sigma0 = 0.0;
    double post_shift_ratio = 0.0; // sigma_x / sigma_z
    double increase_ratio = 0.0;   // (sigma_x - sigma0) / (sigma_z - sigma0)

    SdSensitivity sensitivity() const { return {a_x, a_z, sigma0}; }
};

// Inverts the sqrt law on each axis from a shared base width.
AnisotropyCalibration calibrate_anisotropy(double sigma_base, double sigma_x, double shift_x,
                                           double sigma_z, double shift_z);

} // namespace starktune
