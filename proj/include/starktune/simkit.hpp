#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "starktune/noise.hpp"
#include "starktune/physics.hpp"

namespace starktune {

// Linear voltage -> in-plane field map of the interdigitated electrodes.
struct ElectrodeGeometry {
    double g = 1.6;       // (kV/cm)/V
    double v_min = -100.0;
    double v_max = 100.0;

    void validate() const;
    bool in_range(double v) const { return v >= v_min && v <= v_max; }
};

// Controllable plus persistent field environment of a session.
struct FieldState {
    double v_applied = 0.0;  // V
    double e_screen_x = 0.0; // kV/cm, trapped-charge screening field
    double e_z_charge = 0.0; // kV/cm, trapped-charge vertical field

    friend bool operator==(const FieldState&, const FieldState&) = default;
};

// First-order trapped-charge dynamics under optical pumping. Rates are per
// unit pump intensity; the reference intensity is 1.
struct ChargeDynamics {
    double k_screen = 0.019187712527856; // 1/s; ln(10)/120: 90% screening in 120 s
    double r_z = 0.5;                    // (kV/cm)/s
    double e_z_sat = 150.0;              // kV/cm
    double decay_time = std::numeric_limits<double>::infinity(); // s

    void validate() const;
};

struct ScanConfig {
    double span_ghz = 2.0;
    double scan_speed = 0.5; // GHz/s
    double bin_time = 0.01;  // s
    int n_sweeps = 1;
    double inter_sweep_wait = 0.0; // s
    std::uint64_t seed = 0;
    double center_mhz = 0.0;            // window center, detuning from the reference ZPL
    double background_fraction = 0.01;  // background rate / peak_rate

    void validate() const;
    double bin_width_mhz() const { return scan_speed * 1e3 * bin_time; }
    int n_bins() const;
    double sweep_duration() const { return n_bins() * bin_time; }
    std::vector<double> detuning_grid() const; // bin centers, MHz, increasing
};

struct ScanTrace {
    std::vector<double> detunings;    // MHz, strictly increasing
    std::vector<std::int64_t> counts; // photon counts per bin
    double start_time = 0.0;          // s since session start
    int sweep_index = 0;
    double bin_time = 0.01;           // s

    double time_of_bin(std::size_t i) const { return start_time + (static_cast<double>(i) + 0.5) * bin_time; }
    double duration() const { return static_cast<double>(counts.size()) * bin_time; }
    void validate() const; // throws DataError
};

struct SweepMap {
    std::vector<double> voltages;
    std::vector<std::vector<ScanTrace>> sweeps; // one or more sweeps per voltage
    std::vector<std::string> molecule_ids;

    void validate() const;
};

enum class Execution { serial, parallel };

double field_from_voltage(double v, const ElectrodeGeometry& geom);

// Electrode field plus trapped-charge fields; the molecule's own offset e0 is
// added inside stark_shift.
FieldVector local_field(const FieldState& state, const ElectrodeGeometry& geom);

// Pump with the electrodes grounded. The vertical field grows toward
// saturation while the in-plane screening relaxes the local field
// (screen + e_offset_x) toward zero. v_applied of the result is unchanged.
FieldState apply_oss(const FieldState& state, const ChargeDynamics& dyn, double intensity,
                     double duration, const ElectrodeGeometry& geom, double e_offset_x = 0.0);

// Pump while `v_bias` is held on the electrodes: the local in-plane field
// g v_bias + screen + e_offset_x decays exponentially toward zero and the
// vertical field grows as in apply_oss. v_applied of the result is unchanged.
FieldState apply_egoss(const FieldState& state, const ChargeDynamics& dyn, double intensity,
                       double v_bias, double duration, const ElectrodeGeometry& geom,
                       double e_offset_x = 0.0);

// Unpumped relaxation of the trapped-charge fields over `duration`.
FieldState apply_wait(const FieldState& state, const ChargeDynamics& dyn, double duration);

// One laser sweep to be simulated: the field state held during it and when
// it starts.
struct SweepJob {
    double start_time = 0.0;
    FieldState state;
    int sweep_index = 0;
};

// Everything the scan kernel needs besides the jobs.
struct SimulationSetup {
    std::vector<MoleculeModel> molecules;
    NoiseModel noise;
    ElectrodeGeometry geometry;
    ScanConfig scan;
    std::uint64_t step_key = 0; // distinguishes RNG streams of successive session steps
};

// Result of simulating a batch of jobs. `final_noise` holds each molecule's
// noise state at the end of the last sweep.
struct JobBatchResult {
    std::vector<ScanTrace> traces;
    std::vector<NoiseState> final_noise;
    double end_time = 0.0;
};

// Monte-Carlo kernel. Jobs must be ordered by start time and must not
// overlap. `initial_noise` (one per molecule, at `initial_time`) continues a
// previous batch; empty means stationary start. Serial and parallel
// execution produce bit-identical results.
JobBatchResult simulate_jobs(const SimulationSetup& setup, const std::vector<SweepJob>& jobs,
                             const std::vector<NoiseState>& initial_noise, double initial_time,
                             Execution exec);

// n_sweeps sweeps of one molecule at a fixed field state, starting at t = 0
// from stationary noise. Seeded by cfg.seed.
std::vector<ScanTrace> simulate_scan(const MoleculeModel& mol, const FieldState& state,
                                     const NoiseModel& noise, const ElectrodeGeometry& geom,
                                     const ScanConfig& cfg, Execution exec = Execution::parallel);

// cfg.n_sweeps sweeps at each voltage, voltages visited in order; all
// molecules contribute to every trace.
SweepMap simulate_sweep_map(const std::vector<MoleculeModel>& mols, const FieldState& state,
                            const NoiseModel& noise, const ElectrodeGeometry& geom,
                            const std::vector<double>& voltages, const ScanConfig& cfg,
                            Execution exec = Execution::parallel);

// Evenly spaced voltages including both ends.
std::vector<double> linspace(double from, double to, int count);

// Stateful virtual laboratory: owns the field state, the session clock, and
// each molecule's noise state so successive steps are continuous in time.
class Session {
public:
    Session(std::vector<MoleculeModel> mols, NoiseModel noise, ElectrodeGeometry geom,
            ChargeDynamics dyn, ScanConfig scan, std::uint64_t seed);

    const FieldState& state() const { return state_; }
    double clock() const { return clock_; }
    const std::vector<MoleculeModel>& molecules() const { return setup_.molecules; }
    const ElectrodeGeometry& geometry() const { return setup_.geometry; }
    const ScanConfig& scan_config() const { return setup_.scan; }

    void set_state(const FieldState& state);
    void set_voltage(double v);
    std::vector<ScanTrace> scan(std::optional<int> n_sweeps = std::nullopt,
                                Execution exec = Execution::parallel);
    SweepMap sweep(const std::vector<double>& voltages, Execution exec = Execution::parallel);
    // Pulses act relative to the first molecule's intrinsic offset field.
    void oss(double intensity, double duration);
    void egoss(double v_bias, double intensity, double duration);
    void wait(double duration);

private:
    JobBatchResult run(const std::vector<SweepJob>& jobs, Execution exec);
    double offset_x() const;

    SimulationSetup setup_;
    ChargeDynamics dyn_;
    std::uint64_t seed_;
    FieldState state_;
    double clock_ = 0.0;
    std::uint64_t step_ = 0;
    std::vector<NoiseState> noise_;
    double noise_time_ = 0.0;
};

} // namespace starktune
